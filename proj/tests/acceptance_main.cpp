#include <cstdio>
#include <cstdlib>
#include <string>

#include "lobmf/acceptance.hpp"

int main(int argc, char** argv) {
  lobmf::AcceptanceOptions opt;
  for (int i = 1; i < argc; ++i) opt.only.push_back(std::atoi(argv[i]));
  bool all = true;
  lobmf::run_acceptance(opt, [&](const lobmf::CriterionResult& r) {
    std::printf("%s\n", lobmf::format_result(r).c_str());
    std::fflush(stdout);
    all = all && r.pass;
  });
  return all ? 0 : 1;
}
