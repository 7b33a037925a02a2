#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lobmf {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;  // runtime budget in seconds, 0 when none is stated
};

struct AcceptanceOptions {
  unsigned threads = 1;
  std::vector<int> only;  // empty runs every criterion
};

/// One line: "PASS [id] name: detail (t s)".
std::string format_result(const CriterionResult& r);

/// Runs the acceptance criteria in order, reporting each result as soon as it
/// is available. A criterion that throws is reported as a failure.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

}  // namespace lobmf
