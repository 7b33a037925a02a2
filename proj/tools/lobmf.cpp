// lobmf: run experiments from a JSON config or a preset.
//
//   lobmf simulate --preset poisson-unit --seed 7 --out runs/p7
//   lobmf value --config value.json --threads 4
//   lobmf acceptance
//   lobmf presets

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lobmf/errors.hpp"
#include "lobmf/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> threads;
  std::string preset;
  std::vector<int> only;
};

int run(const std::string& kind, const Common& o) {
  auto cfg = o.config.empty() ? lobmf::default_config(kind) : lobmf::load_config(o.config);
  if (cfg.kind != kind) throw lobmf::ValidationError("kind", "config is for '" + cfg.kind + "', not '" + kind + "'");
  if (!o.preset.empty()) cfg.preset = o.preset;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out = o.out;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.only.empty()) cfg.criteria = o.only;
  const auto r = lobmf::run_experiment(cfg, &std::cout);
  if (kind != "acceptance") std::cout << r.summary_json << "\n";
  std::cerr << kind << ": " << r.status << " (" << cfg.out << ")\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lobmf: limit-order-book mean-field experiments"};
  app.require_subcommand(1);
  Common o;
  std::string chosen;
  for (const auto& kind : lobmf::experiment_kinds()) {
    auto* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
    sub->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--preset", o.preset, "coefficient preset (see `lobmf presets`)");
    if (kind == "acceptance") sub->add_option("--only", o.only, "criterion ids to run");
    sub->callback([&chosen, kind] { chosen = kind; });
  }
  auto* presets = app.add_subcommand("presets", "list coefficient presets and what they exercise");
  presets->callback([&chosen] { chosen = "presets"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : lobmf::exit_validation;
  }

  try {
    if (chosen == "presets") {
      std::cout << lobmf::describe_presets();
      return lobmf::exit_ok;
    }
    return run(chosen, o);
  } catch (const lobmf::ValidationError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return lobmf::exit_validation;
  } catch (const lobmf::NonconvergenceError& e) {
    std::cerr << "did not converge: " << e.what() << "\n";
    return lobmf::exit_nonconvergence;
  } catch (const lobmf::InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return lobmf::exit_invariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
