#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lobmf/errors.hpp"
#include "lobmf/experiment.hpp"

using namespace lobmf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("lobmf_test_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("config round trip is a fixed point") {
  const std::string text = R"({
    "kind": "dpp-check", "preset": "meanfield-dpp", "params": {"lambda": 1.5, "x0": 0.75},
    "seed": 18446744073709551615, "particles": 1000, "steps": 40, "q0_law": [1, 2, 2],
    "policy_family": [0.1, 0.6], "x_grid": [0.5, 1], "q_grid": [0, 1, 2], "t_split": [0.25, 0.5],
    "tolerances": {"picard": 1e-4, "z": 2.5}, "threads": 2, "write_ensemble": true, "out": "somewhere"
  })";
  const auto a = parse_config(text);
  CHECK(a.seed == 18446744073709551615ull);
  CHECK(a.params.at("lambda") == 1.5);
  CHECK(a.q0_law->size() == 3);
  CHECK(a.tolerances.z == 2.5);
  CHECK(a.tolerances.max_picard == 25);
  const auto s1 = serialize_config(a);
  const auto b = parse_config(s1);
  CHECK(a == b);
  CHECK(serialize_config(b) == s1);
  for (const auto& k : experiment_kinds()) {
    const auto d = default_config(k);
    CHECK(parse_config(serialize_config(d)) == d);
  }
}

TEST_CASE("strict parsing names the offending key") {
  auto key_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ValidationError& e) {
      return e.key();
    }
    return std::string("<accepted>");
  };
  CHECK(key_of(R"({"kind": "simulate", "particels": 10})") == "particels");
  CHECK(key_of(R"({"kind": "simulate", "tolerances": {"picrad": 1}})") == "tolerances.picrad");
  CHECK(key_of(R"({"kind": "simulate", "params": {"lambda": -1}})") == "params.lambda");
  CHECK(key_of(R"({"kind": "simulate", "params": {"nope": 1}})") == "params.nope");
  CHECK(key_of(R"({"kind": "simulate", "particles": 0})") == "particles");
  CHECK(key_of(R"({"kind": "simulate", "particles": -3})") == "particles");
  CHECK(key_of(R"({"kind": "simulate", "steps": 1.5})") == "steps");
  CHECK(key_of(R"({"kind": "simulate", "preset": "nowhere"})") == "preset");
  CHECK(key_of(R"({"kind": "teleport"})") == "kind");
  CHECK(key_of(R"({"preset": "poisson-unit"})") == "kind");
  CHECK(key_of(R"({"kind": "simulate", "buy_form": "sideways"})") == "buy_form");
  CHECK(key_of(R"({"kind": "acceptance", "criteria": [13]})") == "criteria");
  CHECK(key_of(R"({"kind": "simulate", "x_grid": [1, "a"]})") == "x_grid[1]");
  CHECK(key_of("{not json") == "config");
  CHECK(key_of(R"({"kind": "simulate", "q0_law": []})") == "q0_law");
}

TEST_CASE("bertrand run writes the duopoly equilibrium") {
  auto cfg = default_config("bertrand");
  cfg.out = scratch("bertrand").string();
  const auto r = run_experiment(cfg);
  CHECK(r.exit_code == exit_ok);
  const auto csv = slurp(fs::path(cfg.out) / "equilibrium.csv");
  std::istringstream is(csv);
  std::string header, line;
  std::getline(is, header);
  CHECK(header.find("seed,particles,tolerance,tail_bound") != std::string::npos);
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    const auto c1 = line.find(',');
    const double price = std::stod(line.substr(c1 + 1));
    CHECK(price == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
    CHECK(line.find("interior") != std::string::npos);
  }
  CHECK(rows == 2);
  CHECK(fs::exists(fs::path(cfg.out) / "summary.json"));
}

TEST_CASE("game presets are rejected for liquidity experiments") {
  auto cfg = default_config("simulate");
  cfg.preset = "linear-duopoly";
  cfg.out = scratch("wrong").string();
  CHECK_THROWS_AS(run_experiment(cfg), ValidationError);
}

TEST_CASE("simulate is deterministic and echoes provenance") {
  auto cfg = default_config("simulate");
  cfg.seed = 7;
  cfg.particles = 2000;
  cfg.write_ensemble = true;
  cfg.out = scratch("sim_a").string();
  const auto a = run_experiment(cfg);
  const auto dir_a = cfg.out;
  cfg.out = scratch("sim_b").string();
  const auto b = run_experiment(cfg);
  CHECK(a.exit_code == exit_ok);
  CHECK(b.exit_code == exit_ok);
  for (const char* f : {"law.csv", "ensemble.bin"})
    CHECK(slurp(fs::path(dir_a) / f) == slurp(fs::path(cfg.out) / f));
  const auto s = slurp(fs::path(cfg.out) / "summary.json");
  CHECK(s.find("\"seed\": 7") != std::string::npos);
  CHECK(s.find("\"picard\": 0.001") != std::string::npos);
}

TEST_CASE("nonconvergence maps to its exit code") {
  auto cfg = default_config("simulate");
  cfg.preset = "meanfield-picard";
  cfg.particles = 256;
  cfg.tolerances.max_picard = 2;
  cfg.out = scratch("noconv").string();
  const auto r = run_experiment(cfg);
  CHECK(r.exit_code == exit_nonconvergence);
  CHECK(r.status == "nonconvergence");
  CHECK(slurp(fs::path(cfg.out) / "summary.json").find("gap_history") != std::string::npos);
}

TEST_CASE("hjb scan on the frozen book is within tolerance everywhere") {
  auto cfg = default_config("hjb-scan");
  cfg.particles = 16;
  cfg.reference_particles = 16;
  cfg.steps = 64;
  cfg.out = scratch("hjb").string();
  const auto r = run_experiment(cfg);
  CHECK(r.exit_code == exit_ok);
  const auto csv = slurp(fs::path(cfg.out) / "hjb.csv");
  CHECK(csv.find("violating") == std::string::npos);
  CHECK(csv.find("within tolerance") != std::string::npos);
}

TEST_CASE("preset catalog") {
  const auto text = describe_presets();
  for (const char* name : {"linear-duopoly", "poisson-unit", "degenerate-hjb", "boundary", "gen-check"})
    CHECK(text.find(name) != std::string::npos);
  for (const auto& e : list_presets()) CHECK_FALSE(e.exercises.empty());
}
