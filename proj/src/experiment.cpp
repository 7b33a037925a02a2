#include "lobmf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lobmf/acceptance.hpp"
#include "lobmf/bertrand.hpp"
#include "lobmf/control.hpp"
#include "lobmf/ensemble_io.hpp"
#include "lobmf/errors.hpp"
#include "lobmf/generator.hpp"

namespace lobmf {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"bertrand", "simulate",  "value",    "dpp-check",
                                          "utility",  "ito-check", "hjb-scan", "acceptance"};
  return k;
}

std::string default_preset(const std::string& kind) {
  if (kind == "bertrand") return "linear-duopoly";
  if (kind == "simulate") return "poisson-unit";
  if (kind == "dpp-check") return "poisson-dpp";
  if (kind == "hjb-scan") return "degenerate-hjb";
  if (kind == "acceptance") return "";
  return "meanfield-diffusion";
}

ExperimentConfig default_config(const std::string& kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.preset = default_preset(kind);
  return c;
}

namespace {

// ---- parsing -------------------------------------------------------------

double num(const json& j, const std::string& key) {
  if (!j.is_number()) throw ValidationError(key, "must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(key, "must be finite");
  return v;
}

std::uint64_t count(const json& j, const std::string& key, std::uint64_t lo) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw ValidationError(key, "must be an integer");
  if (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)
    throw ValidationError(key, "must be nonnegative");
  const auto v = j.get<std::uint64_t>();
  if (v < lo) throw ValidationError(key, "must be at least " + std::to_string(lo));
  return v;
}

std::vector<double> vec(const json& j, const std::string& key) {
  if (!j.is_array()) throw ValidationError(key, "must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(num(j[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

std::string str(const json& j, const std::string& key) {
  if (!j.is_string()) throw ValidationError(key, "must be a string");
  return j.get<std::string>();
}

Tolerances parse_tolerances(const json& j) {
  if (!j.is_object()) throw ValidationError("tolerances", "must be an object");
  Tolerances t;
  for (const auto& [k, v] : j.items()) {
    const std::string key = "tolerances." + k;
    if (k == "picard") t.picard = num(v, key);
    else if (k == "max_picard") t.max_picard = static_cast<int>(count(v, key, 1));
    else if (k == "deviation") t.deviation = num(v, key);
    else if (k == "z") t.z = num(v, key);
    else if (k == "game") t.game = num(v, key);
    else throw ValidationError(key, "unknown key");
  }
  return t;
}

json to_json(const Tolerances& t) {
  return {{"picard", t.picard}, {"max_picard", t.max_picard}, {"deviation", t.deviation}, {"z", t.z},
          {"game", t.game}};
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = c.kind;
  j["preset"] = c.preset;
  j["params"] = json::object();
  for (const auto& [k, v] : c.params) j["params"][k] = v;
  j["seed"] = c.seed;
  j["particles"] = c.particles;
  j["reference_particles"] = c.reference_particles;
  j["steps"] = c.steps;
  j["q0_law"] = c.q0_law ? json(*c.q0_law) : json(nullptr);
  j["policy_family"] = c.policy_family;
  j["x_grid"] = c.x_grid;
  j["q_grid"] = c.q_grid;
  j["l_grid"] = c.l_grid;
  j["t_split"] = c.t_split;
  j["deltas"] = c.deltas;
  j["phi"] = c.phi;
  j["buy_form"] = c.buy_form;
  j["tolerances"] = to_json(c.tolerances);
  j["out"] = c.out;
  j["threads"] = c.threads;
  j["write_ensemble"] = c.write_ensemble;
  j["criteria"] = c.criteria;
  return j;
}

BuyForm parse_buy_form(const std::string& s) {
  for (auto f : {BuyForm::model, BuyForm::raw, BuyForm::compensated, BuyForm::negated})
    if (to_string(f) == s) return f;
  throw ValidationError("buy_form", "must be one of model, raw, compensated, negated");
}

// ---- output helpers ------------------------------------------------------

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const fs::path& path, std::vector<std::string> header) : os_(path), width_(header.size()) {
    if (!os_) throw DomainError("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw InvariantViolation("csv row width mismatch");
    for (std::size_t k = 0; k < cells.size(); ++k) os_ << (k ? "," : "") << cells[k];
    os_ << "\n";
  }

 private:
  std::ofstream os_;
  std::size_t width_;
};

struct Provenance {
  std::uint64_t seed;
  std::size_t particles;
  double tolerance;
  double tail_bound;
  std::vector<std::string> cells() const {
    return {std::to_string(seed), std::to_string(particles), g17(tolerance), g17(tail_bound)};
  }
};

const std::vector<std::string> kProvenance{"seed", "particles", "tolerance", "tail_bound"};

std::vector<std::string> with_provenance(std::vector<std::string> cols) {
  cols.insert(cols.end(), kProvenance.begin(), kProvenance.end());
  return cols;
}

std::vector<std::string> cat(std::vector<std::string> a, const Provenance& p) {
  const auto c = p.cells();
  a.insert(a.end(), c.begin(), c.end());
  return a;
}

// ---- run context ---------------------------------------------------------

struct Ctx {
  const ExperimentConfig& cfg;
  fs::path dir;
  std::ostream* log;
  json summary;
  RunResult result;

  void note(const std::string& line) const {
    if (log) *log << line << "\n";
  }
  fs::path file(const std::string& name) {
    result.files.push_back(name);
    return dir / name;
  }
  void fail(int code, const std::string& status) {
    if (code > result.exit_code) {
      result.exit_code = code;
      result.status = status;
    }
  }
};

Preset load_preset(const ExperimentConfig& c, const std::string& want_kind) {
  auto p = make_preset(c.preset, c.params);
  if (p.kind != want_kind)
    throw ValidationError("preset", "'" + c.preset + "' is not a " + want_kind + " preset");
  if (c.q0_law) p.q0_law = from_samples(*c.q0_law);
  return p;
}

std::vector<Policy> family_of(const ExperimentConfig& c, const Preset& p) {
  return constant_family(c.policy_family.empty() ? p.levels : c.policy_family);
}

ValueConfig value_config(const ExperimentConfig& c, const Preset& p) {
  ValueConfig v;
  v.steps = c.steps;
  v.particles = c.particles;
  v.reference_particles = c.reference_particles;
  v.seed = c.seed;
  v.picard_tol = c.tolerances.picard;
  v.max_picard = c.tolerances.max_picard;
  v.threads = c.threads;
  (void)p;
  return v;
}

ItoConfig ito_config(const ExperimentConfig& c, const Preset& p) {
  ItoConfig i;
  i.x0 = p.x0;
  i.q0 = p.q0;
  i.horizon = p.horizon;
  i.steps = c.steps;
  i.particles = c.particles;
  i.seed = c.seed;
  i.picard_tol = c.tolerances.picard;
  i.max_picard = c.tolerances.max_picard;
  i.threads = c.threads;
  return i;
}

std::vector<double> or_default(const std::vector<double>& v, std::vector<double> d) { return v.empty() ? d : v; }

// ---- experiments ---------------------------------------------------------

void run_bertrand(Ctx& x) {
  auto p = load_preset(x.cfg, "game");
  p.game.tolerance = x.cfg.tolerances.game;
  const auto rep = solve_equilibrium(p.game);
  double scale = 0.0;
  for (const auto& s : rep.sellers) scale = std::max(scale, s.price);
  if (scale == 0.0) scale = 1.0;
  const double gain = max_deviation_gain(p.game, rep, 200);
  const Provenance prov{x.cfg.seed, 0, p.game.tolerance, 0.0};
  Csv csv(x.file("equilibrium.csv"),
          with_provenance({"seller", "price", "demand", "candidate_demand", "cost", "profit", "class"}));
  bool exits_ok = true;
  for (const auto& s : rep.by_id()) {
    csv.row(cat({std::to_string(s.id), g17(s.price), g17(s.demand), g17(s.candidate_demand), g17(s.cost),
                 g17(s.profit), to_string(s.cls)},
                prov));
    if (s.cls == Participation::exited && s.candidate_demand > 0.0) exits_ok = false;
  }
  const bool pass = gain <= x.cfg.tolerances.deviation * scale && exits_ok;
  x.summary["result"] = {{"prices", rep.prices()},
                         {"active", rep.active_count},
                         {"boundary", rep.boundary_count},
                         {"exited", rep.exit_count},
                         {"iterations", rep.iterations},
                         {"deviation_gain", gain},
                         {"price_scale", scale},
                         {"pass", pass}};
  if (!pass) x.fail(exit_invariant, "invariant-violation");
}

void run_simulate(Ctx& x) {
  const auto p = load_preset(x.cfg, "liquidity");
  const auto& c = x.cfg;
  SimulationOptions opt{TimeGrid::uniform(0.0, p.horizon, c.steps), c.seed, c.particles, c.tolerances.picard,
                        c.tolerances.max_picard, c.threads};
  const double level = c.policy_family.empty() ? 0.0 : c.policy_family.front();
  const auto xs = simulate_midprice(p.model, p.x0, opt.grid, c.seed, c.particles, c.threads);
  const auto ens = simulate_liquidity(p.model, p.q0_law, Policy::constant(level), xs, opt);
  const Provenance prov{c.seed, c.particles, c.tolerances.picard, 0.0};
  {
    Csv csv(x.file("law.csv"), with_provenance({"t", "mean", "std", "min", "max", "w1_to_initial"}));
    for (std::size_t k = 0; k < ens.grid.size(); ++k) {
      const auto& mu = ens.law_flow[k];
      csv.row(cat({g17(ens.grid.nodes[k]), g17(mu.mean()), g17(mu.stddev()), g17(mu.atoms().front()),
                   g17(mu.atoms().back()), g17(wasserstein(1, mu, ens.law_flow.front()))},
                  prov));
    }
  }
  const auto q = ens.final_q();
  const double n = static_cast<double>(q.size());
  const double mean = std::accumulate(q.begin(), q.end(), 0.0) / n;
  double var = 0.0;
  for (double v : q) var += (v - mean) * (v - mean);
  var /= std::max(1.0, n - 1.0);
  double k_mean = 0.0;
  for (const auto& k : ens.k_paths) k_mean += k.back();
  k_mean /= n;
  if (c.write_ensemble) {
    json params = {{"preset", p.name}, {"params", p.params}, {"policy_level", level}};
    write_ensemble(x.file("ensemble.bin").string(), ens, params.dump());
  }
  x.summary["result"] = {{"picard_iterations", ens.meta.iterations},
                         {"gap", ens.meta.gap},
                         {"gap_history", ens.meta.gap_history},
                         {"final_q_mean", mean},
                         {"final_q_variance", var},
                         {"final_q_se", std::sqrt(var / n)},
                         {"regulator_mean", k_mean},
                         {"policy_level", level}};
}

void run_value(Ctx& x) {
  const auto p = load_preset(x.cfg, "liquidity");
  const auto& c = x.cfg;
  const auto vc = value_config(c, p);
  const auto t = value_table(p.model, p.reward, family_of(c, p), or_default(c.x_grid, {p.x0}),
                             or_default(c.q_grid, {p.q0}), p.q0_law, vc);
  Csv csv(x.file("value.csv"), with_provenance({"x", "q", "value", "se", "policy", "picard_iterations"}));
  for (const auto& e : t.cells)
    csv.row(cat({g17(e.x), g17(e.q), g17(e.value), g17(e.se), e.policy.describe(), std::to_string(e.picard_iterations)},
                {c.seed, c.particles, p.reward.tolerance, e.tail_bound}));
  json res = {{"cells", t.cells.size()}};
  if (t.cells.size() >= 2) {
    const auto r = value_properties(p.model, p.reward, t);
    res["properties"] = {{"worst_q_monotone_z", r.worst_q_monotone},
                         {"worst_x_monotone_z", r.worst_x_monotone},
                         {"worst_lipschitz_z", r.worst_lipschitz},
                         {"lipschitz_constant", r.lipschitz_constant},
                         {"violations", r.violations},
                         {"pass", r.pass}};
    if (!r.pass) x.fail(exit_invariant, "invariant-violation");
  }
  x.summary["result"] = res;
}

void run_dpp(Ctx& x) {
  const auto p = load_preset(x.cfg, "liquidity");
  const auto& c = x.cfg;
  DppConfig dc;
  dc.value = value_config(c, p);
  dc.bin_particles = c.reference_particles;
  dc.x_bins = or_default(c.x_grid, {p.x0});
  std::vector<double> qb;
  for (int k = 0; k < 20; ++k) qb.push_back(k);
  dc.q_bins = or_default(c.q_grid, qb);
  Csv csv(x.file("dpp.csv"), with_provenance({"t_split", "lhs", "rhs", "gap", "se", "lhs_se", "rhs_se", "bins_used",
                                              "best_first_leg", "pass"}));
  json rows = json::array();
  bool all = true;
  for (double ts : or_default(c.t_split, {0.5})) {
    dc.t_split = ts;
    const auto r = dpp_residual(p.model, p.reward, family_of(c, p), p.x0, p.q0, p.q0_law, dc);
    const bool pass = std::abs(r.gap) <= c.tolerances.z * r.se + r.tail_bound;
    all = all && pass;
    csv.row(cat({g17(ts), g17(r.lhs), g17(r.rhs), g17(r.gap), g17(r.se), g17(r.lhs_se), g17(r.rhs_se),
                 std::to_string(r.bins_used), std::to_string(r.best_first_leg), pass ? "1" : "0"},
                {c.seed, c.particles, c.tolerances.z, r.tail_bound}));
    rows.push_back({{"t_split", ts}, {"gap", r.gap}, {"se", r.se}, {"tail_bound", r.tail_bound}, {"pass", pass}});
  }
  x.summary["result"] = {{"splits", rows}, {"pass", all}};
  if (!all) x.fail(exit_invariant, "check-failed");
}

void run_utility(Ctx& x) {
  const auto p = load_preset(x.cfg, "liquidity");
  const auto& c = x.cfg;
  const auto u = export_utility(p.model, p.reward, family_of(c, p), or_default(c.x_grid, {0.5, 1.0, 1.5}),
                                or_default(c.q_grid, {1, 2, 3, 4, 5, 6}), value_config(c, p));
  Csv csv(x.file("utility.csv"), with_provenance({"x", "q", "utility", "se", "policy"}));
  for (const auto& e : u.table.cells)
    csv.row(cat({g17(e.x), g17(e.q), g17(e.value), g17(e.se), e.policy.describe()},
                {c.seed, c.particles, p.reward.tolerance, e.tail_bound}));
  x.summary["result"] = {{"decreasing_in_q", u.decreasing_in_q},
                         {"convex_in_q", u.convex_in_q},
                         {"nondecreasing_in_x", u.nondecreasing_in_x},
                         {"dq", u.dq},
                         {"d2q", u.d2q},
                         {"d2q_se", u.d2q_se}};
}

void run_ito(Ctx& x) {
  const auto p = load_preset(x.cfg, "liquidity");
  const auto& c = x.cfg;
  const auto ic = ito_config(c, p);
  const double level = c.policy_family.empty() ? 0.5 : c.policy_family.front();
  std::vector<CylindricalFunction> phis;
  for (auto& f : shipped_test_functions())
    if (c.phi == "all" || c.phi == f.name) phis.push_back(f);
  if (phis.empty()) throw ValidationError("phi", "no shipped test function named '" + c.phi + "'");
  Csv csv(x.file("ito.csv"),
          with_provenance({"phi", "lhs", "rhs", "gap", "se", "lhs_local", "rhs_local", "se_local", "lhs_law", "rhs_law",
                           "se_law", "reflections", "precondition_ok", "pass"}));
  json rows = json::array();
  bool all = true;
  for (const auto& phi : phis) {
    const auto r = ito_consistency(phi, p.model, Policy::constant(level), p.q0_law, ic);
    // reflection where phi has a q-slope puts the run outside the identity being checked
    const bool pass = r.precondition_ok && std::abs(r.gap) <= c.tolerances.z * r.se;
    if (r.precondition_ok) all = all && pass;
    else x.note("ito-check: " + r.phi + " skipped, reflection met a nonzero q-derivative");
    csv.row(cat({"\"" + r.phi + "\"", g17(r.lhs), g17(r.rhs), g17(r.gap), g17(r.se), g17(r.lhs_local),
                 g17(r.rhs_local), g17(r.se_local), g17(r.lhs_law), g17(r.rhs_law), g17(r.se_law),
                 std::to_string(r.reflections), r.precondition_ok ? "1" : "0", pass ? "1" : "0"},
                {c.seed, c.particles, c.tolerances.z, 0.0}));
    rows.push_back({{"phi", r.phi}, {"gap", r.gap}, {"se", r.se}, {"precondition_ok", r.precondition_ok},
                    {"picard_iterations", r.picard_iterations}, {"applicable", r.precondition_ok}, {"pass", pass}});
  }
  x.summary["result"] = {{"functions", rows}, {"policy_level", level}, {"pass", all}};
  if (!all) x.fail(exit_invariant, "check-failed");
}

void run_hjb(Ctx& x) {
  const auto p = load_preset(x.cfg, "liquidity");
  const auto& c = x.cfg;
  const auto form = parse_buy_form(c.buy_form);
  const auto t = value_table(p.model, p.reward, family_of(c, p), or_default(c.x_grid, {0.5, 0.75, 1.0, 1.25, 1.5}),
                             or_default(c.q_grid, {0, 1, 2, 3, 4, 5, 6}), p.q0_law, value_config(c, p));
  const auto rep = hjb_residual_scan(p.model, p.reward, GridFunction::from_table(t), p.q0_law,
                                     or_default(c.l_grid, {0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0}),
                                     form);
  double tail = 0.0;
  for (const auto& e : t.cells) tail = std::max(tail, e.tail_bound);
  Csv csv(x.file("hjb.csv"), with_provenance({"x", "q", "v", "residual", "best_l", "noise", "differencing",
                                              "truncation", "point_tolerance", "classification"}));
  for (const auto& pt : rep.points)
    csv.row(cat({g17(pt.x), g17(pt.q), g17(pt.v), g17(pt.residual), g17(pt.best_l), g17(pt.noise),
                 g17(pt.differencing), g17(pt.truncation), g17(pt.tolerance), pt.classification},
                {c.seed, c.particles, pt.tolerance, tail}));
  json res = {{"label", rep.label},
              {"buy_form", to_string(form)},
              {"conditioning_warning", rep.conditioning_warning},
              {"median_abs", rep.median_abs},
              {"p90_abs", rep.p90_abs},
              {"max_abs", rep.max_abs},
              {"h_x", rep.h_x},
              {"h_q", rep.h_q}};
  if (!c.deltas.empty()) {
    const auto r = generator_richardson(phi_q_squared(), p.model, Policy::constant(0.0), p.q0_law, c.deltas,
                                        ito_config(c, p), form);
    res["richardson"] = {{"deltas", r.deltas}, {"estimates", r.estimates}, {"errors", r.errors}, {"se", r.se},
                         {"generator", r.generator}, {"slope", r.slope}, {"same_sign", r.same_sign}};
  }
  x.summary["result"] = res;
}

void run_acceptance_kind(Ctx& x) {
  AcceptanceOptions opt;
  opt.threads = x.cfg.threads;
  opt.only = x.cfg.criteria;
  Csv csv(x.file("acceptance.csv"), {"id", "name", "pass", "seconds", "budget", "detail"});
  json rows = json::array();
  bool all = true;
  run_acceptance(opt, [&](const CriterionResult& r) {
    x.note(format_result(r));
    all = all && r.pass;
    std::string d = r.detail;
    std::replace(d.begin(), d.end(), '"', '\'');
    csv.row({std::to_string(r.id), r.name, r.pass ? "1" : "0", g17(r.seconds), g17(r.budget), "\"" + d + "\""});
    rows.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  });
  x.summary["result"] = {{"criteria", rows}, {"pass", all}};
  if (!all) x.fail(exit_invariant, "check-failed");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config", "must be a JSON object");
  if (!j.contains("kind")) throw ValidationError("kind", "required");
  auto c = default_config(str(j["kind"], "kind"));
  bool preset_given = false;
  for (const auto& [k, v] : j.items()) {
    if (k == "kind") continue;
    if (k == "preset") {
      c.preset = str(v, k);
      preset_given = true;
    } else if (k == "params") {
      if (!v.is_object()) throw ValidationError("params", "must be an object");
      for (const auto& [pk, pv] : v.items()) c.params[pk] = num(pv, "params." + pk);
    } else if (k == "seed") c.seed = count(v, k, 0);
    else if (k == "particles") c.particles = count(v, k, 1);
    else if (k == "reference_particles") c.reference_particles = count(v, k, 1);
    else if (k == "steps") c.steps = count(v, k, 1);
    else if (k == "q0_law") {
      if (v.is_null()) c.q0_law.reset();
      else c.q0_law = vec(v, k);
    } else if (k == "policy_family") c.policy_family = vec(v, k);
    else if (k == "x_grid") c.x_grid = vec(v, k);
    else if (k == "q_grid") c.q_grid = vec(v, k);
    else if (k == "l_grid") c.l_grid = vec(v, k);
    else if (k == "t_split") c.t_split = vec(v, k);
    else if (k == "deltas") c.deltas = vec(v, k);
    else if (k == "phi") c.phi = str(v, k);
    else if (k == "buy_form") c.buy_form = str(v, k);
    else if (k == "tolerances") c.tolerances = parse_tolerances(v);
    else if (k == "out") c.out = str(v, k);
    else if (k == "threads") c.threads = static_cast<unsigned>(count(v, k, 1));
    else if (k == "write_ensemble") {
      if (!v.is_boolean()) throw ValidationError(k, "must be true or false");
      c.write_ensemble = v.get<bool>();
    } else if (k == "criteria") {
      if (!v.is_array()) throw ValidationError(k, "must be an array of integers");
      for (const auto& e : v) c.criteria.push_back(static_cast<int>(count(e, k, 1)));
    } else {
      throw ValidationError(k, "unknown key");
    }
  }
  if (!preset_given) c.preset = default_preset(c.kind);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("config", "cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2); }

void validate(const ExperimentConfig& c) {
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end())
    throw ValidationError("kind", "must be one of bertrand, simulate, value, dpp-check, utility, ito-check, "
                                  "hjb-scan, acceptance");
  if (c.kind != "acceptance") {
    bool known = false;
    for (const auto& e : list_presets()) known = known || e.name == c.preset;
    if (!known) throw ValidationError("preset", "unknown preset '" + c.preset + "'");
    make_preset(c.preset, c.params);  // parameter names and ranges
  }
  if (c.particles < 1) throw ValidationError("particles", "must be at least 1");
  if (c.reference_particles < 1) throw ValidationError("reference_particles", "must be at least 1");
  if (c.steps < 1) throw ValidationError("steps", "must be at least 1");
  if (c.threads < 1) throw ValidationError("threads", "must be at least 1");
  if (c.q0_law) {
    if (c.q0_law->empty()) throw ValidationError("q0_law", "must not be empty");
    for (double a : *c.q0_law)
      if (!(a >= 0.0)) throw ValidationError("q0_law", "atoms must be nonnegative");
  }
  for (double l : c.policy_family)
    if (!(l >= 0.0)) throw ValidationError("policy_family", "levels must be nonnegative");
  for (double l : c.l_grid)
    if (!(l >= 0.0)) throw ValidationError("l_grid", "levels must be nonnegative");
  for (double q : c.q_grid)
    if (!(q >= 0.0)) throw ValidationError("q_grid", "liquidity must be nonnegative");
  for (double t : c.t_split)
    if (!(t > 0.0)) throw ValidationError("t_split", "split times must be positive");
  for (double d : c.deltas)
    if (!(d > 0.0)) throw ValidationError("deltas", "steps must be positive");
  if (c.kind == "hjb-scan" && !c.deltas.empty() && c.deltas.size() < 2)
    throw ValidationError("deltas", "Richardson needs at least two steps");
  parse_buy_form(c.buy_form);
  const auto& t = c.tolerances;
  if (!(t.picard > 0.0)) throw ValidationError("tolerances.picard", "must be positive");
  if (!(t.deviation >= 0.0)) throw ValidationError("tolerances.deviation", "must be nonnegative");
  if (!(t.z > 0.0)) throw ValidationError("tolerances.z", "must be positive");
  if (!(t.game > 0.0)) throw ValidationError("tolerances.game", "must be positive");
  for (int id : c.criteria)
    if (id < 1 || id > 12) throw ValidationError("criteria", "ids run from 1 to 12");
  if (c.out.empty()) throw ValidationError("out", "must not be empty");
}

RunResult run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  validate(cfg);
  Ctx x{cfg, fs::path(cfg.out), log, json::object(), RunResult{}};
  x.result.status = "ok";
  fs::create_directories(x.dir);
  x.summary["config"] = to_json(cfg);
  x.summary["kind"] = cfg.kind;
  x.summary["seed"] = cfg.seed;
  x.summary["particles"] = cfg.particles;
  x.summary["tolerances"] = to_json(cfg.tolerances);
  try {
    if (cfg.kind == "bertrand") run_bertrand(x);
    else if (cfg.kind == "simulate") run_simulate(x);
    else if (cfg.kind == "value") run_value(x);
    else if (cfg.kind == "dpp-check") run_dpp(x);
    else if (cfg.kind == "utility") run_utility(x);
    else if (cfg.kind == "ito-check") run_ito(x);
    else if (cfg.kind == "hjb-scan") run_hjb(x);
    else run_acceptance_kind(x);
  } catch (const ValidationError&) {
    throw;
  } catch (const NonconvergenceError& e) {
    x.fail(exit_nonconvergence, "nonconvergence");
    x.summary["error"] = e.what();
    x.summary["gap_history"] = e.history();
  } catch (const InvariantViolation& e) {
    x.fail(exit_invariant, "invariant-violation");
    x.summary["error"] = e.what();
  } catch (const ModelError& e) {
    x.fail(exit_invariant, "invariant-violation");
    x.summary["error"] = e.what();
  } catch (const DomainError& e) {
    throw ValidationError("config", e.what());
  } catch (const ContractError& e) {
    throw ValidationError("config", e.what());
  }
  x.summary["status"] = x.result.status;
  x.summary["exit_code"] = x.result.exit_code;
  x.summary["files"] = x.result.files;
  x.result.summary_json = x.summary.dump(2);
  std::ofstream(x.dir / "summary.json") << x.result.summary_json << "\n";
  return x.result;
}

std::string describe_presets() {
  std::ostringstream os;
  for (const auto& e : list_presets()) {
    os << e.name << "\n  " << e.summary << "\n  exercises: " << e.exercises << "\n  defaults:";
    for (const auto& [k, v] : e.defaults) os << " " << k << "=" << v;
    os << "\n";
  }
  return os.str();
}

}  // namespace lobmf
