#include "lobmf/presets.hpp"

#include <cmath>
#include <functional>

#include "lobmf/errors.hpp"

namespace lobmf {

namespace {

using Builder = std::function<void(Preset&, const Params&)>;

struct Entry {
  std::string name;
  std::string summary;
  std::string exercises;
  Params defaults;
  Builder build;
};

ModelCoefficients flat() {
  ModelCoefficients m;
  m.b = [](double) { return 0.0; };
  m.sigma = [](double) { return 0.0; };
  m.c = [](double x, double, double l) { return x + l - l * l; };
  m.h = [](double, double, double, double z) { return z; };
  m.lambda = [](double, const LawStats&) { return 0.0; };
  m.lambda_max = 0.0;
  return m;
}

void constant_intensity(ModelCoefficients& m, double lam) {
  m.lambda = [lam](double, const LawStats&) { return lam; };
  m.lambda_max = lam;
  m.law_dependent = false;
}

void meanfield_intensity(ModelCoefficients& m, double lam) {
  m.lambda = [lam](double, const LawStats& mu) { return lam / (1.0 + std::max(mu.mean, 0.0)); };
  m.lambda_max = lam;
  m.law_dependent = true;
  m.lipschitz = std::max(m.lipschitz, lam);
}

// smallest discount rate above L + L^2/2, rounded up to a half
double rate_for(double L) { return std::floor(2.0 * (L + 0.5 * L * L)) / 2.0 + 0.5; }

EmpiricalMeasure integer_law(double lo, double hi) {
  std::vector<double> a;
  for (double v = lo; v <= hi + 1e-12; v += 1.0) a.push_back(v);
  return EmpiricalMeasure(a);
}

const std::vector<Entry>& catalog() {
  static const std::vector<Entry> entries = {
      {"linear-duopoly", "two-seller linear Bertrand game; symmetric price 1/3 at the defaults", "actual-demand recursion, equilibrium cascade, linear closed forms and the mean-field price limit",
       {{"n", 2}, {"A", 1}, {"B", 2}, {"C", 1}, {"x", 0}, {"y", 0}, {"fixed", 0}},
       [](Preset& p, const Params& v) {
         p.kind = "game";
         p.game.n_sellers = static_cast<std::size_t>(v.at("n"));
         p.game.demand = LinearDemand{v.at("A"), v.at("B"), v.at("C")};
         p.game.cost = LinearCost{v.at("x"), v.at("y"),
                                   std::vector<double>(p.game.n_sellers, v.at("fixed"))};
       }},
      {"poisson-unit", "constant intensity, unit marks, no buys: Poisson liquidity", "thinning simulator against Poisson moments; Ito identity without law dependence",
       {{"lambda", 2}, {"z", 1}, {"horizon", 1}, {"q0", 0}, {"x0", 1}, {"rho", 1}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         constant_intensity(p.model, v.at("lambda"));
         p.model.nu_s = MarkMeasure::point(1.0, v.at("z"));
         p.model.rho = v.at("rho");
         p.reward.bound = v.at("lambda") * v.at("z") * 0.25;
         p.reward.bound_x = v.at("lambda") * v.at("z");
         p.reward.lipschitz_x = v.at("lambda") * v.at("z");
       }},
      {"full-reflection", "buys only from an empty book: every buy is fully reflected", "buy-side reflection: expected regulator growth equals the buy rate",
       {{"beta", 1}, {"z", 1}, {"horizon", 1}, {"q0", 0}, {"x0", 1}, {"rho", 1}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         p.model.law_dependent = false;
         p.model.nu_b = MarkMeasure::point(v.at("beta"), v.at("z"));
         p.model.rho = v.at("rho");
         p.reward.bound = 0.0;
       }},
      {"meanfield-picard", "intensity lambda/(1 + mean of the law), two sell marks, unit buys", "Picard iteration on the law flow and its W1 contraction",
       {{"lambda", 3}, {"beta", 1}, {"horizon", 4}, {"q0", 1}, {"x0", 1}, {"law_max", 3}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         meanfield_intensity(p.model, v.at("lambda"));
         p.model.nu_s = {1.0, {0.5, 1.0}, {0.5, 0.5}};
         p.model.nu_b = MarkMeasure::point(v.at("beta"), 1.0);
         p.model.rho = rate_for(p.model.lipschitz);
         p.q0_law = integer_law(0.0, v.at("law_max"));
         p.reward.bound = v.at("lambda") * 0.75 * 0.25;
         p.reward.bound_x = v.at("lambda") * 0.75;
       }},
      {"meanfield-flow", "mean-field intensity plus drift reverting to the law mean", "flow property of the law-dependent dynamics under time-step refinement",
       {{"lambda", 4}, {"theta", 1.5}, {"beta", 1}, {"horizon", 1}, {"split", 0.37}, {"q0", 1}, {"x0", 1},
        {"law_max", 2}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         meanfield_intensity(p.model, v.at("lambda"));
         p.model.nu_s = {1.0, {0.5, 1.0}, {0.5, 0.5}};
         p.model.nu_b = MarkMeasure::point(v.at("beta"), 1.0);
         const double theta = v.at("theta");
         const ModelCoefficients base = p.model;
         p.model.a = [base, theta](double x, double q, const LawStats& mu, double l) {
           return theta * (mu.mean - q) +
                  base.lambda(q, mu) * base.nu_s.integrate([&](double z) { return base.h(x, q, l, z); });
         };
         p.model.lipschitz = std::max(p.model.lipschitz, v.at("lambda") + theta);
         p.model.rho = rate_for(p.model.lipschitz);
         p.q0_law = integer_law(0.0, v.at("law_max"));
       }},
      {"degenerate-hjb", "no liquidity dynamics, reward x + l - l^2: v = (x + 1/4)/rho", "HJB residual against the closed-form value of a frozen book",
       {{"rho", 1}, {"x0", 1}, {"horizon", 16}, {"q0", 1}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         p.model.law_dependent = false;
         p.model.rho = v.at("rho");
         p.reward.running = [](double x, double, const LawStats&, double l) { return x + l - l * l; };
         p.reward.bound = 0.25;
         p.reward.bound_x = 1.0;
         p.reward.lipschitz_x = 1.0;
         p.levels = {0.0, 0.25, 0.5, 0.75, 1.0};
       }},
      {"deterministic", "deterministic mid price and frozen liquidity with reward x + l - l^2", "exact dynamic programming and flow identities when nothing is random",
       {{"rho", 1}, {"x0", 1}, {"drift", 0}, {"horizon", 16}, {"q0", 1}, {"split", 0.37}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         p.model.law_dependent = false;
         const double d = v.at("drift");
         p.model.b = [d](double) { return d; };
         p.model.rho = v.at("rho");
         p.reward.running = [](double x, double, const LawStats&, double l) { return x + l - l * l; };
         p.reward.bound = 0.25;
         p.reward.bound_x = 1.0;
         p.reward.lipschitz_x = 1.0;
       }},
      {"boundary", "intensity and jump size vanish at zero liquidity", "zero value and flat q-derivative of the value at empty liquidity",
       {{"lambda", 1}, {"qbar", 1}, {"beta", 0.5}, {"rho", 2}, {"horizon", 8}, {"x0", 1}, {"law_max", 3}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         const double lam = v.at("lambda"), qbar = v.at("qbar");
         // smooth saturation keeps v(x, .) differentiable at 0
         p.model.lambda = [lam, qbar](double q, const LawStats&) { return lam * q / (qbar + q); };
         p.model.lambda_max = lam;
         p.model.law_dependent = false;
         p.model.h = [](double, double q, double, double z) { return z * q / (1.0 + q); };
         p.model.nu_s = MarkMeasure::point(1.0, 1.0);
         p.model.nu_b = MarkMeasure::point(v.at("beta"), 1.0);
         p.model.rho = v.at("rho");
         p.q0_law = integer_law(1.0, v.at("law_max"));
         p.reward.bound = lam * 0.25;
         p.reward.bound_x = lam;
         p.reward.lipschitz_x = lam;
       }},
      {"meanfield-diffusion", "diffusive mid price, mean-field intensity, two marks, buys", "value-function monotonicity and Lipschitz bounds; Ito identity with diffusion and law terms",
       {{"lambda", 1}, {"kappa", 0.2}, {"xbar", 1}, {"sigma", 0.2}, {"beta", 0.5}, {"horizon", 8}, {"x0", 1},
        {"q0", 6}, {"law_min", 5}, {"law_max", 7}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         const double kappa = v.at("kappa"), xbar = v.at("xbar"), sig = v.at("sigma");
         p.model.b = [kappa, xbar](double x) { return kappa * (xbar - x); };
         p.model.sigma = [sig](double) { return sig; };
         p.model.lipschitz = kappa;
         meanfield_intensity(p.model, v.at("lambda"));
         p.model.nu_s = {1.0, {0.5, 1.0}, {0.5, 0.5}};
         p.model.nu_b = {v.at("beta"), {0.5, 1.0}, {0.5, 0.5}};
         p.model.c = [](double x, double q, double l) { return (std::tanh(x) + l - l * l) / (1.0 + q); };
         p.model.rho = rate_for(p.model.lipschitz);
         p.q0_law = integer_law(v.at("law_min"), v.at("law_max"));
         p.reward.bound = v.at("lambda") * 0.75 * 1.25;
         p.reward.lipschitz_x = v.at("lambda") * 0.75;
       }},
      {"gen-check", "constant intensity with unit sells and buys away from the boundary", "generator against short-horizon simulation (Richardson slope for q^2)",
       {{"lambda", 4}, {"beta", 1}, {"q0", 4}, {"x0", 1}, {"rho", 1}, {"horizon", 0.4}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         constant_intensity(p.model, v.at("lambda"));
         p.model.nu_s = MarkMeasure::point(1.0, 1.0);
         p.model.nu_b = MarkMeasure::point(v.at("beta"), 1.0);
         p.model.rho = v.at("rho");
         p.reward.bound = v.at("lambda") * 0.25;
         p.reward.bound_x = v.at("lambda");
       }},
      {"poisson-dpp", "constant intensity, integer liquidity, reward (x + l - l^2)/(1 + q)", "dynamic programming self-consistency with law-free coefficients",
       {{"lambda", 1}, {"beta", 0.5}, {"rho", 1}, {"horizon", 10}, {"x0", 1}, {"q0", 2}, {"law_max", 4}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         constant_intensity(p.model, v.at("lambda"));
         p.model.nu_s = MarkMeasure::point(1.0, 1.0);
         p.model.nu_b = MarkMeasure::point(v.at("beta"), 1.0);
         p.model.c = [](double x, double q, double l) { return (x + l - l * l) / (1.0 + q); };
         p.model.rho = v.at("rho");
         p.q0_law = integer_law(0.0, v.at("law_max"));
         p.reward.bound = v.at("lambda") * 0.25;
         p.reward.bound_x = v.at("lambda");
         p.reward.lipschitz_x = v.at("lambda");
       }},
      {"meanfield-dpp", "mean-field intensity, integer liquidity, reward (x + l - l^2)/(1 + q)", "dynamic programming self-consistency with a law-dependent intensity",
       {{"lambda", 1}, {"beta", 0.5}, {"horizon", 6}, {"x0", 1}, {"q0", 2}, {"law_min", 1}, {"law_max", 3}},
       [](Preset& p, const Params& v) {
         p.model = flat();
         meanfield_intensity(p.model, v.at("lambda"));
         p.model.nu_s = MarkMeasure::point(1.0, 1.0);
         p.model.nu_b = MarkMeasure::point(v.at("beta"), 1.0);
         p.model.c = [](double x, double q, double l) { return (x + l - l * l) / (1.0 + q); };
         p.model.rho = rate_for(p.model.lipschitz);
         p.q0_law = integer_law(v.at("law_min"), v.at("law_max"));
         p.reward.bound = v.at("lambda") * 0.25;
         p.reward.bound_x = v.at("lambda");
         p.reward.lipschitz_x = v.at("lambda");
       }},
  };
  return entries;
}

}  // namespace

std::vector<PresetInfo> list_presets() {
  std::vector<PresetInfo> out;
  for (const auto& e : catalog()) out.push_back({e.name, e.summary, e.exercises, e.defaults});
  return out;
}

Preset make_preset(const std::string& name, const Params& overrides) {
  for (const auto& e : catalog()) {
    if (e.name != name) continue;
    Params v = e.defaults;
    for (const auto& [k, val] : overrides) {
      if (!v.count(k)) throw ValidationError("params." + k, "unknown parameter for preset " + name);
      if (!std::isfinite(val)) throw ValidationError("params." + k, "must be finite");
      v[k] = val;
    }
    for (const char* k : {"lambda", "beta", "z", "rho", "horizon", "n", "sigma", "qbar"}) {
      auto it = v.find(k);
      if (it == v.end()) continue;
      const bool strict = std::string(k) == "rho" || std::string(k) == "horizon" || std::string(k) == "qbar";
      if (strict ? !(it->second > 0.0) : !(it->second >= 0.0))
        throw ValidationError("params." + std::string(k), strict ? "must be positive" : "must be nonnegative");
    }
    for (const char* k : {"q0", "law_min", "law_max"}) {
      auto it = v.find(k);
      if (it != v.end() && it->second < 0.0) throw ValidationError("params." + std::string(k), "must be nonnegative");
    }
    if (v.count("n") && (v.at("n") < 1.0 || v.at("n") != std::floor(v.at("n"))))
      throw ValidationError("params.n", "must be a positive integer");
    if (v.count("B") && v.count("C") && !(v.at("B") > v.at("C") && v.at("C") > 0.0))
      throw ValidationError("params.C", "must satisfy 0 < C < B");
    if (v.count("law_min") && v.at("law_min") > v.at("law_max"))
      throw ValidationError("params.law_min", "must not exceed law_max");
    Preset p;
    p.name = name;
    p.summary = e.summary;
    p.kind = "liquidity";
    p.params = v;
    if (v.count("x0")) p.x0 = v.at("x0");
    if (v.count("q0")) p.q0 = v.at("q0");
    if (v.count("horizon")) p.horizon = v.at("horizon");
    e.build(p, v);
    p.reward.horizon = p.horizon;
    if (p.kind == "liquidity" && !v.count("law_max")) p.q0_law = EmpiricalMeasure::dirac(p.q0);
    return p;
  }
  throw ValidationError("preset", "unknown preset " + name);
}

}  // namespace lobmf
