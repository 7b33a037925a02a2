#include "lobmf/control.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lobmf/errors.hpp"
#include "lobmf/parallel.hpp"

namespace lobmf {

double RewardSpec::tail_bound(double rho, double x) const {
  return (bound + bound_x * std::abs(x)) * std::exp(-rho * horizon) / rho;
}

double running_reward(const ModelCoefficients& m, const RewardSpec& r, double x, double q, const LawStats& mu,
                      double l) {
  if (r.running) return r.running(x, q, mu, l);
  const double lam = m.lambda(q, mu);
  if (lam == 0.0) return 0.0;
  const double c = m.c(x, q, l);
  return lam * m.nu_s.integrate([&](double z) { return m.h(x, q, l, z) * c; });
}

double discounted_linear_integral(double rho, double t0, double t1, double L0, double L1) {
  const double d = t1 - t0;
  if (!(d > 0.0)) return 0.0;
  const double u = rho * d;
  double i0, i1;  // int_0^d e^{-rho s} ds and int_0^d (s/d) e^{-rho s} ds
  if (u < 1e-3) {
    i0 = d * (1.0 - u / 2.0 + u * u / 6.0 - u * u * u / 24.0);
    i1 = d * (0.5 - u / 3.0 + u * u / 8.0 - u * u * u / 30.0);
  } else {
    i0 = -std::expm1(-u) / rho;
    i1 = (i0 - d * std::exp(-u)) / u;
  }
  return std::exp(-rho * t0) * (L0 * i0 + (L1 - L0) * i1);
}

namespace {

struct Scenario {
  TimeGrid grid;
  std::vector<CadlagPath> x_ref, x_pin;
  std::vector<DrivingNoise> ref_noise, pin_noise;
  std::vector<double> q0;
  std::uint64_t seed = 0;
};

std::vector<CadlagPath> slice(const std::vector<CadlagPath>& xs, std::size_t n) {
  if (xs.size() == 1) return xs;
  return {xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(n)};
}

// Reference and pinned particles i share the mid-price path i.
Scenario make_scenario(const ModelCoefficients& m, double x, const std::vector<double>& q0, double horizon,
                       std::size_t steps, std::size_t pinned, const ValueConfig& cfg, std::uint64_t seed,
                       std::uint64_t ref_purpose, std::uint64_t pin_purpose) {
  Scenario sc;
  sc.grid = TimeGrid::uniform(0.0, horizon, std::max<std::size_t>(steps, 1));
  sc.q0 = q0;
  sc.seed = seed;
  const std::size_t n = std::max(q0.size(), pinned);
  const auto xs = simulate_midprice(m, x, sc.grid, seed, n, cfg.threads);
  sc.x_ref = slice(xs, q0.size());
  sc.x_pin = slice(xs, pinned);
  sc.ref_noise = generate_noise(m, 0.0, horizon, seed, ref_purpose, q0.size(), cfg.threads);
  sc.pin_noise = generate_noise(m, 0.0, horizon, seed, pin_purpose, pinned, cfg.threads);
  return sc;
}

struct RefRun {
  std::vector<EmpiricalMeasure> laws;
  std::vector<LawStats> stats;
  std::vector<double> final_q;
  int iterations = 0;
};

RefRun run_reference(const ModelCoefficients& m, const Scenario& sc, const Policy& policy, const ValueConfig& cfg) {
  SimulationOptions opt{sc.grid, sc.seed, sc.q0.size(), cfg.picard_tol, cfg.max_picard, cfg.threads};
  auto ens = simulate_reference(m, sc.q0, policy, sc.x_ref, sc.ref_noise, opt);
  RefRun r;
  r.final_q = ens.final_q();
  r.iterations = ens.meta.iterations;
  for (const auto& mu : ens.law_flow) r.stats.push_back(law_stats(mu, m.law_kernels));
  r.laws = std::move(ens.law_flow);
  return r;
}

struct PinnedRun {
  std::vector<double> reward;  // discounted reward per particle
  std::vector<double> final_q;
  std::vector<double> final_x;
};

PinnedRun run_pinned(const ModelCoefficients& m, const RewardSpec& reward, const Scenario& sc, const Policy& policy,
                     const RefRun& ref, double q, const ValueConfig& cfg) {
  const std::size_t P = sc.pin_noise.size();
  const auto ens = simulate_pinned(m, std::vector<double>(P, q), policy, sc.x_pin, sc.pin_noise, ref.laws, sc.grid,
                                   cfg.threads);
  PinnedRun out;
  out.reward.assign(P, 0.0);
  out.final_q = ens.final_q();
  out.final_x.resize(P);
  parallel_for(P, cfg.threads, [&](std::size_t i) {
    double acc = 0.0;
    for_each_segment(ens.q_paths[i], ens.x_path(i), sc.grid, [&](const Segment& s) {
      const LawStats& st = ref.stats[s.cell];
      const double L0 = running_reward(m, reward, s.x, s.q0, st, policy(s.t0, s.x, s.q0));
      const double L1 = running_reward(m, reward, s.x, s.q1, st, policy(s.t1, s.x, s.q1));
      acc += discounted_linear_integral(m.rho, s.t0, s.t1, L0, L1);
    });
    out.reward[i] = acc;
    out.final_x[i] = ens.x_path(i).back();
  });
  return out;
}

struct Batched {
  double mean = 0.0;
  double se = 0.0;
  std::vector<double> batch_means;
};

Batched batch(const std::vector<double>& v, std::size_t batches) {
  const std::size_t n = v.size();
  const std::size_t B = std::max<std::size_t>(2, std::min(batches, n));
  Batched out;
  out.batch_means.assign(B, 0.0);
  // sums are taken relative to the first sample so equal samples give se 0
  const double shift = v.front();
  std::vector<double> dev(B);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t lo = b * n / B, hi = (b + 1) * n / B;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i] - shift;
    total += s;
    dev[b] = hi > lo ? s / static_cast<double>(hi - lo) : 0.0;
    out.batch_means[b] = shift + dev[b];
  }
  const double mdev = total / static_cast<double>(n);
  out.mean = shift + mdev;
  double ss = 0.0;
  for (double d : dev) ss += (d - mdev) * (d - mdev);
  out.se = std::sqrt(ss / static_cast<double>(B - 1) / static_cast<double>(B));
  return out;
}

double se_of_batches(const std::vector<double>& d) {
  const auto B = static_cast<double>(d.size());
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= B;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (B - 1.0) / B);
}

std::string describe_law(const EmpiricalMeasure& mu) {
  std::ostringstream os;
  os << "empirical(n=" << mu.size() << ",mean=" << mu.mean() << ",sd=" << mu.stddev() << ")";
  return os.str();
}

ValueEstimate make_estimate(const ModelCoefficients& m, const RewardSpec& reward, const PinnedRun& run, double x,
                            double q, const EmpiricalMeasure& q0_law, const Policy& policy, const RefRun& ref,
                            const ValueConfig& cfg) {
  const auto b = batch(run.reward, cfg.batches);
  ValueEstimate e;
  e.x = x;
  e.q = q;
  e.law = describe_law(q0_law);
  e.value = b.mean;
  e.se = b.se;
  e.batch_means = b.batch_means;
  e.policy = policy;
  e.tail_bound = reward.tail_bound(m.rho, x);
  e.particles = run.reward.size();
  e.seed = cfg.seed;
  e.picard_iterations = ref.iterations;
  return e;
}

void check_value_inputs(const ModelCoefficients& m, const RewardSpec& reward, const ValueConfig& cfg, double q) {
  if (!(m.rho > 0.0)) throw DomainError("discount rate must be positive");
  if (!(reward.horizon > 0.0)) throw DomainError("truncation horizon must be positive");
  if (q < 0.0) throw DomainError("initial liquidity must be nonnegative");
  if (cfg.particles < 2 || cfg.reference_particles < 1) throw DomainError("value estimate needs particles");
}

// search over the family for every q, with one reference run per member
std::vector<ValueEstimate> search_many(const ModelCoefficients& m, const RewardSpec& reward,
                                       const std::vector<Policy>& family, double x, const std::vector<double>& qs,
                                       const EmpiricalMeasure& q0_law, const ValueConfig& cfg) {
  if (family.empty()) throw DomainError("policy family is empty");
  const auto q0 = draw_initial_states(q0_law, cfg.reference_particles, cfg.seed);
  const auto sc = make_scenario(m, x, q0, reward.horizon, cfg.steps, cfg.particles, cfg, cfg.seed,
                                purpose::liquidity, purpose::pinned);
  std::vector<ValueEstimate> best(qs.size());
  for (std::size_t f = 0; f < family.size(); ++f) {
    const auto ref = run_reference(m, sc, family[f], cfg);
    for (std::size_t j = 0; j < qs.size(); ++j) {
      check_value_inputs(m, reward, cfg, qs[j]);
      const auto run = run_pinned(m, reward, sc, family[f], ref, qs[j], cfg);
      auto e = make_estimate(m, reward, run, x, qs[j], q0_law, family[f], ref, cfg);
      auto& b = best[j];
      b.family_values.push_back(e.value);
      b.family_se.push_back(e.se);
      if (f == 0 || e.value > b.value) {
        e.family_values = std::move(b.family_values);
        e.family_se = std::move(b.family_se);
        b = std::move(e);
      }
    }
  }
  return best;
}

std::size_t nearest(const std::vector<double>& g, double v) {
  auto it = std::lower_bound(g.begin(), g.end(), v);
  if (it == g.begin()) return 0;
  if (it == g.end()) return g.size() - 1;
  const auto k = static_cast<std::size_t>(it - g.begin());
  return (v - g[k - 1] <= g[k] - v) ? k - 1 : k;
}

}  // namespace

double paired_se(const ValueEstimate& a, const ValueEstimate& b) {
  if (a.batch_means.size() != b.batch_means.size()) throw DomainError("paired estimates need equal batch counts");
  std::vector<double> d(a.batch_means.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = a.batch_means[k] - b.batch_means[k];
  return se_of_batches(d);
}

ValueEstimate evaluate_policy(const ModelCoefficients& m, const RewardSpec& reward, const Policy& policy, double x,
                              double q, const EmpiricalMeasure& q0_law, const ValueConfig& cfg) {
  check_value_inputs(m, reward, cfg, q);
  const auto q0 = draw_initial_states(q0_law, cfg.reference_particles, cfg.seed);
  const auto sc = make_scenario(m, x, q0, reward.horizon, cfg.steps, cfg.particles, cfg, cfg.seed,
                                purpose::liquidity, purpose::pinned);
  const auto ref = run_reference(m, sc, policy, cfg);
  const auto run = run_pinned(m, reward, sc, policy, ref, q, cfg);
  return make_estimate(m, reward, run, x, q, q0_law, policy, ref, cfg);
}

ValueEstimate search_policy(const ModelCoefficients& m, const RewardSpec& reward, const std::vector<Policy>& family,
                            double x, double q, const EmpiricalMeasure& q0_law, const ValueConfig& cfg) {
  return std::move(search_many(m, reward, family, x, {q}, q0_law, cfg).front());
}

std::vector<Policy> constant_family(const std::vector<double>& levels) {
  std::vector<Policy> out;
  for (double l : levels) out.push_back(Policy::constant(l));
  return out;
}

DppResult dpp_residual(const ModelCoefficients& m, const RewardSpec& reward, const std::vector<Policy>& family,
                       double x, double q, const EmpiricalMeasure& q0_law, const DppConfig& cfg) {
  const ValueConfig& vc = cfg.value;
  if (!(cfg.t_split > 0.0)) throw DomainError("split time must be positive");
  if (cfg.x_bins.empty() || cfg.q_bins.empty()) throw DomainError("bin grids must be nonempty");
  if (!std::is_sorted(cfg.x_bins.begin(), cfg.x_bins.end()) || !std::is_sorted(cfg.q_bins.begin(), cfg.q_bins.end()))
    throw DomainError("bin grids must be sorted");
  check_value_inputs(m, reward, vc, q);

  DppResult out;
  double x_far = std::abs(x);
  for (double b : cfg.x_bins) x_far = std::max(x_far, std::abs(b));
  out.tail_bound = reward.tail_bound(m.rho, x_far);
  const auto lhs = search_policy(m, reward, family, x, q, q0_law, vc);
  out.lhs = lhs.value;
  out.lhs_se = lhs.se;

  const double dt = reward.horizon / static_cast<double>(vc.steps);
  const auto leg_steps = static_cast<std::size_t>(std::ceil(cfg.t_split / dt - 1e-9));
  const double disc = std::exp(-m.rho * cfg.t_split);
  const auto q0 = draw_initial_states(q0_law, vc.reference_particles, vc.seed);
  const auto leg = make_scenario(m, x, q0, cfg.t_split, leg_steps, vc.particles, vc, vc.seed, purpose::liquidity,
                                 purpose::pinned);
  const std::uint64_t cont_seed = splitmix64(vc.seed ^ 0x636f6e74ULL);

  std::vector<std::size_t> used_bins;
  bool first = true;
  for (std::size_t f = 0; f < family.size(); ++f) {
    const auto ref = run_reference(m, leg, family[f], vc);
    const auto run = run_pinned(m, reward, leg, family[f], ref, q, vc);
    const std::size_t P = run.reward.size();
    std::vector<std::size_t> bin_of(P);
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t i = 0; i < P; ++i) {
      bin_of[i] = nearest(cfg.x_bins, run.final_x[i]) * cfg.q_bins.size() + nearest(cfg.q_bins, run.final_q[i]);
      ++counts[bin_of[i]];
    }
    // continuation values: the reference restarts from its own states at the
    // split with the mid price of the bin
    std::map<std::size_t, ValueEstimate> cont;
    std::map<std::size_t, std::map<std::size_t, RefRun>> ref_cache;  // x bin -> family member -> run
    std::map<std::size_t, Scenario> sc_cache;
    for (const auto& [bin, cnt] : counts) {
      const std::size_t xi = bin / cfg.q_bins.size(), qi = bin % cfg.q_bins.size();
      if (!sc_cache.count(xi)) {
        sc_cache.emplace(xi, make_scenario(m, cfg.x_bins[xi], ref.final_q, reward.horizon, vc.steps,
                                           cfg.bin_particles, vc, cont_seed, purpose::continuation,
                                           purpose::pinned));
      }
      const Scenario& sc = sc_cache.at(xi);
      ValueEstimate best;
      for (std::size_t g = 0; g < family.size(); ++g) {
        auto& rc = ref_cache[xi];
        if (!rc.count(g)) rc.emplace(g, run_reference(m, sc, family[g], vc));
        const auto pr = run_pinned(m, reward, sc, family[g], rc.at(g), cfg.q_bins[qi], vc);
        auto e = make_estimate(m, reward, pr, cfg.x_bins[xi], cfg.q_bins[qi], q0_law, family[g], rc.at(g), vc);
        if (g == 0 || e.value > best.value) best = std::move(e);
      }
      cont.emplace(bin, std::move(best));
    }
    std::vector<double> comp(P);
    for (std::size_t i = 0; i < P; ++i) comp[i] = run.reward[i] + disc * cont.at(bin_of[i]).value;
    const auto b = batch(comp, vc.batches);
    double bin_se = 0.0;
    for (const auto& [bin, cnt] : counts)
      bin_se += static_cast<double>(cnt) / static_cast<double>(P) * cont.at(bin).se;
    const double rhs_se = std::hypot(b.se, disc * bin_se);
    if (first || b.mean > out.rhs) {
      out.rhs = b.mean;
      out.rhs_se = rhs_se;
      out.best_first_leg = f;
      out.bins_used = counts.size();
      first = false;
    }
  }
  out.gap = out.lhs - out.rhs;
  out.se = std::hypot(out.lhs_se, out.rhs_se);
  return out;
}

BoundaryReport boundary_checks(const ModelCoefficients& m, const RewardSpec& reward, const std::vector<Policy>& family,
                               const std::vector<double>& x_grid, const EmpiricalMeasure& q0_law,
                               const std::vector<double>& deltas, const ValueConfig& cfg) {
  if (deltas.size() < 2) throw DomainError("boundary check needs at least two steps");
  auto ds = deltas;
  std::sort(ds.begin(), ds.end(), std::greater<>());
  if (!(ds.back() > 0.0)) throw DomainError("boundary steps must be positive");
  std::vector<double> qs{0.0};
  qs.insert(qs.end(), ds.begin(), ds.end());
  BoundaryReport rep;
  rep.pass = true;
  for (double x : x_grid) {
    const auto est = search_many(m, reward, family, x, qs, q0_law, cfg);
    BoundaryRow row;
    row.x = x;
    row.v0 = est[0].value;
    row.v0_se = est[0].se;
    row.deltas = ds;
    const std::size_t B = est[0].batch_means.size();
    std::vector<std::vector<double>> slope_batches;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      row.slopes.push_back((est[k + 1].value - est[0].value) / ds[k]);
      row.slope_se.push_back(paired_se(est[k + 1], est[0]) / ds[k]);
      std::vector<double> sb(B);
      for (std::size_t j = 0; j < B; ++j) sb[j] = (est[k + 1].batch_means[j] - est[0].batch_means[j]) / ds[k];
      slope_batches.push_back(std::move(sb));
    }
    // polynomial extrapolation of the slopes to dq -> 0 through all steps
    std::vector<double> w(ds.size(), 1.0);
    for (std::size_t k = 0; k < ds.size(); ++k)
      for (std::size_t j = 0; j < ds.size(); ++j)
        if (j != k) w[k] *= ds[j] / (ds[j] - ds[k]);
    std::vector<double> eb(B, 0.0);
    row.extrapolated = 0.0;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      row.extrapolated += w[k] * row.slopes[k];
      for (std::size_t j = 0; j < B; ++j) eb[j] += w[k] * slope_batches[k][j];
    }
    row.extrapolated_se = se_of_batches(eb);
    row.zero_ok = std::abs(row.v0) <= 3.0 * row.v0_se + 1e-12;
    row.slope_ok = std::abs(row.extrapolated) <= 3.0 * row.extrapolated_se + 1e-12;
    rep.pass = rep.pass && row.zero_ok && row.slope_ok;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

ValueTable value_table(const ModelCoefficients& m, const RewardSpec& reward, const std::vector<Policy>& family,
                       const std::vector<double>& x_grid, const std::vector<double>& q_grid,
                       const EmpiricalMeasure& q0_law, const ValueConfig& cfg) {
  if (x_grid.empty() || q_grid.empty()) throw DomainError("value table needs a nonempty grid");
  ValueTable t;
  t.x_grid = x_grid;
  t.q_grid = q_grid;
  for (double x : x_grid) {
    auto row = search_many(m, reward, family, x, q_grid, q0_law, cfg);
    for (auto& e : row) t.cells.push_back(std::move(e));
  }
  return t;
}

PropertyReport value_properties(const ModelCoefficients& m, const RewardSpec& reward, const ValueTable& t) {
  const double L = m.lipschitz;
  const double denom = m.rho - L - L * L / 2.0;
  if (!(denom > 0.0)) throw ContractError("discount rate must exceed L + L^2/2");
  PropertyReport r;
  r.lipschitz_constant = reward.lipschitz_x / denom;
  r.worst_q_monotone = r.worst_x_monotone = std::numeric_limits<double>::infinity();
  r.worst_lipschitz = -std::numeric_limits<double>::infinity();
  constexpr double floor_se = 1e-12;
  const std::size_t nx = t.x_grid.size(), nq = t.q_grid.size();
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j1 = 0; j1 < nq; ++j1) {
      for (std::size_t j2 = j1 + 1; j2 < nq; ++j2) {
        const auto& a = t.at(i, j1);
        const auto& b = t.at(i, j2);
        const double z = (a.value - b.value) / std::max(paired_se(a, b), floor_se);
        r.worst_q_monotone = std::min(r.worst_q_monotone, z);
        if (z < -3.0) ++r.violations;
      }
    }
  }
  for (std::size_t j = 0; j < nq; ++j) {
    for (std::size_t i1 = 0; i1 < nx; ++i1) {
      for (std::size_t i2 = i1 + 1; i2 < nx; ++i2) {
        const auto& a = t.at(i1, j);
        const auto& b = t.at(i2, j);
        const double se = std::max(paired_se(b, a), floor_se);
        const double z = (b.value - a.value) / se;
        r.worst_x_monotone = std::min(r.worst_x_monotone, z);
        if (z < -3.0) ++r.violations;
        const double excess =
            (std::abs(b.value - a.value) - r.lipschitz_constant * std::abs(t.x_grid[i2] - t.x_grid[i1])) / se;
        r.worst_lipschitz = std::max(r.worst_lipschitz, excess);
        if (excess > 3.0) ++r.violations;
      }
    }
  }
  r.pass = r.violations == 0;
  return r;
}

UtilityTable export_utility(const ModelCoefficients& m, const RewardSpec& reward, const std::vector<Policy>& family,
                            const std::vector<double>& x_grid, const std::vector<double>& q_grid,
                            const ValueConfig& cfg) {
  if (x_grid.empty() || q_grid.size() < 3) throw DomainError("utility grid needs at least three q points");
  UtilityTable u;
  u.table.x_grid = x_grid;
  u.table.q_grid = q_grid;
  for (double x : x_grid) {
    for (double q : q_grid) {
      u.table.cells.push_back(search_policy(m, reward, family, x, q, EmpiricalMeasure::dirac(q), cfg));
    }
  }
  const std::size_t nx = x_grid.size(), nq = q_grid.size();
  u.decreasing_in_q = u.convex_in_q = u.nondecreasing_in_x = true;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j + 1 < nq; ++j) {
      const auto& a = u.table.at(i, j);
      const auto& b = u.table.at(i, j + 1);
      const double d = b.value - a.value;
      u.dq.push_back(d);
      if (d > 3.0 * paired_se(b, a) + 1e-12) u.decreasing_in_q = false;
    }
    for (std::size_t j = 1; j + 1 < nq; ++j) {
      const auto& a = u.table.at(i, j - 1);
      const auto& b = u.table.at(i, j);
      const auto& c = u.table.at(i, j + 1);
      // second difference on a possibly uneven grid
      const double h1 = q_grid[j] - q_grid[j - 1], h2 = q_grid[j + 1] - q_grid[j];
      const double w1 = 2.0 / (h1 * (h1 + h2)), w2 = -2.0 / (h1 * h2), w3 = 2.0 / (h2 * (h1 + h2));
      u.d2q.push_back(w1 * a.value + w2 * b.value + w3 * c.value);
      std::vector<double> bm(a.batch_means.size());
      for (std::size_t k = 0; k < bm.size(); ++k)
        bm[k] = w1 * a.batch_means[k] + w2 * b.batch_means[k] + w3 * c.batch_means[k];
      u.d2q_se.push_back(se_of_batches(bm));
      if (u.d2q.back() < -3.0 * u.d2q_se.back() - 1e-12) u.convex_in_q = false;
    }
  }
  for (std::size_t j = 0; j < nq; ++j) {
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      const auto& a = u.table.at(i, j);
      const auto& b = u.table.at(i + 1, j);
      if (b.value - a.value < -3.0 * paired_se(b, a) - 1e-12) u.nondecreasing_in_x = false;
    }
  }
  return u;
}

}  // namespace lobmf
