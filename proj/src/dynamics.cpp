#include "lobmf/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lobmf/errors.hpp"
#include "lobmf/parallel.hpp"

namespace lobmf {

TimeGrid TimeGrid::uniform(double t0, double t1, std::size_t steps) {
  if (steps == 0 || !(t1 > t0)) throw DomainError("uniform grid needs t1 > t0 and steps >= 1");
  TimeGrid g;
  g.nodes.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    g.nodes[k] = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(steps);
  g.nodes.back() = t1;
  return g;
}

std::size_t TimeGrid::cell(double t) const {
  auto it = std::upper_bound(nodes.begin(), nodes.end(), t);
  if (it == nodes.begin()) return 0;
  const auto k = static_cast<std::size_t>(it - nodes.begin()) - 1;
  return std::min(k, nodes.size() - 2);
}

LawStats law_stats(const EmpiricalMeasure& mu, const std::vector<Kernel>& kernels) {
  LawStats s;
  s.mean = mu.mean();
  s.second_moment = mu.second_moment();
  s.variance = std::max(0.0, s.second_moment - s.mean * s.mean);
  for (const auto& k : kernels) s.kernels.push_back(mu.integrate(k));
  return s;
}

double ModelCoefficients::drift_correction(double x, double q, const LawStats& mu, double l) const {
  if (!a) return 0.0;
  const double lam = nu_s.active() ? lambda(q, mu) : 0.0;
  const double comp = lam == 0.0 ? 0.0 : lam * nu_s.integrate([&](double z) { return h(x, q, l, z); });
  return a(x, q, mu, l) - comp;
}

double ModelCoefficients::drift(double x, double q, const LawStats& mu, double l) const {
  if (a) return a(x, q, mu, l);
  if (!nu_s.active()) return 0.0;
  const double lam = lambda(q, mu);
  return lam * nu_s.integrate([&](double z) { return h(x, q, l, z); });
}

void check_coefficients(const ModelCoefficients& m, std::uint64_t seed, int samples) {
  if (!m.b || !m.sigma) throw ContractError("mid-price coefficients b and sigma are required");
  if (m.nu_s.active() && (!m.lambda || !m.h)) throw ContractError("sell side needs lambda and h");
  if (!(m.rho > m.lipschitz + 0.5 * m.lipschitz * m.lipschitz))
    throw ModelError("discount rate must exceed L + L^2/2");
  if (m.positivity && (m.sigma(0.0) != 0.0 || m.b(0.0) < 0.0))
    throw ModelError("positivity needs sigma(0) = 0 and b(0) >= 0");
  auto check_measure = [](const MarkMeasure& mm, const char* name) {
    if (mm.mass < 0.0) throw ModelError(std::string(name) + " mass must be nonnegative");
    if (mm.atoms.size() != mm.probs.size()) throw ModelError(std::string(name) + " atoms/probs mismatch");
    double s = 0.0;
    for (double p : mm.probs) {
      if (p < 0.0) throw ModelError(std::string(name) + " has a negative probability");
      s += p;
    }
    if (!mm.atoms.empty() && std::abs(s - 1.0) > 1e-12)
      throw ModelError(std::string(name) + " probabilities must sum to one");
  };
  check_measure(m.nu_s, "nu_s");
  check_measure(m.nu_b, "nu_b");
  RngStream rng(seed, purpose::test, 0, 0);
  const double L = m.lipschitz;
  for (int i = 0; i < samples; ++i) {
    const double q = 20.0 * rng.uniform();
    const double x = 4.0 * rng.uniform();
    if (m.lambda && m.nu_s.active()) {
      std::vector<double> atoms{q, 0.5 * q, 2.0 * rng.uniform()};
      const auto st = law_stats(EmpiricalMeasure(atoms), m.law_kernels);
      const double lam = m.lambda(q, st);
      if (lam < 0.0 || lam > m.lambda_max) throw ModelError("lambda outside [0, lambda_max]");
    }
    if (L > 0.0) {
      const double d = 1e-4;
      if (std::abs(m.b(x + d) - m.b(x)) > L * d * (1.0 + 1e-6) + 1e-12)
        throw ModelError("b exceeds its declared Lipschitz constant");
      if (std::abs(m.sigma(x + d) - m.sigma(x)) > L * d * (1.0 + 1e-6) + 1e-12)
        throw ModelError("sigma exceeds its declared Lipschitz constant");
    }
  }
}

Policy Policy::constant(double l, double l_max) {
  Policy p;
  p.form = Form::constant;
  p.level = l;
  p.l_max = l_max;
  return p;
}

Policy Policy::affine(double l0, double l1, double l_max) {
  Policy p;
  p.form = Form::affine_in_q;
  p.level = l0;
  p.slope = l1;
  p.l_max = l_max;
  return p;
}

Policy Policy::grid(std::vector<double> xs, std::vector<double> qs, std::vector<double> table, double l_max) {
  if (xs.empty() || qs.empty() || table.size() != xs.size() * qs.size())
    throw DomainError("grid policy table has the wrong shape");
  if (!std::is_sorted(xs.begin(), xs.end()) || !std::is_sorted(qs.begin(), qs.end()))
    throw DomainError("grid policy axes must be ascending");
  Policy p;
  p.form = Form::grid_feedback;
  p.x_grid = std::move(xs);
  p.q_grid = std::move(qs);
  p.table = std::move(table);
  p.l_max = l_max;
  return p;
}

namespace {

std::size_t nearest(const std::vector<double>& axis, double v) {
  auto it = std::lower_bound(axis.begin(), axis.end(), v);
  if (it == axis.begin()) return 0;
  if (it == axis.end()) return axis.size() - 1;
  const auto k = static_cast<std::size_t>(it - axis.begin());
  return (v - axis[k - 1] <= axis[k] - v) ? k - 1 : k;
}

}  // namespace

double Policy::operator()(double, double x, double q) const {
  double l = 0.0;
  switch (form) {
    case Form::constant: l = level; break;
    case Form::affine_in_q: l = level + slope * q; break;
    case Form::grid_feedback: l = table[nearest(x_grid, x) * q_grid.size() + nearest(q_grid, q)]; break;
  }
  return std::clamp(l, 0.0, l_max);
}

std::string Policy::describe() const {
  std::ostringstream os;
  switch (form) {
    case Form::constant: os << "constant(" << level << ")"; break;
    case Form::affine_in_q: os << "affine(" << level << "," << slope << ")"; break;
    case Form::grid_feedback: os << "grid(" << x_grid.size() << "x" << q_grid.size() << ")"; break;
  }
  return os.str();
}

std::vector<DrivingNoise> generate_noise(const ModelCoefficients& m, double t0, double t1, std::uint64_t seed,
                                         std::uint64_t purpose_tag, std::size_t count, unsigned threads,
                                         std::size_t first) {
  std::vector<DrivingNoise> out(count);
  const double sell_rate = m.nu_s.active() ? m.lambda_max * m.nu_s.mass : 0.0;
  const double buy_rate = m.nu_b.active() ? m.nu_b.mass : 0.0;
  parallel_for(count, threads, [&](std::size_t i) {
    auto& n = out[i];
    if (sell_rate > 0.0) {
      RngStream rng(seed, purpose_tag, first + i, 0);
      double t = t0;
      for (;;) {
        t += rng.exponential(sell_rate);
        if (t > t1) break;
        const double z = m.nu_s.atoms[rng.categorical(m.nu_s.probs)];
        n.sells.push_back({t, z, rng.uniform()});
      }
    }
    if (buy_rate > 0.0) {
      RngStream rng(seed, purpose_tag, first + i, 1);
      double t = t0;
      for (;;) {
        t += rng.exponential(buy_rate);
        if (t > t1) break;
        n.buys.push_back({t, m.nu_b.atoms[rng.categorical(m.nu_b.probs)]});
      }
    }
  });
  return out;
}

std::vector<CadlagPath> simulate_midprice(const ModelCoefficients& m, double x0, const TimeGrid& grid,
                                          std::uint64_t seed, std::size_t count, unsigned threads,
                                          std::size_t first) {
  if (m.positivity && x0 < 0.0) throw DomainError("positive mid price needs x0 >= 0");
  if (!m.b || !m.sigma) throw ContractError("mid-price coefficients b and sigma are required");
  if (m.x_coupling == XCoupling::common) count = std::min<std::size_t>(count, 1);
  std::vector<CadlagPath> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    RngStream rng(seed, purpose::midprice, first + i, 0);
    std::vector<double> v(grid.size());
    double x = x0;
    v[0] = x;
    for (std::size_t k = 1; k < grid.size(); ++k) {
      const double dt = grid.nodes[k] - grid.nodes[k - 1];
      const double s = m.sigma(x);
      const double dw = s == 0.0 ? 0.0 : std::sqrt(dt) * rng.normal();
      x += m.b(x) * dt + s * dw;
      if (m.positivity) x = std::max(x, 0.0);
      v[k] = x;
    }
    out[i] = CadlagPath(grid.nodes, std::move(v));
  });
  return out;
}

double midprice_at(const CadlagPath& x, double t) {
  const auto g = x.grid();
  auto it = std::upper_bound(g.begin(), g.end(), t);
  if (it == g.begin()) return x.front();
  return x.values()[static_cast<std::size_t>(it - g.begin()) - 1];
}

std::vector<double> ParticleEnsemble::final_q() const {
  std::vector<double> out;
  out.reserve(q_paths.size());
  for (const auto& p : q_paths) out.push_back(p.back());
  return out;
}

namespace {

struct PathBuilder {
  std::vector<double> t, q, k;
  std::vector<Jump> qj, kj;

  void knot(double time, double qv, double kv) {
    if (!t.empty() && t.back() == time) {
      q.back() = qv;
      k.back() = kv;
      return;
    }
    t.push_back(time);
    q.push_back(qv);
    k.push_back(kv);
  }
};

struct ParticleResult {
  CadlagPath q, k;
  std::vector<double> at_nodes;
};

ParticleResult simulate_particle(const ModelCoefficients& m, const Policy& policy, const TimeGrid& grid,
                                 const std::vector<LawStats>& stats, const CadlagPath& x_path, double q0,
                                 const DrivingNoise& noise) {
  if (q0 < 0.0) throw DomainError("initial liquidity must be nonnegative");
  const double t0 = grid.front();
  const bool need_drift = static_cast<bool>(m.a) || (m.buy_compensated && m.nu_b.active());
  const double buy_drift = m.buy_compensated ? m.nu_b.first_moment() : 0.0;
  PathBuilder pb;
  std::vector<double> at_nodes(grid.size());
  double q = q0, K = 0.0;
  pb.knot(t0, q, K);
  at_nodes[0] = q;
  auto si = std::upper_bound(noise.sells.begin(), noise.sells.end(), t0,
                             [](double v, const SellCandidate& c) { return v < c.t; });
  auto bi = std::upper_bound(noise.buys.begin(), noise.buys.end(), t0,
                             [](double v, const BuyOrder& c) { return v < c.t; });
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t cell = 0; cell + 1 < grid.size(); ++cell) {
    const double tb = grid.nodes[cell + 1];
    const LawStats& st = stats[cell];
    double cur = grid.nodes[cell];
    auto advance = [&](double to) {
      if (!need_drift || !(to > cur)) {
        cur = to;
        return;
      }
      const double x = midprice_at(x_path, cur);
      const double l = policy(cur, x, q);
      const double d = m.drift_correction(x, q, st, l) + buy_drift;
      K += reflect_continuous(q, d * (to - cur));
      cur = to;
    };
    for (;;) {
      const double ts = si != noise.sells.end() ? si->t : inf;
      const double tbuy = bi != noise.buys.end() ? bi->t : inf;
      const double te = std::min(ts, tbuy);
      if (te > tb) break;
      advance(te);
      const double ql = q;
      double dk = 0.0;
      if (ts <= tbuy) {
        const double x = midprice_at(x_path, te);
        const double l = policy(te, x, q);
        const double lam = m.lambda(q, st);
        if (!(lam >= 0.0) || lam > m.lambda_max * (1.0 + 1e-12))
          throw ModelError("intensity outside [0, lambda_max] during thinning");
        if (si->u * m.lambda_max < lam) dk = reflect_jump(q, m.h(x, q, l, si->z));
        ++si;
      } else {
        dk = reflect_jump(q, -bi->z);
        ++bi;
      }
      if (q == ql && dk == 0.0) continue;  // rejected candidate
      K += dk;
      pb.knot(te, q, K);
      pb.qj.push_back({te, q - ql});
      if (dk > 0.0) pb.kj.push_back({te, dk});
    }
    advance(tb);
    if (q < -kReflectionTolerance) throw InvariantViolation("negative liquidity after reflection");
    pb.knot(tb, q, K);
    at_nodes[cell + 1] = q;
  }
  // drop zero-size jump records produced by rejected-equal states
  std::erase_if(pb.qj, [](const Jump& j) { return j.size == 0.0; });
  return {CadlagPath(pb.t, pb.q, std::move(pb.qj)), CadlagPath(std::move(pb.t), std::move(pb.k), std::move(pb.kj)),
          std::move(at_nodes)};
}

void check_inputs(const std::vector<double>& q0, const std::vector<CadlagPath>& x_paths,
                  const std::vector<DrivingNoise>& noise) {
  if (q0.empty()) throw DomainError("simulation needs at least one particle");
  if (noise.size() != q0.size()) throw DomainError("noise count differs from particle count");
  if (x_paths.size() != 1 && x_paths.size() != q0.size())
    throw DomainError("mid-price paths must be shared or one per particle");
}

std::vector<LawStats> stats_of(const ModelCoefficients& m, const std::vector<EmpiricalMeasure>& laws) {
  std::vector<LawStats> st;
  st.reserve(laws.size());
  for (const auto& mu : laws) st.push_back(law_stats(mu, m.law_kernels));
  return st;
}

}  // namespace

ParticleEnsemble simulate_reference(const ModelCoefficients& m, const std::vector<double>& q0,
                                    const Policy& policy, const std::vector<CadlagPath>& x_paths,
                                    const std::vector<DrivingNoise>& noise, const SimulationOptions& opt) {
  check_inputs(q0, x_paths, noise);
  const TimeGrid& grid = opt.grid;
  if (grid.size() < 2) throw DomainError("time grid needs two nodes");
  const std::size_t P = q0.size();
  ParticleEnsemble ens;
  ens.grid = grid;
  ens.x_paths = x_paths;
  ens.meta.seed = opt.seed;
  std::vector<EmpiricalMeasure> laws(grid.size(), EmpiricalMeasure(q0));
  std::vector<ParticleResult> res(P);
  for (int it = 1;; ++it) {
    const auto st = stats_of(m, laws);
    parallel_for(P, opt.threads, [&](std::size_t i) {
      res[i] = simulate_particle(m, policy, grid, st, x_paths.size() == 1 ? x_paths[0] : x_paths[i], q0[i],
                                 noise[i]);
    });
    std::vector<EmpiricalMeasure> next;
    next.reserve(grid.size());
    double gap = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      std::vector<double> atoms(P);
      for (std::size_t i = 0; i < P; ++i) atoms[i] = res[i].at_nodes[k];
      next.emplace_back(std::move(atoms));
      gap = std::max(gap, wasserstein(1, next.back(), laws[k]));
    }
    ens.meta.gap_history.push_back(gap);
    ens.meta.iterations = it;
    ens.meta.gap = gap;
    laws = std::move(next);
    if (!m.law_dependent || gap < opt.picard_tol) break;
    if (it >= opt.max_picard) {
      std::vector<double> last;
      for (const auto& mu : laws) last.push_back(mu.mean());
      throw NonconvergenceError("law iteration did not reach its tolerance", ens.meta.gap_history, last);
    }
  }
  ens.law_flow = std::move(laws);
  ens.q_paths.reserve(P);
  ens.k_paths.reserve(P);
  for (auto& r : res) {
    ens.q_paths.push_back(std::move(r.q));
    ens.k_paths.push_back(std::move(r.k));
  }
  return ens;
}

std::vector<double> draw_initial_states(const EmpiricalMeasure& q0_law, std::size_t count, std::uint64_t seed) {
  const auto atoms = q0_law.atoms();
  if (atoms.front() < 0.0) throw DomainError("initial law must be supported on [0, inf)");
  if (atoms.size() == count) return {atoms.begin(), atoms.end()};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    RngStream rng(seed, purpose::initial_law, i, 0);
    auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(atoms.size()));
    out[i] = atoms[std::min(k, atoms.size() - 1)];
  }
  return out;
}

ParticleEnsemble simulate_liquidity(const ModelCoefficients& m, const EmpiricalMeasure& q0_law,
                                    const Policy& policy, const std::vector<CadlagPath>& x_paths,
                                    const SimulationOptions& opt) {
  const auto q0 = draw_initial_states(q0_law, opt.particles, opt.seed);
  const auto noise = generate_noise(m, opt.grid.front(), opt.grid.back(), opt.seed, purpose::liquidity,
                                    opt.particles, opt.threads);
  return simulate_reference(m, q0, policy, x_paths, noise, opt);
}

ParticleEnsemble simulate_pinned(const ModelCoefficients& m, const std::vector<double>& q0, const Policy& policy,
                                 const std::vector<CadlagPath>& x_paths, const std::vector<DrivingNoise>& noise,
                                 const std::vector<EmpiricalMeasure>& law_flow, const TimeGrid& grid,
                                 unsigned threads) {
  check_inputs(q0, x_paths, noise);
  if (law_flow.size() != grid.size()) throw DomainError("frozen law flow must have one law per grid node");
  const auto st = stats_of(m, law_flow);
  const std::size_t P = q0.size();
  std::vector<ParticleResult> res(P);
  parallel_for(P, threads, [&](std::size_t i) {
    res[i] = simulate_particle(m, policy, grid, st, x_paths.size() == 1 ? x_paths[0] : x_paths[i], q0[i], noise[i]);
  });
  ParticleEnsemble ens;
  ens.grid = grid;
  ens.x_paths = x_paths;
  ens.law_flow = law_flow;
  ens.meta.iterations = 1;
  for (auto& r : res) {
    ens.q_paths.push_back(std::move(r.q));
    ens.k_paths.push_back(std::move(r.k));
  }
  return ens;
}

void for_each_segment(const CadlagPath& q, const CadlagPath& x, const TimeGrid& grid,
                      const std::function<void(const Segment&)>& f) {
  const auto t = q.grid();
  for (std::size_t j = 0; j + 1 < t.size(); ++j) {
    f({t[j], t[j + 1], midprice_at(x, t[j]), q.values()[j], q.left_limit(j + 1), grid.cell(t[j])});
  }
}

FlowGap flow_property_check(const ModelCoefficients& m, const Policy& policy, double t, double s, double r,
                            double x0, const EmpiricalMeasure& q0_law, std::size_t steps, std::size_t particles,
                            std::uint64_t seed, double picard_tol, int max_picard, unsigned threads) {
  if (!(t < s && s < r)) throw DomainError("flow check needs t < s < r");
  const TimeGrid direct = TimeGrid::uniform(t, r, steps);
  TimeGrid leg1, leg2;
  for (double v : direct.nodes) {
    if (v < s) leg1.nodes.push_back(v);
  }
  leg1.nodes.push_back(s);
  leg2.nodes.push_back(s);
  for (double v : direct.nodes) {
    if (v > s) leg2.nodes.push_back(v);
  }
  const auto x_paths = simulate_midprice(m, x0, direct, seed, particles, threads);
  const auto noise = generate_noise(m, t, r, seed, purpose::liquidity, particles, threads);
  const auto q0 = draw_initial_states(q0_law, particles, seed);
  SimulationOptions opt{direct, seed, particles, picard_tol, max_picard, threads};
  const auto full = simulate_reference(m, q0, policy, x_paths, noise, opt);
  opt.grid = leg1;
  const auto first = simulate_reference(m, q0, policy, x_paths, noise, opt);
  opt.grid = leg2;
  const auto second = simulate_reference(m, first.final_q(), policy, x_paths, noise, opt);

  FlowGap g;
  for (std::size_t i = 0; i < particles; ++i) {
    const auto& a = full.q_paths[i];
    const auto& b = second.q_paths[i];
    std::vector<double> times;
    for (double v : a.grid())
      if (v >= s) times.push_back(v);
    for (double v : b.grid()) times.push_back(v);
    double sup = 0.0;
    for (double v : times) sup = std::max(sup, std::abs(a.evaluate(v) - b.evaluate(v)));
    g.gap_q += sup;
  }
  g.gap_q /= static_cast<double>(particles);
  for (std::size_t k = 0; k < direct.size(); ++k) {
    if (direct.nodes[k] <= s) continue;
    const std::size_t k2 = k - (direct.size() - leg2.size());
    g.gap_law = std::max(g.gap_law, wasserstein(1, full.law_flow[k], second.law_flow[k2]));
  }
  return g;
}

}  // namespace lobmf
