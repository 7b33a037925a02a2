#include "lobmf/generator.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numeric>

#include "lobmf/errors.hpp"
#include "lobmf/parallel.hpp"

namespace lobmf {

namespace {

double gl16(const std::function<double(double)>& f) {
  return boost::math::quadrature::gauss<double, 16>::integrate(f, 0.0, 1.0);
}

double pairing(const EmpiricalMeasure& mu, const ScalarFn& psi) {
  return mu.integrate([&](double y) { return psi(y); });
}

BuyForm resolve(BuyForm f, const ModelCoefficients& m) {
  if (f != BuyForm::model) return f;
  return m.buy_compensated ? BuyForm::compensated : BuyForm::raw;
}

struct Local {
  const LocalFn& f;
  const LocalFn& fx;
  const LocalFn& fxx;
  const LocalFn& fq;
};

// generator of the (x, q) part at a frozen law
GeneratorTerms local_terms(const Local& phi, const ModelCoefficients& m, double x, double q, const LawStats& st,
                           double l, BuyForm form) {
  GeneratorTerms t;
  const double s = m.sigma(x);
  t.diffusion = m.b(x) * phi.fx(x, q) + 0.5 * s * s * phi.fxx(x, q);
  const double fq = phi.fq(x, q);
  const double f0 = phi.f(x, q);
  t.drift = m.drift(x, q, st, l) * fq;
  if (m.nu_s.active()) {
    const double lam = m.lambda(q, st);
    if (lam != 0.0) {
      t.sells = lam * m.nu_s.integrate([&](double z) {
        const double h = m.h(x, q, l, z);
        return phi.f(x, q + h) - f0 - fq * h;
      });
    }
  }
  if (m.nu_b.active()) {
    switch (form) {
      case BuyForm::raw:
        t.buys = m.nu_b.integrate([&](double z) { return phi.f(x, q - z) - f0; });
        break;
      case BuyForm::compensated:
        t.buys = m.nu_b.integrate([&](double z) { return phi.f(x, q - z) - f0 + fq * z; });
        break;
      case BuyForm::negated:
        t.buys = -m.nu_b.integrate([&](double z) { return phi.f(x, q - z) - f0 + fq * z; });
        break;
      case BuyForm::model: break;
    }
  }
  return t;
}

const LocalFn& zero_fn() {
  static const LocalFn z = [](double, double) { return 0.0; };
  return z;
}

Local local_of(const CylindricalFunction& phi) {
  if (!phi.f) return {zero_fn(), zero_fn(), zero_fn(), zero_fn()};
  return {phi.f, phi.f_x, phi.f_xx, phi.f_q};
}

// q-generator of psi(q) at (x, q) with the law frozen
double psi_generator(const CylTerm& term, const ModelCoefficients& m, double x, double q, const LawStats& st,
                     double l, BuyForm form) {
  const LocalFn f = [&](double, double y) { return term.psi(y); };
  const LocalFn fq = [&](double, double y) { return term.dpsi(y); };
  return local_terms({f, zero_fn(), zero_fn(), fq}, m, x, q, st, l, form).total();
}

// integral of F(q) over a segment on which q moves linearly from q0 to q1
double segment_integral(const Segment& s, const std::function<double(double t, double q)>& F) {
  const double d = s.t1 - s.t0;
  if (!(d > 0.0)) return 0.0;
  if (s.q0 == s.q1) return d * F(s.t0, s.q0);
  static constexpr double nodes[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  double acc = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double u = 0.5 * (nodes[k] + 1.0);
    acc += weights[k] * F(s.t0 + u * d, s.q0 + u * (s.q1 - s.q0));
  }
  return 0.5 * d * acc;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  if (v.empty()) return {};
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

}  // namespace

double CylindricalFunction::value(double x, double q, const EmpiricalMeasure& mu) const {
  double v = local(x, q);
  for (const auto& t : terms) v += t.g(pairing(mu, t.psi));
  return v;
}

double CylindricalFunction::lions(const EmpiricalMeasure& mu, double y) const {
  double v = 0.0;
  for (const auto& t : terms) v += t.dg(pairing(mu, t.psi)) * t.dpsi(y);
  return v;
}

void CylindricalFunction::check() const {
  if (f && (!f_x || !f_xx || !f_q)) throw ContractError("local part needs f_x, f_xx and f_q");
  if (!f && (f_x || f_xx || f_q)) throw ContractError("derivatives given without the local part");
  for (const auto& t : terms)
    if (!t.g || !t.dg || !t.psi || !t.dpsi) throw ContractError("cylindrical term needs g, g', psi and psi'");
}

CylindricalFunction CylindricalFunction::constant(double c) {
  CylindricalFunction p;
  p.f = [c](double, double) { return c; };
  p.f_x = p.f_xx = p.f_q = [](double, double) { return 0.0; };
  p.name = "constant";
  return p;
}

CylindricalFunction operator+(const CylindricalFunction& a, const CylindricalFunction& b) {
  a.check();
  b.check();
  CylindricalFunction r;
  if (a.f || b.f) {
    const auto A = local_of(a), B = local_of(b);
    auto add = [](const LocalFn& u, const LocalFn& v) { return LocalFn([u, v](double x, double q) { return u(x, q) + v(x, q); }); };
    r.f = add(A.f, B.f);
    r.f_x = add(A.fx, B.fx);
    r.f_xx = add(A.fxx, B.fxx);
    r.f_q = add(A.fq, B.fq);
  }
  r.terms = a.terms;
  r.terms.insert(r.terms.end(), b.terms.begin(), b.terms.end());
  r.name = a.name + " + " + b.name;
  return r;
}

CylindricalFunction operator*(double s, const CylindricalFunction& a) {
  a.check();
  CylindricalFunction r;
  auto scale = [s](const LocalFn& u) { return LocalFn([s, u](double x, double q) { return s * u(x, q); }); };
  if (a.f) {
    r.f = scale(a.f);
    r.f_x = scale(a.f_x);
    r.f_xx = scale(a.f_xx);
    r.f_q = scale(a.f_q);
  }
  for (const auto& t : a.terms) {
    CylTerm u = t;
    u.g = [s, g = t.g](double m) { return s * g(m); };
    u.dg = [s, g = t.dg](double m) { return s * g(m); };
    r.terms.push_back(std::move(u));
  }
  r.name = std::to_string(s) + " * (" + a.name + ")";
  return r;
}

CylindricalFunction phi_q() {
  CylindricalFunction p;
  p.f = [](double, double q) { return q; };
  p.f_x = p.f_xx = [](double, double) { return 0.0; };
  p.f_q = [](double, double) { return 1.0; };
  p.name = "q";
  return p;
}

CylindricalFunction phi_q_squared() {
  CylindricalFunction p;
  p.f = [](double, double q) { return q * q; };
  p.f_x = p.f_xx = [](double, double) { return 0.0; };
  p.f_q = [](double, double q) { return 2.0 * q; };
  p.name = "q^2";
  return p;
}

CylindricalFunction phi_sin_quadratic() {
  CylindricalFunction p;
  p.f = [](double x, double q) { return std::sin(x) + q * q / 8.0; };
  p.f_x = [](double x, double) { return std::cos(x); };
  p.f_xx = [](double x, double) { return -std::sin(x); };
  p.f_q = [](double, double q) { return q / 4.0; };
  p.name = "sin(x) + q^2/8";
  return p;
}

CylindricalFunction phi_law_moments() {
  CylindricalFunction p;
  auto id = [](double v) { return v; };
  auto one = [](double) { return 1.0; };
  p.terms.push_back({id, one, [](double y) { return y * y; }, [](double y) { return 2.0 * y; }});
  p.terms.push_back({[](double m) { return m * m; }, [](double m) { return 2.0 * m; }, id, one});
  p.name = "<mu,y^2> + <mu,y>^2";
  return p;
}

std::vector<CylindricalFunction> shipped_test_functions() { return {phi_q(), phi_sin_quadratic(), phi_law_moments()}; }

std::string to_string(BuyForm f) {
  switch (f) {
    case BuyForm::model: return "model";
    case BuyForm::raw: return "raw";
    case BuyForm::compensated: return "compensated";
    case BuyForm::negated: return "negated";
  }
  return "?";
}

GeneratorTerms generator_terms(const CylindricalFunction& phi, const ModelCoefficients& m, double x, double q,
                               const EmpiricalMeasure& mu, double l, BuyForm form) {
  phi.check();
  if (!m.b || !m.sigma || !m.lambda || !m.h) throw ContractError("generator needs b, sigma, lambda and h");
  form = resolve(form, m);
  const LawStats st = law_stats(mu, m.law_kernels);
  GeneratorTerms t;
  if (phi.f) t = local_terms(local_of(phi), m, x, q, st, l, form);
  const auto atoms = mu.atoms();
  for (const auto& term : phi.terms) {
    const double gp = term.dg(pairing(mu, term.psi));
    if (gp == 0.0) continue;
    // E~ over the atoms of mu; the gamma integrals use 16-point Gauss-Legendre
    double acc = 0.0;
    for (double y : atoms) {
      const double dp = term.dpsi(y);
      double v = m.drift(x, y, st, l) * dp;
      if (m.nu_s.active()) {
        const double lam = m.lambda(y, st);
        if (lam != 0.0) {
          v += lam * m.nu_s.integrate([&](double z) {
            const double h = m.h(x, y, l, z);
            return gl16([&](double g) { return (term.dpsi(y + g * h) - dp) * h; });
          });
        }
      }
      if (m.nu_b.active()) {
        switch (form) {
          case BuyForm::raw:
            v += m.nu_b.integrate([&](double z) { return gl16([&](double g) { return -term.dpsi(y - g * z) * z; }); });
            break;
          case BuyForm::compensated:
            v += m.nu_b.integrate(
                [&](double z) { return gl16([&](double g) { return -(term.dpsi(y - g * z) - dp) * z; }); });
            break;
          case BuyForm::negated:
            v -= m.nu_b.integrate(
                [&](double z) { return gl16([&](double g) { return -(term.dpsi(y - g * z) - dp) * z; }); });
            break;
          case BuyForm::model: break;
        }
      }
      acc += v;
    }
    t.law += gp * acc / static_cast<double>(atoms.size());
  }
  return t;
}

double apply_generator(const CylindricalFunction& phi, const ModelCoefficients& m, double x, double q,
                       const EmpiricalMeasure& mu, double l, BuyForm form) {
  return generator_terms(phi, m, x, q, mu, l, form).total();
}

ItoReport ito_consistency(const CylindricalFunction& phi, const ModelCoefficients& m, const Policy& policy,
                          const EmpiricalMeasure& q0_law, const ItoConfig& cfg) {
  phi.check();
  if (!(cfg.horizon > 0.0)) throw DomainError("horizon must be positive");
  if (cfg.particles < 2) throw DomainError("consistency check needs at least two particles");
  const BuyForm form = resolve(BuyForm::model, m);
  const std::size_t P = cfg.particles;
  const TimeGrid grid = TimeGrid::uniform(0.0, cfg.horizon, cfg.steps);
  const auto xs = simulate_midprice(m, cfg.x0, grid, cfg.seed, P, cfg.threads);
  SimulationOptions opt{grid, cfg.seed, P, cfg.picard_tol, cfg.max_picard, cfg.threads};
  const auto ref = simulate_liquidity(m, q0_law, policy, xs, opt);
  const auto noise = generate_noise(m, 0.0, cfg.horizon, cfg.seed, purpose::pinned, P, cfg.threads);
  const auto pin = simulate_pinned(m, std::vector<double>(P, cfg.q0), policy, xs, noise, ref.law_flow, grid,
                                   cfg.threads);
  std::vector<LawStats> st;
  for (const auto& mu : ref.law_flow) st.push_back(law_stats(mu, m.law_kernels));

  ItoReport r;
  r.phi = phi.name;
  r.picard_iterations = ref.meta.iterations;
  std::size_t pin_refl = 0, ref_refl = 0;
  for (const auto& k : pin.k_paths) pin_refl += k.back() > 0.0;
  for (const auto& k : ref.k_paths) ref_refl += k.back() > 0.0;
  r.reflections = pin_refl + ref_refl;

  if (phi.f) {
    const Local loc = local_of(phi);
    std::vector<double> lhs(P), rhs(P);
    parallel_for(P, cfg.threads, [&](std::size_t i) {
      const auto& xp = pin.x_path(i);
      lhs[i] = phi.f(xp.back(), pin.q_paths[i].back()) - phi.f(cfg.x0, cfg.q0);
      double acc = 0.0;
      for_each_segment(pin.q_paths[i], xp, grid, [&](const Segment& s) {
        acc += segment_integral(s, [&](double t, double q) {
          return local_terms(loc, m, s.x, q, st[s.cell], policy(t, s.x, q), form).total();
        });
      });
      rhs[i] = acc;
    });
    std::vector<double> d(P);
    for (std::size_t i = 0; i < P; ++i) d[i] = lhs[i] - rhs[i];
    r.lhs_local = mean_se(lhs).mean;
    r.rhs_local = mean_se(rhs).mean;
    r.se_local = mean_se(d).se;
    if (pin_refl > 0 && phi.f_q(cfg.x0, 0.0) != 0.0) r.precondition_ok = false;
  }

  if (!phi.terms.empty()) {
    const std::size_t K = grid.size();
    // cell weights: trapezoidal average of g' at the two nodes of each cell
    std::vector<std::vector<double>> gbar(phi.terms.size(), std::vector<double>(K - 1));
    for (std::size_t j = 0; j < phi.terms.size(); ++j) {
      const auto& term = phi.terms[j];
      std::vector<double> mk(K);
      for (std::size_t k = 0; k < K; ++k) mk[k] = pairing(ref.law_flow[k], term.psi);
      r.lhs_law += term.g(mk[K - 1]) - term.g(mk[0]);
      for (std::size_t k = 0; k + 1 < K; ++k) gbar[j][k] = 0.5 * (term.dg(mk[k]) + term.dg(mk[k + 1]));
      if (ref_refl > 0 && term.dpsi(0.0) != 0.0) r.precondition_ok = false;
    }
    const std::size_t R = ref.particles();
    std::vector<double> integral(R), resid(R);
    parallel_for(R, cfg.threads, [&](std::size_t p) {
      const auto& qp = ref.q_paths[p];
      const auto& xp = ref.x_path(p);
      double acc = 0.0, incr = 0.0;
      for (std::size_t j = 0; j < phi.terms.size(); ++j) {
        const auto& term = phi.terms[j];
        for_each_segment(qp, xp, grid, [&](const Segment& s) {
          acc += gbar[j][s.cell] * segment_integral(s, [&](double t, double q) {
                   return psi_generator(term, m, s.x, q, st[s.cell], policy(t, s.x, q), form);
                 });
        });
        for (std::size_t k = 0; k + 1 < K; ++k)
          incr += gbar[j][k] * (term.psi(qp.evaluate(grid.nodes[k + 1])) - term.psi(qp.evaluate(grid.nodes[k])));
      }
      integral[p] = acc;
      resid[p] = incr - acc;
    });
    r.rhs_law = mean_se(integral).mean;
    r.se_law = mean_se(resid).se;
  }
  r.lhs = r.lhs_local + r.lhs_law;
  r.rhs = r.rhs_local + r.rhs_law;
  r.gap = r.lhs - r.rhs;
  r.se = std::hypot(r.se_local, r.se_law);
  return r;
}

RichardsonReport generator_richardson(const CylindricalFunction& phi, const ModelCoefficients& m,
                                      const Policy& policy, const EmpiricalMeasure& q0_law,
                                      const std::vector<double>& deltas, const ItoConfig& cfg, BuyForm form) {
  phi.check();
  if (deltas.size() < 2) throw DomainError("Richardson check needs at least two steps");
  RichardsonReport r;
  r.deltas = deltas;
  std::sort(r.deltas.begin(), r.deltas.end());
  if (!(r.deltas.front() > 0.0)) throw DomainError("steps must be positive");
  TimeGrid grid;
  grid.nodes.push_back(0.0);
  for (double d : r.deltas) grid.nodes.push_back(d);
  const std::size_t D = r.deltas.size();

  const std::size_t Pref = std::min<std::size_t>(cfg.particles, 8192);
  const auto xs_ref = simulate_midprice(m, cfg.x0, grid, cfg.seed, Pref, cfg.threads);
  SimulationOptions opt{grid, cfg.seed, Pref, cfg.picard_tol, cfg.max_picard, cfg.threads};
  const auto ref = simulate_liquidity(m, q0_law, policy, xs_ref, opt);
  r.generator = apply_generator(phi, m, cfg.x0, cfg.q0, ref.law_flow[0], policy(0.0, cfg.x0, cfg.q0), form);

  // pinned particles in chunks; sums of the increments at every delta
  const double f0 = phi.local(cfg.x0, cfg.q0);
  std::vector<double> sum(D, 0.0), sum2(D, 0.0);
  const std::size_t chunk = 1u << 16;
  for (std::size_t first = 0; first < cfg.particles; first += chunk) {
    const std::size_t n = std::min(chunk, cfg.particles - first);
    const auto xs = simulate_midprice(m, cfg.x0, grid, cfg.seed, n, cfg.threads, first);
    const auto noise = generate_noise(m, 0.0, grid.back(), cfg.seed, purpose::pinned, n, cfg.threads, first);
    const auto pin = simulate_pinned(m, std::vector<double>(n, cfg.q0), policy, xs, noise, ref.law_flow, grid,
                                     cfg.threads);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& qp = pin.q_paths[i];
      const auto& xp = pin.x_path(i);
      for (std::size_t k = 0; k < D; ++k) {
        const double t = r.deltas[k];
        const double v = phi.local(midprice_at(xp, t), qp.evaluate(t)) - f0;
        sum[k] += v;
        sum2[k] += v * v;
      }
    }
  }
  const double P = static_cast<double>(cfg.particles);
  for (std::size_t k = 0; k < D; ++k) {
    const double d = r.deltas[k];
    double law = 0.0;
    for (const auto& term : phi.terms)
      law += term.g(pairing(ref.law_flow[k + 1], term.psi)) - term.g(pairing(ref.law_flow[0], term.psi));
    const double mean = sum[k] / P;
    const double var = std::max(sum2[k] / P - mean * mean, 0.0) * P / (P - 1.0);
    r.estimates.push_back((mean + law) / d);
    r.errors.push_back(r.estimates.back() - r.generator);
    r.se.push_back(std::sqrt(var / P) / d);
  }
  r.same_sign = std::all_of(r.errors.begin(), r.errors.end(), [&](double e) { return e * r.errors[0] > 0.0; });
  if (r.same_sign) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < D; ++k) {
      const double lx = std::log(r.deltas[k]), ly = std::log(std::abs(r.errors[k]));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double n = static_cast<double>(D);
    r.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  } else {
    r.slope = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

double GridFunction::along_q(std::size_t i, double q) const {
  const std::size_t n = q_grid.size();
  if (n == 1 || q <= q_grid.front()) return at(i, 0);
  std::size_t k;
  if (q >= q_grid.back()) {
    k = n - 2;
  } else {
    k = static_cast<std::size_t>(std::upper_bound(q_grid.begin(), q_grid.end(), q) - q_grid.begin()) - 1;
  }
  const double w = (q - q_grid[k]) / (q_grid[k + 1] - q_grid[k]);
  return (1.0 - w) * at(i, k) + w * at(i, k + 1);
}

GridFunction GridFunction::from_table(const ValueTable& t) {
  GridFunction g;
  g.x_grid = t.x_grid;
  g.q_grid = t.q_grid;
  for (const auto& c : t.cells) {
    g.values.push_back(c.value);
    g.se.push_back(c.se);
    g.bias.push_back(c.tail_bound);
  }
  return g;
}

GridFunction GridFunction::from_function(std::vector<double> xs, std::vector<double> qs,
                                         const std::function<double(double, double)>& f) {
  GridFunction g;
  g.x_grid = std::move(xs);
  g.q_grid = std::move(qs);
  for (double x : g.x_grid)
    for (double q : g.q_grid) g.values.push_back(f(x, q));
  return g;
}

namespace {

double uniform_step(const std::vector<double>& g, const char* what) {
  if (g.size() < 2) return 0.0;
  const double h = g[1] - g[0];
  if (!(h > 0.0)) throw DomainError(std::string(what) + " grid must be increasing");
  for (std::size_t k = 2; k < g.size(); ++k)
    if (std::abs((g[k] - g[k - 1]) - h) > 1e-9 * (1.0 + std::abs(h)))
      throw DomainError(std::string(what) + " grid must be uniform");
  return h;
}

struct Eval {
  double residual = 0.0;
  double best_l = 0.0;
  double noise = 0.0;
  double truncation = 0.0;
};

// residual at (i, j) with stencil half-width s
Eval residual_at(const ModelCoefficients& m, const RewardSpec& reward, const GridFunction& v, std::size_t i,
                 std::size_t j, std::size_t s, double hx, double hq, const LawStats& st,
                 const std::vector<double>& l_grid, BuyForm form) {
  const std::size_t nx = v.x_grid.size();
  const double x = v.x_grid[i], q = v.q_grid[j];
  const double v0 = v.at(i, j);
  const bool has_x = nx >= 2 * s + 1 && i >= s && i + s < nx;
  double vx = 0.0, vxx = 0.0;
  if (has_x) {
    const double a = v.at(i - s, j), b = v.at(i + s, j), H = static_cast<double>(s) * hx;
    vx = (b - a) / (2.0 * H);
    vxx = (b - 2.0 * v0 + a) / (H * H);
  }
  const double H = static_cast<double>(s) * hq;
  const double vq = (v.at(i, j + s) - v.at(i, j - s)) / (2.0 * H);
  double se = 0.0, bias = 0.0;
  for (std::size_t a = (i >= s ? i - s : 0); a <= std::min(nx - 1, i + s); ++a) {
    for (std::size_t b = j - s; b <= j + s; ++b) {
      se = std::max(se, v.se_at(a, b));
      bias = std::max(bias, v.bias_at(a, b));
    }
  }

  const double sg = m.sigma(x);
  const double diff = m.b(x) * vx + 0.5 * sg * sg * vxx;
  Eval best;
  bool first = true;
  for (double l : l_grid) {
    double val = diff + m.drift(x, q, st, l) * vq + running_reward(m, reward, x, q, st, l);
    double hbar = 0.0;
    const double lam = m.nu_s.active() ? m.lambda(q, st) : 0.0;
    if (lam != 0.0) {
      val += lam * m.nu_s.integrate([&](double z) {
        const double h = m.h(x, q, l, z);
        return v.along_q(i, q + h) - v0 - vq * h;
      });
      hbar = m.nu_s.integrate([&](double z) { return std::abs(m.h(x, q, l, z)); });
    }
    if (m.nu_b.active()) {
      switch (form) {
        case BuyForm::raw: val += m.nu_b.integrate([&](double z) { return v.along_q(i, q - z) - v0; }); break;
        case BuyForm::compensated:
          val += m.nu_b.integrate([&](double z) { return v.along_q(i, q - z) - v0 + vq * z; });
          break;
        case BuyForm::negated:
          val -= m.nu_b.integrate([&](double z) { return v.along_q(i, q - z) - v0 + vq * z; });
          break;
        case BuyForm::model: break;
      }
    }
    if (first || val > best.residual) {
      best.residual = val;
      best.best_l = l;
      // absolute stencil weights times the table noise
      const double Hx = static_cast<double>(s) * hx;
      double w = m.rho + std::abs(m.drift(x, q, st, l)) / H + lam * (2.0 * m.nu_s.mass + hbar / H) +
                 m.nu_b.mass * 2.0 + m.nu_b.first_moment() / H;
      if (has_x) w += std::abs(m.b(x)) / Hx + sg * sg * 2.0 / (Hx * Hx);
      best.noise = w * se;
      best.truncation = w * bias;
      first = false;
    }
  }
  best.residual = m.rho * v0 - best.residual;
  return best;
}

double quantile(std::vector<double> v, double u) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::ceil(u * static_cast<double>(v.size()))) - (u > 0.0 ? 1 : 0);
  return v[std::min(k, v.size() - 1)];
}

}  // namespace

HjbResidualReport hjb_residual_scan(const ModelCoefficients& m, const RewardSpec& reward, const GridFunction& v,
                                    const EmpiricalMeasure& mu, const std::vector<double>& l_grid,
                                    BuyForm form) {
  if (l_grid.empty()) throw DomainError("control grid is empty");
  if (v.q_grid.size() < 3) throw DomainError("value table needs at least three q points");
  if (v.values.size() != v.x_grid.size() * v.q_grid.size()) throw DomainError("value table has the wrong shape");
  form = resolve(form, m);
  HjbResidualReport rep;
  rep.h_x = uniform_step(v.x_grid, "x");
  rep.h_q = uniform_step(v.q_grid, "q");
  const LawStats st = law_stats(mu, m.law_kernels);
  const std::size_t nx = v.x_grid.size(), nq = v.q_grid.size();
  const bool x_moves = nx >= 3;
  // interior in q always; interior in x when the x grid allows it
  for (std::size_t i = x_moves ? 1 : 0; i < (x_moves ? nx - 1 : nx); ++i) {
    for (std::size_t j = 1; j + 1 < nq; ++j) {
      const auto e1 = residual_at(m, reward, v, i, j, 1, rep.h_x, rep.h_q, st, l_grid, form);
      HjbPoint p;
      p.x = v.x_grid[i];
      p.q = v.q_grid[j];
      p.v = v.at(i, j);
      p.residual = e1.residual;
      p.best_l = e1.best_l;
      p.noise = e1.noise;
      p.truncation = e1.truncation;
      const bool wide_ok = j >= 2 && j + 2 < nq && (!x_moves || (i >= 2 && i + 2 < nx));
      if (wide_ok) {
        const auto e2 = residual_at(m, reward, v, i, j, 2, rep.h_x, rep.h_q, st, l_grid, form);
        p.differencing = std::abs(e1.residual - e2.residual);
      }
      p.tolerance = 3.0 * (p.noise + p.differencing) + p.truncation + 1e-9;
      rep.points.push_back(p);
    }
  }
  std::vector<double> absr, rv;
  for (const auto& p : rep.points) {
    absr.push_back(std::abs(p.residual));
    rv.push_back(std::abs(m.rho * p.v));
  }
  const double scale = std::max(quantile(rv, 0.5), 1e-12);
  for (auto& p : rep.points) {
    if (p.noise > 0.1 * scale) {
      rep.conditioning_warning = true;
      p.tolerance *= 2.0;
    }
  }
  for (auto& p : rep.points) {
    if (p.residual > p.tolerance)
      p.classification = "subsolution-violating";
    else if (p.residual < -p.tolerance)
      p.classification = "supersolution-violating";
    else
      p.classification = "within tolerance";
  }
  rep.median_abs = quantile(absr, 0.5);
  rep.p90_abs = quantile(absr, 0.9);
  rep.max_abs = quantile(absr, 1.0);
  return rep;
}

}  // namespace lobmf
