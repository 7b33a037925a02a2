#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lobmf/errors.hpp"
#include "lobmf/generator.hpp"
#include "lobmf/presets.hpp"

using namespace lobmf;

namespace {

ModelCoefficients jumpy() {
  ModelCoefficients m;
  m.b = [](double x) { return 0.3 - 0.1 * x; };
  m.sigma = [](double x) { return 0.2 + 0.05 * std::sin(x); };
  m.lambda = [](double q, const LawStats& mu) { return 1.5 / (1.0 + 0.1 * q + mu.mean); };
  m.lambda_max = 1.5;
  m.h = [](double x, double q, double l, double z) { return z * (1.0 + 0.1 * l) / (1.0 + 0.05 * q + 0.01 * x); };
  m.c = [](double x, double, double l) { return x + l; };
  m.nu_s = {2.0, {0.5, 1.5}, {0.3, 0.7}};
  m.nu_b = {0.8, {0.25, 1.0}, {0.5, 0.5}};
  return m;
}

CylindricalFunction x_only() {
  CylindricalFunction p;
  p.f = [](double x, double) { return std::exp(0.3 * x); };
  p.f_x = [](double x, double) { return 0.3 * std::exp(0.3 * x); };
  p.f_xx = [](double x, double) { return 0.09 * std::exp(0.3 * x); };
  p.f_q = [](double, double) { return 0.0; };
  p.name = "exp(0.3x)";
  return p;
}

CylindricalFunction cubic_law() {
  CylindricalFunction p;
  p.terms.push_back({[](double m) { return std::sin(m); }, [](double m) { return std::cos(m); },
                     [](double y) { return y * y * y / 10.0; }, [](double y) { return 0.3 * y * y; }});
  p.name = "sin(<mu,y^3/10>)";
  return p;
}

}  // namespace

TEST_CASE("generator on functions of x only") {
  auto m = jumpy();
  const auto mu = from_samples({1.0, 2.0, 4.0});
  const double x = 0.7;
  const double s = m.sigma(x);
  const double expect = m.b(x) * 0.3 * std::exp(0.3 * x) + 0.5 * s * s * 0.09 * std::exp(0.3 * x);
  CHECK(apply_generator(x_only(), m, x, 2.0, mu, 0.4) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("generator on q and q^2 with constant coefficients") {
  ModelCoefficients m;
  m.b = [](double) { return 0.0; };
  m.sigma = [](double) { return 0.0; };
  m.lambda = [](double, const LawStats&) { return 2.0; };
  m.lambda_max = 2.0;
  m.h = [](double, double, double, double) { return 0.7; };
  m.nu_s = MarkMeasure::point(1.5, 1.0);
  m.nu_b = {0.6, {0.5, 2.0}, {0.5, 0.5}};
  m.a = [](double, double, const LawStats&, double) { return 0.25; };
  const auto mu = from_samples({1.0, 3.0});
  const double q = 5.0;
  const double zb1 = 0.6 * 1.25, zb2 = 0.6 * (0.25 + 4.0) / 2.0;
  CHECK(apply_generator(phi_q(), m, 1.0, q, mu, 0.0, BuyForm::compensated) == doctest::Approx(0.25));
  CHECK(apply_generator(phi_q(), m, 1.0, q, mu, 0.0, BuyForm::raw) == doctest::Approx(0.25 - zb1));
  const double sells = 2.0 * 1.5 * 0.49;
  CHECK(apply_generator(phi_q_squared(), m, 1.0, q, mu, 0.0, BuyForm::compensated) ==
        doctest::Approx(2 * q * 0.25 + sells + zb2));
  CHECK(apply_generator(phi_q_squared(), m, 1.0, q, mu, 0.0, BuyForm::negated) ==
        doctest::Approx(2 * q * 0.25 + sells - zb2));
  CHECK(apply_generator(phi_q_squared(), m, 1.0, q, mu, 0.0, BuyForm::raw) ==
        doctest::Approx(2 * q * 0.25 + sells + zb2 - 2 * q * zb1));
  m.buy_compensated = true;
  CHECK(apply_generator(phi_q(), m, 1.0, q, mu, 0.0) == doctest::Approx(0.25));
}

TEST_CASE("constants are harmonic and the generator is linear") {
  auto m = jumpy();
  const auto mu = from_samples({0.5, 1.0, 2.5, 4.0});
  CHECK(apply_generator(CylindricalFunction::constant(3.7), m, 0.4, 2.0, mu, 0.3) == 0.0);
  RngStream rng(5, purpose::test, 0, 0);
  const auto fs = shipped_test_functions();
  for (int k = 0; k < 20; ++k) {
    const auto& a = fs[k % 3];
    const auto& b = k % 2 ? cubic_law() : x_only();
    const double s = rng.uniform() * 4 - 2, t = rng.uniform() * 4 - 2;
    const double x = rng.uniform() * 2, q = rng.uniform() * 5, l = rng.uniform();
    const double lhs = apply_generator(s * a + t * b, m, x, q, mu, l);
    const double rhs = s * apply_generator(a, m, x, q, mu, l) + t * apply_generator(b, m, x, q, mu, l);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("missing derivatives are contract errors") {
  auto p = phi_q();
  p.f_xx = nullptr;
  auto m = jumpy();
  CHECK_THROWS_AS(apply_generator(p, m, 1.0, 1.0, from_samples({1.0}), 0.0), ContractError);
  auto c = cubic_law();
  c.terms[0].dpsi = nullptr;
  CHECK_THROWS_AS(apply_generator(c, m, 1.0, 1.0, from_samples({1.0}), 0.0), ContractError);
}

TEST_CASE("Lions derivative against a lifted difference") {
  const std::vector<double> atoms{0.3, 1.1, 2.0, 3.4, 5.0};
  const auto mu = EmpiricalMeasure(atoms);
  for (const auto& phi : {phi_law_moments(), cubic_law()}) {
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      double err[2];
      int idx = 0;
      for (double eps : {1e-3, 1e-4}) {
        auto a = atoms;
        a[k] += eps;
        const double diff = phi.value(0, 0, EmpiricalMeasure(a)) - phi.value(0, 0, mu);
        err[idx++] = std::abs(diff - phi.lions(mu, atoms[k]) * eps / static_cast<double>(atoms.size()));
      }
      // second-order agreement: the remainder falls like eps^2
      CHECK(err[1] < 0.02 * err[0] + 1e-13);
    }
  }
}

TEST_CASE("law terms equal g' times the averaged generator of psi") {
  auto m = jumpy();
  const auto mu = from_samples({0.5, 1.0, 2.5, 4.0});
  const auto phi = cubic_law();
  const double x = 0.8, l = 0.2;
  const LawStats st = law_stats(mu, m.law_kernels);
  const auto& t = phi.terms[0];
  double acc = 0.0;
  for (double y : mu.atoms()) {
    double v = m.drift(x, y, st, l) * t.dpsi(y);
    v += m.lambda(y, st) *
         m.nu_s.integrate([&](double z) { const double h = m.h(x, y, l, z); return t.psi(y + h) - t.psi(y) - t.dpsi(y) * h; });
    v += m.nu_b.integrate([&](double z) { return t.psi(y - z) - t.psi(y); });
    acc += v;
  }
  const double expect = t.dg(mu.integrate(t.psi)) * acc / 4.0;
  CHECK(generator_terms(phi, m, x, 3.0, mu, l).law == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("Ito consistency on small runs") {
  auto p = make_preset("poisson-unit", {{"q0", 5}});
  ItoConfig cfg;
  cfg.q0 = 5;
  cfg.particles = 2048;
  cfg.steps = 32;
  cfg.seed = 4;
  auto r = ito_consistency(phi_q(), p.model, Policy::constant(0.0), p.q0_law, cfg);
  CHECK(r.rhs_local == doctest::Approx(2.0).epsilon(1e-12));  // a (s - t) with a = lambda
  CHECK(std::abs(r.gap) <= 3.0 * r.se);
  CHECK(r.precondition_ok);

  auto c = ito_consistency(CylindricalFunction::constant(2.0), p.model, Policy::constant(0.0), p.q0_law, cfg);
  CHECK(c.lhs == 0.0);
  CHECK(c.rhs == 0.0);

  auto mf = make_preset("meanfield-diffusion");
  cfg.q0 = 6;
  cfg.steps = 64;
  for (const auto& phi : shipped_test_functions()) {
    auto s = ito_consistency(phi, mf.model, Policy::constant(0.5), mf.q0_law, cfg);
    INFO(phi.name, " gap ", s.gap, " se ", s.se);
    CHECK(std::abs(s.gap) <= 3.0 * s.se);
    CHECK(s.se > 0.0);
  }

  auto fr = make_preset("full-reflection");
  cfg.q0 = 0;
  auto v = ito_consistency(phi_q(), fr.model, Policy::constant(0.0), fr.q0_law, cfg);
  CHECK_FALSE(v.precondition_ok);
}

TEST_CASE("generator against simulator differences") {
  auto p = make_preset("gen-check");
  ItoConfig cfg;
  cfg.x0 = p.x0;
  cfg.q0 = p.q0;
  cfg.particles = 1u << 17;
  cfg.seed = 2;
  auto r = generator_richardson(phi_q_squared(), p.model, Policy::constant(0.0), p.q0_law, {0.4, 0.2, 0.1}, cfg);
  CHECK(r.generator == doctest::Approx(6 * 4.0 + 5));
  INFO(r.errors[0], " ", r.errors[1], " ", r.errors[2], " slope ", r.slope);
  CHECK(r.same_sign);
  CHECK(r.slope > 0.6);
  CHECK(r.slope < 1.4);
  auto bad = generator_richardson(phi_q_squared(), p.model, Policy::constant(0.0), p.q0_law, {0.4, 0.2, 0.1}, cfg,
                                  BuyForm::negated);
  CHECK(!(bad.slope > 0.6 && bad.slope < 1.4));
}

TEST_CASE("HJB residuals on the degenerate config") {
  auto p = make_preset("degenerate-hjb");
  std::vector<double> xs{0.5, 1.0, 1.5, 2.0, 2.5}, qs{0, 1, 2, 3, 4, 5, 6};
  const double rho = p.model.rho;
  auto exact = GridFunction::from_function(xs, qs, [rho](double x, double) { return (x + 0.25) / rho; });
  const std::vector<double> lg{0.0, 0.25, 0.5, 0.75, 1.0};
  auto rep = hjb_residual_scan(p.model, p.reward, exact, p.q0_law, lg);
  CHECK(rep.points.size() == 3 * 5);
  for (const auto& pt : rep.points) {
    CHECK(std::abs(pt.residual) <= 1e-6);
    CHECK(pt.best_l == 0.5);
    CHECK(pt.classification == "within tolerance");
  }
  const double qbar = 6.0;
  auto bumped = GridFunction::from_function(
      xs, qs, [rho, qbar](double x, double q) { return (x + 0.25) / rho + 0.1 * q * (qbar - q); });
  auto rb = hjb_residual_scan(p.model, p.reward, bumped, p.q0_law, lg);
  CHECK(rb.median_abs > rep.median_abs);
  CHECK(rep.label == "frozen-law diagnostic");

  // a reward that ignores l makes every control grid equivalent
  auto flat_reward = p.reward;
  flat_reward.running = [](double x, double, const LawStats&, double) { return x; };
  auto a = hjb_residual_scan(p.model, flat_reward, exact, p.q0_law, lg);
  auto b = hjb_residual_scan(p.model, flat_reward, exact, p.q0_law, {0.75});
  for (std::size_t k = 0; k < a.points.size(); ++k) CHECK(a.points[k].residual == b.points[k].residual);
}
