#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lobmf/dynamics.hpp"
#include "lobmf/ensemble_io.hpp"
#include "lobmf/errors.hpp"

using namespace lobmf;

namespace {

ModelCoefficients flat_midprice() {
  ModelCoefficients m;
  m.b = [](double) { return 0.0; };
  m.sigma = [](double) { return 0.0; };
  m.c = [](double x, double, double l) { return x + l; };
  m.rho = 1.0;
  return m;
}

ModelCoefficients poisson(double lam0) {
  auto m = flat_midprice();
  m.lambda = [lam0](double, const LawStats&) { return lam0; };
  m.lambda_max = lam0;
  m.h = [](double, double, double, double) { return 1.0; };
  m.nu_s = MarkMeasure::point(1.0, 1.0);
  m.law_dependent = false;
  return m;
}

ModelCoefficients meanfield(double lam0) {
  auto m = flat_midprice();
  m.lambda = [lam0](double, const LawStats& mu) { return lam0 / (1.0 + mu.mean); };
  m.lambda_max = lam0;
  m.h = [](double, double, double, double z) { return z; };
  m.nu_s = {1.0, {0.5, 1.0}, {0.5, 0.5}};
  m.nu_b = MarkMeasure::point(1.0, 1.0);
  return m;
}

struct Moments {
  double mean, var, se_mean, se_var;
};

Moments moments(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    m2 += (x - mean) * (x - mean);
    m4 += std::pow(x - mean, 4);
  }
  m2 /= n;
  m4 /= n;
  return {mean, m2 * n / (n - 1), std::sqrt(m2 / n), std::sqrt((m4 - m2 * m2) / n)};
}

bool same_path(const CadlagPath& a, const CadlagPath& b) {
  auto eq = [](auto x, auto y) { return std::equal(x.begin(), x.end(), y.begin(), y.end()); };
  if (!eq(a.grid(), b.grid()) || !eq(a.values(), b.values())) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a.jump_at(k) != b.jump_at(k)) return false;
  return true;
}

SimulationOptions options(double T, std::size_t steps, std::size_t P, std::uint64_t seed) {
  SimulationOptions o;
  o.grid = TimeGrid::uniform(0.0, T, steps);
  o.seed = seed;
  o.particles = P;
  return o;
}

}  // namespace

TEST_CASE("mid price special cases") {
  auto m = flat_midprice();
  auto g = TimeGrid::uniform(0, 1, 128);
  auto xs = simulate_midprice(m, 1.5, g, 1, 3);
  for (const auto& p : xs)
    for (double v : p.values()) CHECK(v == 1.5);
  m.b = [](double) { return 0.25; };
  xs = simulate_midprice(m, 1.0, g, 1, 2);
  CHECK(xs[0].back() == doctest::Approx(1.25).epsilon(1e-13));
}

TEST_CASE("mid price Brownian variance") {
  auto m = flat_midprice();
  const double s0 = 0.3;
  m.sigma = [s0](double) { return s0; };
  auto xs = simulate_midprice(m, 0.0, TimeGrid::uniform(0, 2, 64), 9, 10000);
  std::vector<double> xt;
  for (const auto& p : xs) xt.push_back(p.back());
  auto mo = moments(xt);
  CHECK(std::abs(mo.var - s0 * s0 * 2.0) < 3.0 * mo.se_var);
  CHECK(std::abs(mo.mean) < 3.0 * mo.se_mean);
}

TEST_CASE("positivity projection") {
  auto m = flat_midprice();
  m.b = [](double) { return -1.0; };
  m.positivity = true;
  auto xs = simulate_midprice(m, 0.2, TimeGrid::uniform(0, 1, 16), 1, 1);
  CHECK(xs[0].back() == 0.0);
  CHECK_THROWS_AS(simulate_midprice(m, -0.1, TimeGrid::uniform(0, 1, 4), 1, 1), DomainError);
}

TEST_CASE("Poisson liquidity moments") {
  auto m = poisson(2.0);
  auto opt = options(1.0, 128, 10000, 17);
  auto xs = simulate_midprice(m, 1.0, opt.grid, opt.seed, 1);
  auto ens = simulate_liquidity(m, EmpiricalMeasure::dirac(3.0), Policy::constant(0.0), xs, opt);
  CHECK(ens.meta.iterations == 1);
  std::vector<double> inc;
  for (double q : ens.final_q()) inc.push_back(q - 3.0);
  auto mo = moments(inc);
  CHECK(std::abs(mo.mean - 2.0) < 3.0 * mo.se_mean);
  CHECK(std::abs(mo.var - 2.0) < 3.0 * mo.se_var);
  CHECK(ens.law_flow.front() == EmpiricalMeasure(std::vector<double>(10000, 3.0)));
}

TEST_CASE("buy orders at empty book are fully reflected") {
  auto m = flat_midprice();
  m.nu_b = MarkMeasure::point(1.0, 1.0);
  m.law_dependent = false;
  auto opt = options(2.0, 64, 10000, 5);
  auto xs = simulate_midprice(m, 1.0, opt.grid, opt.seed, 1);
  auto ens = simulate_liquidity(m, EmpiricalMeasure::dirac(0.0), Policy::constant(0.0), xs, opt);
  std::vector<double> kt;
  for (std::size_t i = 0; i < ens.particles(); ++i) {
    CHECK(ens.q_paths[i].sup_norm() == 0.0);
    kt.push_back(ens.k_paths[i].back());
  }
  auto mo = moments(kt);
  CHECK(std::abs(mo.mean - 2.0) < 3.0 * mo.se_mean);
}

TEST_CASE("no jumps keeps the liquidity frozen") {
  auto m = poisson(2.0);
  m.h = [](double, double, double, double) { return 0.0; };
  auto opt = options(1.0, 16, 50, 1);
  auto xs = simulate_midprice(m, 1.0, opt.grid, 1, 1);
  auto ens = simulate_liquidity(m, EmpiricalMeasure::dirac(2.5), Policy::constant(0.3), xs, opt);
  for (std::size_t i = 0; i < ens.particles(); ++i) {
    for (double v : ens.q_paths[i].values()) CHECK(v == 2.5);
    CHECK(ens.k_paths[i].back() == 0.0);
  }
}

TEST_CASE("thinning with a capped intensity matches Poisson moments") {
  auto m = poisson(2.0);
  m.lambda = [](double q, const LawStats&) { return q < 1000.0 ? 1.5 : 0.0; };
  m.lambda_max = 4.0;
  auto opt = options(1.0, 32, 10000, 23);
  auto xs = simulate_midprice(m, 1.0, opt.grid, 1, 1);
  auto ens = simulate_liquidity(m, EmpiricalMeasure::dirac(0.0), Policy::constant(0.0), xs, opt);
  auto mo = moments(ens.final_q());
  CHECK(std::abs(mo.mean - 1.5) < 3.0 * mo.se_mean);
  CHECK(std::abs(mo.var - 1.5) < 3.0 * mo.se_var);
}

TEST_CASE("intensity above its bound is a model error") {
  auto m = poisson(2.0);
  m.lambda_max = 1.0;
  auto opt = options(1.0, 8, 100, 2);
  auto xs = simulate_midprice(m, 1.0, opt.grid, 1, 1);
  CHECK_THROWS_AS(simulate_liquidity(m, EmpiricalMeasure::dirac(0.0), Policy::constant(0.0), xs, opt), ModelError);
}

TEST_CASE("law iteration contracts on a mean-field config") {
  auto m = meanfield(3.0);
  auto opt = options(1.0, 32, 2000, 3);
  auto xs = simulate_midprice(m, 1.0, opt.grid, 1, 1);
  auto ens = simulate_liquidity(m, from_samples({0.0, 1.0, 2.0, 3.0}), Policy::constant(0.0), xs, opt);
  CHECK(ens.meta.gap < opt.picard_tol);
  CHECK(ens.meta.iterations >= 2);
  const auto& h = ens.meta.gap_history;
  for (std::size_t k = 1; k < h.size(); ++k) CHECK(h[k] <= h[k - 1]);
  for (std::size_t i = 0; i < ens.particles(); ++i) {
    CHECK(ens.q_paths[i].min_value() >= -kReflectionTolerance);
    const auto kv = ens.k_paths[i].values();
    for (std::size_t k = 1; k < kv.size(); ++k) CHECK(kv[k] >= kv[k - 1]);
  }
  opt.max_picard = 1;
  CHECK_THROWS_AS(simulate_liquidity(m, from_samples({0.0, 1.0, 2.0, 3.0}), Policy::constant(0.0), xs, opt),
                  NonconvergenceError);
}

TEST_CASE("law-free coefficients ignore the frozen flow") {
  auto m = poisson(2.0);
  m.nu_b = MarkMeasure::point(0.7, 1.0);
  auto g = TimeGrid::uniform(0, 1, 16);
  auto xs = simulate_midprice(m, 1.0, g, 1, 1);
  auto noise = generate_noise(m, 0, 1, 4, purpose::pinned, 200);
  std::vector<double> q0(200, 1.0);
  std::vector<EmpiricalMeasure> f1(g.size(), EmpiricalMeasure::dirac(0.0));
  std::vector<EmpiricalMeasure> f2(g.size(), from_samples({5.0, 9.0}));
  auto a = simulate_pinned(m, q0, Policy::constant(0.0), xs, noise, f1, g);
  auto b = simulate_pinned(m, q0, Policy::constant(0.0), xs, noise, f2, g);
  for (std::size_t i = 0; i < 200; ++i) {
    const auto va = a.q_paths[i].values(), vb = b.q_paths[i].values();
    CHECK(std::equal(va.begin(), va.end(), vb.begin(), vb.end()));
  }
}

TEST_CASE("results do not depend on the thread count") {
  auto m = meanfield(3.0);
  auto opt = options(1.0, 16, 300, 8);
  auto xs = simulate_midprice(m, 1.0, opt.grid, 1, 1);
  auto a = simulate_liquidity(m, from_samples({0.0, 2.0}), Policy::constant(0.0), xs, opt);
  opt.threads = 3;
  auto b = simulate_liquidity(m, from_samples({0.0, 2.0}), Policy::constant(0.0), xs, opt);
  for (std::size_t i = 0; i < 300; ++i) CHECK(a.q_paths[i].back() == b.q_paths[i].back());
  CHECK(a.meta.gap_history == b.meta.gap_history);
}

TEST_CASE("flow property") {
  auto det = flat_midprice();
  det.b = [](double) { return 0.1; };
  auto g0 = flow_property_check(det, Policy::constant(0.0), 0.0, 0.37, 1.0, 1.0, from_samples({1.0, 2.0}), 16, 50, 1);
  CHECK(g0.gap_q == 0.0);
  CHECK(g0.gap_law == 0.0);

  auto m = meanfield(4.0);
  // mean reversion towards the law mean on top of the compensator
  m.a = [m](double x, double q, const LawStats& mu, double l) {
    return 1.5 * (mu.mean - q) + m.lambda(q, mu) * m.nu_s.integrate([&](double z) { return m.h(x, q, l, z); });
  };
  double prev = 1e300;
  for (std::size_t steps : {8u, 16u, 32u, 64u}) {
    auto g = flow_property_check(m, Policy::constant(0.0), 0.0, 0.37, 1.0, 1.0, from_samples({0.0, 1.0, 2.0}),
                                 steps, 2048, 11);
    CHECK(g.gap_law <= g.gap_q + 1e-15);
    CHECK(g.gap_q < prev);
    prev = g.gap_q;
  }
}

TEST_CASE("policies clip to the admissible range") {
  CHECK(Policy::constant(-1.0)(0, 0, 0) == 0.0);
  CHECK(Policy::affine(1.0, -0.5, 0.8)(0, 0, 0) == 0.8);
  CHECK(Policy::affine(1.0, -0.5)(0, 0, 1.0) == 0.5);
  auto p = Policy::grid({0.0, 1.0}, {0.0, 2.0}, {0.1, 0.2, 0.3, 0.4});
  CHECK(p(0, 0.9, 1.9) == 0.4);
  CHECK(p(0, 0.1, 0.4) == 0.1);
  CHECK_THROWS_AS(Policy::grid({0.0}, {0.0}, {1.0, 2.0}), DomainError);
}

TEST_CASE("coefficient contract checks") {
  auto m = poisson(2.0);
  CHECK_NOTHROW(check_coefficients(m, 1));
  m.lipschitz = 2.0;
  CHECK_THROWS_AS(check_coefficients(m, 1), ModelError);
  m.lipschitz = 0.0;
  m.lambda_max = 1.0;
  CHECK_THROWS_AS(check_coefficients(m, 1), ModelError);
}

TEST_CASE("ensemble files round trip") {
  auto m = meanfield(3.0);
  auto opt = options(1.0, 8, 40, 5);
  auto xs = simulate_midprice(m, 1.0, opt.grid, 1, 1);
  auto ens = simulate_liquidity(m, from_samples({0.0, 2.0}), Policy::constant(0.0), xs, opt);
  const std::string path = "test_roundtrip.lobmfens";
  write_ensemble(path, ens, R"({"preset":"test"})");
  auto back = read_ensemble(path);
  const auto& e = back.ensemble;
  CHECK(back.params_json.find("preset") != std::string::npos);
  CHECK(e.grid.nodes == ens.grid.nodes);
  CHECK(e.meta.seed == ens.meta.seed);
  CHECK(e.meta.gap_history == ens.meta.gap_history);
  REQUIRE(e.particles() == ens.particles());
  for (std::size_t i = 0; i < ens.particles(); ++i) {
    CHECK(same_path(e.q_paths[i], ens.q_paths[i]));
    CHECK(same_path(e.k_paths[i], ens.k_paths[i]));
  }
  CHECK(e.x_paths.size() == ens.x_paths.size());
  for (std::size_t k = 0; k < ens.law_flow.size(); ++k) CHECK(e.law_flow[k] == ens.law_flow[k]);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_ensemble("does-not-exist.lobmfens"), DomainError);
}
