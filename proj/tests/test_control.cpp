#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lobmf/control.hpp"
#include "lobmf/errors.hpp"
#include "lobmf/oracles.hpp"
#include "lobmf/presets.hpp"

using namespace lobmf;

namespace {

ValueConfig small(std::size_t P, std::size_t steps = 32, std::uint64_t seed = 3) {
  ValueConfig c;
  c.particles = P;
  c.reference_particles = 512;
  c.steps = steps;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("discounted integral of a linear reward") {
  for (double rho : {1e-6, 0.3, 2.0}) {
    for (auto [t0, t1] : {std::pair{0.0, 1e-5}, std::pair{0.2, 0.9}, std::pair{1.0, 4.0}}) {
      const double L0 = 1.3, L1 = -0.4;
      double ref = 0.0;
      const int n = 20000;
      for (int k = 0; k < n; ++k) {  // midpoint rule
        const double t = t0 + (t1 - t0) * (k + 0.5) / n;
        ref += std::exp(-rho * t) * (L0 + (L1 - L0) * (t - t0) / (t1 - t0));
      }
      ref *= (t1 - t0) / n;
      CHECK(discounted_linear_integral(rho, t0, t1, L0, L1) == doctest::Approx(ref).epsilon(1e-8));
    }
  }
  CHECK(discounted_linear_integral(1.0, 0.5, 0.5, 1.0, 1.0) == 0.0);
}

TEST_CASE("deterministic reward integrates to its geometric value") {
  auto p = make_preset("degenerate-hjb");
  const double T = p.reward.horizon, rho = p.model.rho;
  for (double l : {0.0, 0.25, 0.5}) {
    auto e = evaluate_policy(p.model, p.reward, Policy::constant(l), 1.0, 1.0, p.q0_law, small(64));
    const double exact = (1.0 + l - l * l) * (1.0 - std::exp(-rho * T)) / rho;
    CHECK(e.value == doctest::Approx(exact).epsilon(1e-12));
    CHECK(std::abs(e.value - (1.0 + l - l * l) / rho) <= e.tail_bound * (1.0 + 1e-9));
    CHECK(e.se == 0.0);
    CHECK(e.batch_means.size() >= 30);
  }
}

TEST_CASE("zero reward gives a zero estimate") {
  auto p = make_preset("full-reflection");
  auto e = evaluate_policy(p.model, p.reward, Policy::constant(0.3), 1.0, 0.0, p.q0_law, small(256));
  CHECK(e.value == 0.0);
  CHECK(e.se == 0.0);
}

TEST_CASE("buy-only value matches the compound Poisson expansion") {
  ModelCoefficients m;
  m.b = [](double) { return 0.0; };
  m.sigma = [](double) { return 0.0; };
  m.c = [](double, double, double) { return 0.0; };
  m.h = [](double, double, double l, double z) { return l * z; };
  m.lambda = [](double, const LawStats&) { return 1.0; };
  m.lambda_max = 1.0;
  m.nu_s = MarkMeasure::point(1.0, 1.0);
  m.nu_b = MarkMeasure::point(1.2, 1.0);
  m.law_dependent = false;
  m.rho = 0.7;
  auto r = [](double q) { return q / (1.0 + q); };
  RewardSpec reward;
  reward.running = [r](double, double q, const LawStats&, double) { return r(q); };
  reward.horizon = 1.5;
  // l = 0 switches the sells off; the drift a = lambda * int h vanishes with it
  auto e = evaluate_policy(m, reward, Policy::constant(0.0), 1.0, 3.0, EmpiricalMeasure::dirac(3.0), small(16384));
  const double exact = oracle::buy_only_value(3.0, 1.2, 0.7, 1.5, 12, r);
  CHECK(std::abs(e.value - exact) <= 3.0 * e.se);
  CHECK(e.se > 0.0);
}

TEST_CASE("policy search over a constant family") {
  auto p = make_preset("degenerate-hjb");
  const auto family = constant_family({0.0, 0.25, 0.5, 0.75});
  auto best = search_policy(p.model, p.reward, family, 1.0, 1.0, p.q0_law, small(32));
  CHECK(best.policy.level == 0.5);
  REQUIRE(best.family_values.size() == 4);
  CHECK(best.value == *std::max_element(best.family_values.begin(), best.family_values.end()));

  auto q = make_preset("poisson-dpp");
  auto cfg = small(1024);
  auto one = search_policy(q.model, q.reward, {Policy::constant(0.25)}, 1.0, 2.0, q.q0_law, cfg);
  auto direct = evaluate_policy(q.model, q.reward, Policy::constant(0.25), 1.0, 2.0, q.q0_law, cfg);
  CHECK(one.value == direct.value);
  CHECK(one.se == direct.se);
  auto wider = search_policy(q.model, q.reward, constant_family({0.25, 0.1, 0.6}), 1.0, 2.0, q.q0_law, cfg);
  CHECK(wider.value >= one.value);
  CHECK(wider.value >= 0.0);
  CHECK_THROWS_AS(search_policy(q.model, q.reward, {}, 1.0, 2.0, q.q0_law, cfg), DomainError);
}

TEST_CASE("doubling the horizon moves the value by at most the tail") {
  auto p = make_preset("poisson-dpp", {{"horizon", 4.0}});
  auto cfg = small(2048, 64);
  auto a = evaluate_policy(p.model, p.reward, Policy::constant(0.5), 1.0, 2.0, p.q0_law, cfg);
  auto r2 = p.reward;
  r2.horizon = 8.0;
  cfg.steps = 128;
  auto b = evaluate_policy(p.model, r2, Policy::constant(0.5), 1.0, 2.0, p.q0_law, cfg);
  CHECK(std::abs(b.value - a.value) <= a.tail_bound + 3.0 * paired_se(a, b));
  CHECK(b.value >= a.value);
}

TEST_CASE("dynamic programming on the deterministic config") {
  auto p = make_preset("deterministic");
  DppConfig cfg;
  cfg.value = small(16, 64);
  cfg.bin_particles = 16;
  cfg.x_bins = {0.5, 1.0, 1.5, 2.0, 2.5};
  for (int k = 0; k <= 10; ++k) cfg.q_bins.push_back(k);
  double prev = 1e300;
  for (double ts : {2.0, 1.0, 0.25}) {
    cfg.t_split = ts;
    auto r = dpp_residual(p.model, p.reward, constant_family(p.levels), 1.0, 1.0, p.q0_law, cfg);
    CHECK(std::abs(r.gap) <= r.tail_bound);
    CHECK(r.tail_bound <= 1e-6);
    CHECK(std::abs(r.gap) <= prev);
    CHECK(r.best_first_leg == 2);
    prev = std::abs(r.gap);
  }
}

TEST_CASE("dynamic programming on the Poisson config") {
  auto p = make_preset("poisson-dpp", {{"horizon", 6.0}});
  DppConfig cfg;
  cfg.value = small(2048, 48);
  cfg.bin_particles = 1024;
  cfg.t_split = 0.5;
  cfg.x_bins = {1.0};
  for (int k = 0; k < 50; ++k) cfg.q_bins.push_back(k);
  auto r = dpp_residual(p.model, p.reward, constant_family({0.25, 0.5}), 1.0, 2.0, p.q0_law, cfg);
  CHECK(std::abs(r.gap) <= 3.0 * r.se + r.tail_bound);
  CHECK(r.se > 0.0);
  CHECK(r.bins_used >= 2);
}

TEST_CASE("boundary checks") {
  auto p = make_preset("boundary");
  auto cfg = small(2048, 64);
  auto rep = boundary_checks(p.model, p.reward, constant_family({0.25, 0.5}), {0.5, 1.0}, p.q0_law,
                             {0.2, 0.1, 0.05}, cfg);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& row : rep.rows) {
    INFO(row.slopes[0], " ", row.slopes[1], " ", row.slopes[2], " extrap ", row.extrapolated, " se ",
         row.extrapolated_se, " slope se ", row.slope_se[2]);
    CHECK(row.v0 == 0.0);
    CHECK(row.zero_ok);
    CHECK(row.slopes.size() == 3);
    CHECK(row.slope_ok);
  }
  CHECK(rep.pass);
  CHECK_THROWS_AS(boundary_checks(p.model, p.reward, constant_family({0.5}), {1.0}, p.q0_law, {0.1}, cfg),
                  DomainError);
}

TEST_CASE("value properties on a small grid") {
  auto p = make_preset("meanfield-diffusion");
  auto cfg = small(1024, 32);
  auto t = value_table(p.model, p.reward, constant_family({0.25, 0.5}), {0.6, 1.0, 1.4}, {2.0, 4.0, 6.0}, p.q0_law,
                       cfg);
  CHECK(t.cells.size() == 9);
  auto rep = value_properties(p.model, p.reward, t);
  CHECK(rep.lipschitz_constant > 0.0);
  CHECK(rep.worst_q_monotone > 0.0);
  CHECK(rep.worst_x_monotone > 0.0);
  CHECK(rep.pass);
}

TEST_CASE("utility export") {
  auto p = make_preset("boundary");
  auto cfg = small(512, 32);
  auto u = export_utility(p.model, p.reward, constant_family({0.5}), {0.5, 1.0}, {0.0, 1.0, 2.0}, cfg);
  CHECK(u.table.at(0, 0).value == 0.0);
  CHECK(u.table.at(1, 0).value == 0.0);
  CHECK(u.nondecreasing_in_x);
  CHECK(u.dq.size() == 4);
  CHECK(u.d2q.size() == 2);
}
