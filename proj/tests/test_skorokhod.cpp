#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lobmf/errors.hpp"
#include "lobmf/measures.hpp"
#include "lobmf/oracles.hpp"
#include "lobmf/skorokhod.hpp"

using namespace lobmf;

namespace {

std::vector<double> uniform_grid(int m, double T = 1.0) {
  std::vector<double> g(m + 1);
  for (int k = 0; k <= m; ++k) g[k] = T * k / m;
  return g;
}

}  // namespace

TEST_CASE("increasing path needs no reflection") {
  auto g = uniform_grid(10);
  CadlagPath y(g, g);
  auto r = solve_dsp(y);
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(r.x_path.values()[k] == g[k]);
    CHECK(r.k_path.values()[k] == 0.0);
  }
}

TEST_CASE("decreasing path is pinned at zero") {
  auto g = uniform_grid(10);
  std::vector<double> v(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) v[k] = -g[k];
  auto r = solve_dsp(CadlagPath(g, v));
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(r.x_path.values()[k] == 0.0);
    CHECK(r.k_path.values()[k] == doctest::Approx(g[k]).epsilon(1e-15));
  }
  CHECK(flatness_defect(r) == 0.0);
}

TEST_CASE("jump below zero is cut by the regulator") {
  auto g = uniform_grid(4);
  std::vector<double> v{1, 1, 1, 1, -2};
  auto r = solve_dsp(CadlagPath(g, v, {{1.0, -3.0}}));
  CHECK(r.x_path.left_limit(4) == 1.0);
  CHECK(r.k_path.jump_at(4) == 2.0);
  CHECK(r.x_path.back() == 0.0);
  CHECK(r.k_path.left_limit(4) == 0.0);
}

TEST_CASE("domain errors") {
  auto g = uniform_grid(2);
  CHECK_THROWS_AS(solve_dsp(CadlagPath(g, {-0.1, 0, 0})), DomainError);
  CHECK_THROWS_AS(CadlagPath(g, {0, 0}), DomainError);
  CHECK_THROWS_AS(CadlagPath(g, {0, 0, 0}, {{0.0, 1.0}}), DomainError);
  CHECK_THROWS_AS(CadlagPath(g, {0, 0, 0}, {{0.25, 1.0}}), DomainError);
  CHECK_THROWS_AS(lipschitz_check(CadlagPath(g, {0, 0, 0}), CadlagPath(uniform_grid(3), {0, 0, 0, 0})),
                  DomainError);
}

TEST_CASE("evaluate is right-continuous and linear between knots") {
  CadlagPath y({0.0, 1.0, 2.0}, {0.0, 3.0, 1.0}, {{1.0, 2.0}});
  CHECK(y.evaluate(0.5) == doctest::Approx(0.5));
  CHECK(y.evaluate(1.0) == 3.0);
  CHECK(y.evaluate(1.5) == doctest::Approx(2.0));
  CHECK_THROWS_AS(y.evaluate(2.5), DomainError);
}

TEST_CASE("idempotent on nonnegative paths") {
  CadlagPath y({0.0, 0.5, 1.0, 2.0}, {0.2, 1.0, 0.0, 4.0}, {{1.0, -0.5}});
  auto r = solve_dsp(y);
  for (std::size_t k = 0; k < y.size(); ++k) CHECK(r.x_path.values()[k] == y.values()[k]);
  CHECK(r.k_path.back() == 0.0);
  auto again = solve_dsp(r.x_path);
  CHECK(again.k_path.back() == 0.0);
}

TEST_CASE("lipschitz worked examples") {
  auto g = uniform_grid(20);
  std::vector<double> a(g.size()), b(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    a[k] = 0.1 - g[k];
    b[k] = -g[k] + 0.1;
  }
  auto [l0, r0] = lipschitz_check(CadlagPath(g, a), CadlagPath(g, b));
  CHECK(l0 == 0.0);
  CHECK(r0 == 0.0);
  // Y1 = -t needs Y1(0) >= 0: shift both to start at 0 and 0.1
  for (std::size_t k = 0; k < g.size(); ++k) a[k] = -g[k];
  auto [lhs, rhs] = lipschitz_check(CadlagPath(g, a), CadlagPath(g, b));
  CHECK(rhs == doctest::Approx(0.1));
  CHECK(lhs <= 2.0 * 0.1 + 1e-15);
}

TEST_CASE("minimality against brute force on a few small grids") {
  // Exhaustive coverage lives in the acceptance suite.
  for (std::vector<double> v : {std::vector<double>{0, -1, 0, -1, -2}, {1, 0, -1, 0, 1}, {0, 1, -1, -2, 0}}) {
    auto g = uniform_grid(static_cast<int>(v.size()) - 1);
    CadlagPath y(g, v, {{g[2], v[2] - v[1]}});
    auto r = solve_dsp(y);
    auto bf = oracle::min_integer_regulator(y, 6);
    auto kk = oracle::interleave(r.k_path);
    REQUIRE(bf.size() == kk.size());
    for (std::size_t i = 0; i < bf.size(); ++i) CHECK(kk[i] == bf[i]);
  }
}

TEST_CASE("random paths respect the reflection invariants") {
  RngStream rng(77, purpose::test, 0, 0);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = uniform_grid(40);
    std::vector<double> v(g.size());
    std::vector<Jump> jumps;
    v[0] = rng.uniform();
    for (std::size_t k = 1; k < g.size(); ++k) {
      v[k] = v[k - 1] + 0.2 * rng.normal();
      if (rng.uniform() < 0.1) {
        const double j = 2.0 * rng.normal();
        jumps.push_back({g[k], j});
        v[k] += j;
      }
    }
    auto r = solve_dsp(CadlagPath(g, v, jumps));
    CHECK(r.x_path.min_value() >= 0.0);
    CHECK(r.k_path.front() == 0.0);
    for (std::size_t k = 1; k < g.size(); ++k) {
      CHECK(r.k_path.values()[k] >= r.k_path.values()[k - 1]);
      CHECK(r.x_path.values()[k] == doctest::Approx(v[k] + r.k_path.values()[k]).epsilon(1e-12));
    }
    CHECK(flatness_defect(r) == 0.0);
  }
}
