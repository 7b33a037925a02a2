#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lobmf/errors.hpp"
#include "lobmf/measures.hpp"

using namespace lobmf;

namespace {

// Brute force over all permutation couplings for equal-size measures.
double permutation_w1(std::vector<double> a, std::vector<double> b) {
  std::sort(b.begin(), b.end());
  double best = 1e300;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    best = std::min(best, s / static_cast<double>(a.size()));
  } while (std::next_permutation(b.begin(), b.end()));
  return best;
}

// KS statistic of a sample against U(0,1).
double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace

TEST_CASE("from_samples sorts and exposes moments") {
  auto m = from_samples({3, 1, 2});
  CHECK(std::vector<double>(m.atoms().begin(), m.atoms().end()) == std::vector<double>{1, 2, 3});
  auto single = from_samples({5});
  CHECK(single.mean() == 5.0);
  CHECK(from_samples({0, 0, 4}).mean() == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(from_samples({}), DomainError);
}

TEST_CASE("wasserstein worked values") {
  CHECK(wasserstein(1, EmpiricalMeasure::dirac(0), EmpiricalMeasure::dirac(1)) == 1.0);
  CHECK(wasserstein(1, from_samples({0, 2}), from_samples({1, 1})) == 1.0);
  CHECK(permutation_w1({0, 2}, {1, 1}) == 1.0);
  auto mu = from_samples({0.3, -1.0, 2.5});
  CHECK(wasserstein(2, mu, mu) == 0.0);
  CHECK_THROWS_AS(wasserstein(3, mu, mu), DomainError);
}

TEST_CASE("wasserstein unequal sizes uses the quantile coupling") {
  // {0,1} vs {0,0.5,1}: quantiles differ on (1/3,1/2) by 0.5 and on (1/2,2/3) by 0.5
  CHECK(wasserstein(1, from_samples({0, 1}), from_samples({0, 0.5, 1})) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(wasserstein(2, from_samples({0, 1}), from_samples({0, 0.5, 1})) ==
        doctest::Approx(std::sqrt(0.25 / 3.0)).epsilon(1e-14));
}

TEST_CASE("wasserstein matches permutation brute force for equal sizes") {
  RngStream rng(11, purpose::test, 0, 0);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    CHECK(wasserstein(1, from_samples(a), from_samples(b)) ==
          doctest::Approx(permutation_w1(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("wasserstein metric properties on random triples") {
  RngStream rng(12, purpose::test, 0, 0);
  for (int trial = 0; trial < 200; ++trial) {
    auto draw = [&] {
      std::vector<double> v(1 + rng.next_u64() % 9);
      for (auto& x : v) x = 3.0 * rng.normal();
      return from_samples(v);
    };
    auto a = draw(), b = draw(), c = draw();
    for (int p : {1, 2}) {
      CHECK(wasserstein(p, a, c) <= wasserstein(p, a, b) + wasserstein(p, b, c) + 1e-12);
      CHECK(wasserstein(p, a, b) == doctest::Approx(wasserstein(p, b, a)).epsilon(1e-14));
      const double shift = rng.normal();
      CHECK(wasserstein(p, a.shifted(shift), b.shifted(shift)) ==
            doctest::Approx(wasserstein(p, a, b)).epsilon(1e-12));
    }
    CHECK(wasserstein(1, a, b) <= wasserstein(2, a, b) + 1e-12);
  }
}

TEST_CASE("streams are deterministic and keyed") {
  auto s1 = stream(42, purpose::liquidity, 3, 1);
  auto s2 = stream(42, purpose::liquidity, 3, 1);
  for (int i = 0; i < 100; ++i) CHECK(s1.uniform() == s2.uniform());
  auto s3 = stream(42, purpose::liquidity, 4, 1);
  auto s4 = stream(42, purpose::liquidity, 3, 1);
  CHECK(s3.next_u64() != s4.next_u64());
}

TEST_CASE("neighbouring particle streams look independent") {
  auto a = stream(2024, purpose::liquidity, 0, 0);
  auto b = stream(2024, purpose::liquidity, 1, 0);
  std::vector<double> d(10000);
  for (auto& v : d) {
    const double u = a.uniform(), w = b.uniform();
    v = u - w - std::floor(u - w);
  }
  // 1% critical value of the one-sample KS statistic, large-n approximation
  CHECK(ks_uniform(d) < 1.628 / std::sqrt(10000.0));
  std::vector<double> u(10000);
  auto c = stream(2024, purpose::liquidity, 0, 0);
  for (auto& v : u) v = c.uniform();
  CHECK(ks_uniform(u) < 1.628 / std::sqrt(10000.0));
}

TEST_CASE("exponential and normal draws have the right moments") {
  auto s = stream(5, purpose::test, 0, 0);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = s.exponential(2.0);
    sum += e;
    sum2 += e * e;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  CHECK(std::abs(mean - 0.5) < 3.0 * se);
  double zs = 0.0, zs2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    zs += z;
    zs2 += z * z;
  }
  CHECK(std::abs(zs / n) < 3.0 / std::sqrt(n));
  CHECK(std::abs(zs2 / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("categorical draws follow the weights") {
  auto s = stream(9, purpose::test, 0, 0);
  std::vector<double> w{1.0, 0.0, 3.0};
  std::vector<int> counts(3, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[s.categorical(w)];
  CHECK(counts[1] == 0);
  const double p = 0.25;
  CHECK(std::abs(counts[0] / double(n) - p) < 3.0 * std::sqrt(p * (1 - p) / n));
  CHECK_THROWS_AS(s.categorical(std::vector<double>{0.0, 0.0}), DomainError);
}
