#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lobmf {

/// Uniformly weighted atoms on the real line, kept sorted ascending.
///
/// This is the only representation of a probability law used in the
/// library: particle ensembles produce one per time node, and every
/// mean-field coupling reads moments or kernel integrals from it.
class EmpiricalMeasure {
 public:
  /// Sorts a copy of `samples`. Throws DomainError when empty or non-finite.
  explicit EmpiricalMeasure(std::vector<double> samples);

  static EmpiricalMeasure dirac(double x) { return EmpiricalMeasure({x}); }

  std::span<const double> atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  double weight() const noexcept { return 1.0 / static_cast<double>(atoms_.size()); }

  double mean() const noexcept { return mean_; }
  double second_moment() const noexcept { return second_moment_; }
  double variance() const noexcept;
  double stddev() const noexcept;

  /// Left-continuous quantile function F^{-1}(u) for u in (0,1].
  double quantile(double u) const;

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (double a : atoms_) acc += f(a);
    return acc / static_cast<double>(atoms_.size());
  }

  EmpiricalMeasure shifted(double c) const;

  friend bool operator==(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    return a.atoms_ == b.atoms_;
  }

 private:
  std::vector<double> atoms_;
  double mean_ = 0.0;
  double second_moment_ = 0.0;
};

EmpiricalMeasure from_samples(std::vector<double> xs);

/// W_p between two empirical measures, p in {1, 2}.
///
/// Uses the quantile coupling: both quantile functions are step functions,
/// so the integral over (0,1) is summed exactly over the merged breakpoints
/// i/n and j/m. Throws DomainError for any other order.
double wasserstein(int p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

namespace purpose {
inline constexpr std::uint64_t midprice = 1;
inline constexpr std::uint64_t liquidity = 2;
inline constexpr std::uint64_t initial_law = 3;
inline constexpr std::uint64_t continuation = 4;
inline constexpr std::uint64_t continuation_midprice = 5;
inline constexpr std::uint64_t pinned = 6;
inline constexpr std::uint64_t test = 99;
}  // namespace purpose

/// Deterministic random stream keyed by (master seed, purpose, particle,
/// iteration). Equal keys give equal sequences; distinct keys are mixed
/// through splitmix64 before seeding the engine.
///
/// The variate transforms are written out here rather than taken from
/// <random> distributions, whose output is implementation-defined; the
/// engine itself (mt19937_64) is fully specified by the standard.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t purpose_tag, std::uint64_t particle,
            std::uint64_t iteration);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double normal();
  double exponential(double rate);
  /// Index drawn from unnormalised nonnegative weights.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

RngStream stream(std::uint64_t master_seed, std::uint64_t purpose_tag, std::uint64_t particle,
                 std::uint64_t iteration);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace lobmf
