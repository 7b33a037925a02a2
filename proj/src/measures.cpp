#include "lobmf/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lobmf/errors.hpp"

namespace lobmf {

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> samples) : atoms_(std::move(samples)) {
  if (atoms_.empty()) throw DomainError("empirical measure needs at least one atom");
  for (double a : atoms_) {
    if (!std::isfinite(a)) throw DomainError("empirical measure atoms must be finite");
  }
  std::sort(atoms_.begin(), atoms_.end());
  double s1 = 0.0, s2 = 0.0;
  for (double a : atoms_) {
    s1 += a;
    s2 += a * a;
  }
  const double n = static_cast<double>(atoms_.size());
  mean_ = s1 / n;
  second_moment_ = s2 / n;
}

double EmpiricalMeasure::variance() const noexcept {
  double acc = 0.0;
  for (double a : atoms_) acc += (a - mean_) * (a - mean_);
  return acc / static_cast<double>(atoms_.size());
}

double EmpiricalMeasure::stddev() const noexcept { return std::sqrt(variance()); }

double EmpiricalMeasure::quantile(double u) const {
  if (!(u > 0.0 && u <= 1.0)) throw DomainError("quantile level must lie in (0, 1]");
  const double n = static_cast<double>(atoms_.size());
  auto idx = static_cast<std::size_t>(std::ceil(u * n)) - 1;
  return atoms_[std::min(idx, atoms_.size() - 1)];
}

EmpiricalMeasure EmpiricalMeasure::shifted(double c) const {
  std::vector<double> out(atoms_);
  for (double& a : out) a += c;
  return EmpiricalMeasure(std::move(out));
}

EmpiricalMeasure from_samples(std::vector<double> xs) { return EmpiricalMeasure(std::move(xs)); }

double wasserstein(int p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (p != 1 && p != 2) throw DomainError("wasserstein order must be 1 or 2");
  const auto a = mu.atoms();
  const auto b = nu.atoms();
  const std::size_t n = a.size(), m = b.size();
  // Walk the merged breakpoints i/n and j/m; compare i*m against j*n so that
  // coincident breakpoints are detected without rounding.
  std::size_t i = 0, j = 0;
  std::uint64_t prev = 0;  // in units of 1/(n*m)
  double acc = 0.0;
  while (i < n && j < m) {
    const std::uint64_t next_a = static_cast<std::uint64_t>(i + 1) * m;
    const std::uint64_t next_b = static_cast<std::uint64_t>(j + 1) * n;
    const std::uint64_t next = std::min(next_a, next_b);
    const double w = static_cast<double>(next - prev);
    const double d = std::abs(a[i] - b[j]);
    acc += w * (p == 1 ? d : d * d);
    prev = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  acc /= static_cast<double>(n) * static_cast<double>(m);
  return p == 1 ? acc : std::sqrt(acc);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t purpose_tag, std::uint64_t particle,
                     std::uint64_t iteration) {
  std::uint64_t h = splitmix64(master_seed);
  h = splitmix64(h ^ purpose_tag);
  h = splitmix64(h ^ particle);
  h = splitmix64(h ^ iteration);
  engine_.seed(h);
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) throw DomainError("exponential rate must be positive");
  return -std::log1p(-uniform()) / rate;
}

std::size_t RngStream::categorical(std::span<const double> weights) {
  if (weights.empty()) throw DomainError("categorical draw needs weights");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw DomainError("categorical weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("categorical weights sum to zero");
  const double target = uniform() * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (target < acc) return k;
  }
  // rounding: fall back to the last positive weight
  for (std::size_t k = weights.size(); k-- > 0;) {
    if (weights[k] > 0.0) return k;
  }
  return weights.size() - 1;
}

RngStream stream(std::uint64_t master_seed, std::uint64_t purpose_tag, std::uint64_t particle,
                 std::uint64_t iteration) {
  return RngStream(master_seed, purpose_tag, particle, iteration);
}

}  // namespace lobmf
