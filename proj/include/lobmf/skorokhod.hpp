#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace lobmf {

inline constexpr double kReflectionTolerance = 1e-12;

struct Jump {
  double time;
  double size;
};

/// Right-continuous path recorded at knots t_0 < ... < t_M.
///
/// `values[k]` is the right limit at t_k. A jump recorded at t_k makes the
/// left limit values[k] - size. Between knots the continuous part moves
/// linearly from values[k] to the left limit at t_{k+1}, so a path with no
/// jumps is the usual piecewise-linear interpolant.
class CadlagPath {
 public:
  CadlagPath() = default;
  CadlagPath(std::vector<double> grid, std::vector<double> values, std::vector<Jump> jumps = {});

  std::span<const double> grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<Jump> jumps() const;
  std::size_t size() const noexcept { return grid_.size(); }

  double jump_at(std::size_t k) const { return jump_[k]; }
  double left_limit(std::size_t k) const { return values_[k] - jump_[k]; }
  double front() const { return values_.front(); }
  double back() const { return values_.back(); }

  /// Value at time t (right-continuous). Throws DomainError outside [t_0, t_M].
  double evaluate(double t) const;

  double min_value() const;
  /// Largest |value| over knots and left limits.
  double sup_norm() const;

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
  std::vector<double> jump_;
};

struct ReflectedPair {
  CadlagPath x_path;
  CadlagPath k_path;
};

/// Continuous increment dy applied to x >= 0, reflected at zero.
/// Returns the regulator increase.
inline double reflect_continuous(double& x, double dy) {
  x += dy;
  if (x < 0.0) {
    const double dk = -x;
    x = 0.0;
    return dk;
  }
  return 0.0;
}

/// Jump dy applied to the left limit x; the regulator jump is (x + dy)^-.
inline double reflect_jump(double& x, double dy) { return reflect_continuous(x, dy); }

/// Solves the one-sided Skorokhod problem for a grid path.
/// Throws DomainError when y starts below zero.
ReflectedPair solve_dsp(const CadlagPath& y);

/// (sup |Gamma(y1) - Gamma(y2)|, sup |y1 - y2|) over knots and left limits.
/// Throws DomainError unless the two grids coincide.
std::pair<double, double> lipschitz_check(const CadlagPath& y1, const CadlagPath& y2);

/// Sum of continuous regulator increase over cells whose reflected path stays
/// above kReflectionTolerance. Zero for a valid solution.
double flatness_defect(const ReflectedPair& r);

}  // namespace lobmf
