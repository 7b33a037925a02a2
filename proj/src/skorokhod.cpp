#include "lobmf/skorokhod.hpp"

#include <algorithm>
#include <cmath>

#include "lobmf/errors.hpp"

namespace lobmf {

CadlagPath::CadlagPath(std::vector<double> grid, std::vector<double> values, std::vector<Jump> jumps)
    : grid_(std::move(grid)), values_(std::move(values)), jump_(grid_.size(), 0.0) {
  if (grid_.empty()) throw DomainError("path grid is empty");
  if (grid_.size() != values_.size()) throw DomainError("grid and values differ in length");
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    if (!std::isfinite(grid_[k]) || !std::isfinite(values_[k]))
      throw DomainError("path entries must be finite");
    if (k > 0 && !(grid_[k] > grid_[k - 1])) throw DomainError("path grid must be strictly ascending");
  }
  for (const Jump& j : jumps) {
    if (!std::isfinite(j.size)) throw DomainError("jump size must be finite");
    if (!(j.time > grid_.front()) || j.time > grid_.back())
      throw DomainError("jump time outside (t0, tM]");
    auto it = std::lower_bound(grid_.begin(), grid_.end(), j.time);
    if (it == grid_.end() || *it != j.time) throw DomainError("jump time is not a grid point");
    jump_[static_cast<std::size_t>(it - grid_.begin())] += j.size;
  }
}

std::vector<Jump> CadlagPath::jumps() const {
  std::vector<Jump> out;
  for (std::size_t k = 1; k < grid_.size(); ++k) {
    if (jump_[k] != 0.0) out.push_back({grid_[k], jump_[k]});
  }
  return out;
}

double CadlagPath::evaluate(double t) const {
  if (t < grid_.front() || t > grid_.back()) throw DomainError("evaluation time outside path grid");
  auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  const auto k = static_cast<std::size_t>(it - grid_.begin()) - 1;
  if (k + 1 >= grid_.size() || t == grid_[k]) return values_[k];
  const double w = (t - grid_[k]) / (grid_[k + 1] - grid_[k]);
  return values_[k] + w * (left_limit(k + 1) - values_[k]);
}

double CadlagPath::min_value() const {
  double m = values_.front();
  for (std::size_t k = 1; k < values_.size(); ++k) m = std::min({m, values_[k], left_limit(k)});
  return m;
}

double CadlagPath::sup_norm() const {
  double m = std::abs(values_.front());
  for (std::size_t k = 1; k < values_.size(); ++k)
    m = std::max({m, std::abs(values_[k]), std::abs(left_limit(k))});
  return m;
}

ReflectedPair solve_dsp(const CadlagPath& y) {
  const auto grid = y.grid();
  const std::size_t n = grid.size();
  if (y.front() < 0.0) throw DomainError("Skorokhod problem needs y(t0) >= 0");
  std::vector<double> xv(n), kv(n);
  std::vector<Jump> xj, kj;
  double x = y.front(), k = 0.0;
  xv[0] = x;
  kv[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    k += reflect_continuous(x, y.left_limit(i) - y.values()[i - 1]);
    const double dy = y.jump_at(i);
    if (dy != 0.0) {
      const double x_left = x;
      const double dk = reflect_jump(x, dy);
      k += dk;
      xj.push_back({grid[i], x - x_left});
      if (dk > 0.0) kj.push_back({grid[i], dk});
    }
    xv[i] = x;
    kv[i] = k;
  }
  std::vector<double> g(grid.begin(), grid.end());
  return {CadlagPath(g, std::move(xv), std::move(xj)), CadlagPath(g, std::move(kv), std::move(kj))};
}

std::pair<double, double> lipschitz_check(const CadlagPath& y1, const CadlagPath& y2) {
  const auto g1 = y1.grid();
  const auto g2 = y2.grid();
  if (!std::equal(g1.begin(), g1.end(), g2.begin(), g2.end()))
    throw DomainError("lipschitz_check needs identical grids");
  const auto r1 = solve_dsp(y1);
  const auto r2 = solve_dsp(y2);
  double lhs = std::abs(r1.x_path.front() - r2.x_path.front());
  double rhs = std::abs(y1.front() - y2.front());
  for (std::size_t k = 1; k < g1.size(); ++k) {
    lhs = std::max({lhs, std::abs(r1.x_path.values()[k] - r2.x_path.values()[k]),
                    std::abs(r1.x_path.left_limit(k) - r2.x_path.left_limit(k))});
    rhs = std::max({rhs, std::abs(y1.values()[k] - y2.values()[k]),
                    std::abs(y1.left_limit(k) - y2.left_limit(k))});
  }
  return {lhs, rhs};
}

double flatness_defect(const ReflectedPair& r) {
  double defect = 0.0;
  const auto& x = r.x_path;
  const auto& k = r.k_path;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double dkc = k.left_limit(i) - k.values()[i - 1];
    // left limits are reconstructed by subtracting the jump, so allow rounding
    const double slack = kReflectionTolerance * (1.0 + std::abs(k.values()[i]));
    const double cell_min = std::min(x.values()[i - 1], x.left_limit(i));
    if (dkc > slack && cell_min > kReflectionTolerance) defect += dkc;
  }
  return defect;
}

}  // namespace lobmf
