#include "lobmf/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>

#include "lobmf/errors.hpp"

namespace lobmf::oracle {

std::vector<double> interleave(const CadlagPath& k) {
  std::vector<double> out{k.front()};
  for (std::size_t i = 1; i < k.size(); ++i) {
    out.push_back(k.left_limit(i));
    out.push_back(k.values()[i]);
  }
  return out;
}

std::vector<double> min_integer_regulator(const CadlagPath& y, int cap) {
  const auto yi = interleave(y);
  const std::size_t L = yi.size();
  std::vector<double> best(L, std::numeric_limits<double>::infinity());
  std::vector<int> cur(L, 0);
  bool any = false;
  // depth-first enumeration of nondecreasing integer sequences
  auto rec = [&](auto&& self, std::size_t idx, int lo) -> void {
    if (idx == L) {
      any = true;
      for (std::size_t i = 0; i < L; ++i) best[i] = std::min(best[i], static_cast<double>(cur[i]));
      return;
    }
    for (int v = lo; v <= cap; ++v) {
      if (yi[idx] + v < 0.0) continue;
      cur[idx] = v;
      self(self, idx + 1, v);
    }
  };
  if (yi[0] < 0.0) throw DomainError("oracle: path starts below zero");
  cur[0] = 0;
  rec(rec, 1, 0);
  if (!any) throw DomainError("oracle: cap too small for a feasible regulator");
  return best;
}

double grid_argmax(const std::function<double(double)>& profit, double hi, int points) {
  double best_s = 0.0, best_v = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < points; ++k) {
    const double s = hi * k / (points - 1);
    const double v = profit(s);
    if (v > best_v) {
      best_v = v;
      best_s = s;
    }
  }
  return best_s;
}

double grid_symmetric_equilibrium(const LinearDemand& d, const LinearCost& c, std::size_t n,
                                  int points, int sweeps) {
  double p = 0.0;
  for (int s = 0; s < sweeps; ++s) {
    const double others = p;
    auto prof = [&](double q) {
      const double dem = d.A - d.B * q + (n > 1 ? d.C * others : 0.0);
      const double cost = c.x * q - (n > 1 ? c.y * others : 0.0);
      return dem * (q - cost);
    };
    const double hi = (d.A + d.C * others) / d.B;
    p = grid_argmax(prof, hi, points);
  }
  return p;
}

double grid_representative_fixed_point(const LinearParams& q, int points, int sweeps) {
  double m = 0.0;
  for (int s = 0; s < sweeps; ++s) {
    const double hi = (q.a + q.c * m) / q.b;
    m = grid_argmax([&](double p) { return representative_profit(q, p, m); }, hi, points);
  }
  return m;
}

double buy_only_value(double q0, double beta, double rho, double T, int k_max,
                      const std::function<double(double)>& r) {
  const double s = rho + beta;
  double v = 0.0;
  for (int k = 0; k <= k_max; ++k) {
    // int_0^T e^{-rho t} P(N_t = k) dt
    const double occ = std::pow(beta, k) / std::pow(s, k + 1) *
                       boost::math::gamma_p(static_cast<double>(k + 1), s * T);
    v += occ * r(std::max(q0 - k, 0.0));
  }
  return v;
}

}  // namespace lobmf::oracle
