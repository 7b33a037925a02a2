#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lobmf/dynamics.hpp"

namespace lobmf {

/// Running reward and truncation data for the discounted value.
struct RewardSpec {
  /// Optional replacement of the default reward
  /// L = lambda(q, mu) * int h(x,q,l,z) c(x,q,l) nu_s(dz).
  std::function<double(double x, double q, const LawStats& mu, double l)> running;
  double bound = 1.0;        // declared sup |L| is bound + bound_x * |x| for paths started at x
  double bound_x = 0.0;      // nonzero only when the mid price never moves
  double lipschitz_x = 0.0;  // declared Lipschitz constant of L in x
  double horizon = 10.0;     // truncation T_max
  double tolerance = 1e-3;   // reporting tolerance for the truncation tail

  double tail_bound(double rho, double x = 0.0) const;
};

double running_reward(const ModelCoefficients& m, const RewardSpec& r, double x, double q, const LawStats& mu,
                      double l);

/// int_{t0}^{t1} e^{-rho t} (L0 + (L1 - L0)(t - t0)/(t1 - t0)) dt.
double discounted_linear_integral(double rho, double t0, double t1, double L0, double L1);

struct ValueConfig {
  std::size_t steps = 128;                // grid steps over the horizon
  std::size_t particles = 8192;           // pinned particles per evaluation
  std::size_t reference_particles = 2048; // particles defining the law flow
  std::uint64_t seed = 1;
  double picard_tol = 1e-3;
  int max_picard = 25;
  std::size_t batches = 32;
  unsigned threads = 1;
};

struct ValueEstimate {
  double x = 0.0;
  double q = 0.0;
  std::string law;  // short description of the initial law
  double value = 0.0;
  double se = 0.0;
  Policy policy;
  double tail_bound = 0.0;
  std::vector<double> batch_means;
  std::vector<double> family_values;  // search only: value of each family member
  std::vector<double> family_se;
  std::size_t particles = 0;
  std::uint64_t seed = 0;
  int picard_iterations = 0;
};

/// Standard error of the paired difference a - b from batch means.
double paired_se(const ValueEstimate& a, const ValueEstimate& b);

/// Monte Carlo value of a feedback policy started at (x, q) with the law of
/// the reference system started from q0_law. Throws NonconvergenceError from
/// the law iteration.
ValueEstimate evaluate_policy(const ModelCoefficients& m, const RewardSpec& reward, const Policy& policy, double x,
                              double q, const EmpiricalMeasure& q0_law, const ValueConfig& cfg);

/// Best member of a finite family, all members evaluated with the same seeds.
ValueEstimate search_policy(const ModelCoefficients& m, const RewardSpec& reward, const std::vector<Policy>& family,
                            double x, double q, const EmpiricalMeasure& q0_law, const ValueConfig& cfg);

/// Constant policies on a grid of levels.
std::vector<Policy> constant_family(const std::vector<double>& levels);

struct DppConfig {
  ValueConfig value;
  double t_split = 0.5;
  std::vector<double> x_bins;  // terminal states are snapped to this grid
  std::vector<double> q_bins;
  std::size_t bin_particles = 2048;
};

struct DppResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
  double se = 0.0;
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  double tail_bound = 0.0;
  std::size_t bins_used = 0;
  std::size_t best_first_leg = 0;  // family index maximising the composed side
};

/// Composes the value at the split time with the value of the search started
/// from the binned terminal states, and compares with the direct search.
DppResult dpp_residual(const ModelCoefficients& m, const RewardSpec& reward, const std::vector<Policy>& family,
                       double x, double q, const EmpiricalMeasure& q0_law, const DppConfig& cfg);

struct BoundaryRow {
  double x = 0.0;
  double v0 = 0.0;
  double v0_se = 0.0;
  std::vector<double> deltas;
  std::vector<double> slopes;     // (v(x, dq) - v(x, 0)) / dq
  std::vector<double> slope_se;
  double extrapolated = 0.0;      // slopes extrapolated to dq -> 0 through all steps
  double extrapolated_se = 0.0;
  bool zero_ok = false;
  bool slope_ok = false;
};

struct BoundaryReport {
  std::vector<BoundaryRow> rows;
  bool pass = false;
};

BoundaryReport boundary_checks(const ModelCoefficients& m, const RewardSpec& reward, const std::vector<Policy>& family,
                               const std::vector<double>& x_grid, const EmpiricalMeasure& q0_law,
                               const std::vector<double>& deltas, const ValueConfig& cfg);

struct ValueTable {
  std::vector<double> x_grid;
  std::vector<double> q_grid;
  std::vector<ValueEstimate> cells;  // x-major
  const ValueEstimate& at(std::size_t i, std::size_t j) const { return cells[i * q_grid.size() + j]; }
};

/// search_policy at every (x, q) of the grid with the law fixed to q0_law.
ValueTable value_table(const ModelCoefficients& m, const RewardSpec& reward, const std::vector<Policy>& family,
                       const std::vector<double>& x_grid, const std::vector<double>& q_grid,
                       const EmpiricalMeasure& q0_law, const ValueConfig& cfg);

struct PropertyReport {
  double worst_q_monotone = 0.0;  // min over pairs of (v(q1) - v(q2)) / se, q1 < q2
  double worst_x_monotone = 0.0;  // min over pairs of (v(x2) - v(x1)) / se, x1 < x2
  double worst_lipschitz = 0.0;   // max of (|dv| - C |dx|) / se
  double lipschitz_constant = 0.0;
  std::size_t violations = 0;
  bool pass = false;
};

/// Paired checks on a value table: decreasing in q, non-decreasing in x and
/// |v(x) - v(x')| <= C |x - x'| with C = L_x / (rho - L - L^2/2).
PropertyReport value_properties(const ModelCoefficients& m, const RewardSpec& reward, const ValueTable& t);

struct UtilityTable {
  ValueTable table;
  std::vector<double> dq;       // first differences in q (x-major, (nq - 1) per x)
  std::vector<double> d2q;      // second differences in q (x-major, (nq - 2) per x)
  std::vector<double> d2q_se;
  bool decreasing_in_q = false;
  bool convex_in_q = false;     // all second differences >= -3 se
  bool nondecreasing_in_x = false;
};

/// U(x, q) = v(x, q, delta_q) on a grid.
UtilityTable export_utility(const ModelCoefficients& m, const RewardSpec& reward, const std::vector<Policy>& family,
                            const std::vector<double>& x_grid, const std::vector<double>& q_grid,
                            const ValueConfig& cfg);

}  // namespace lobmf
