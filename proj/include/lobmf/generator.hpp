#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lobmf/control.hpp"
#include "lobmf/dynamics.hpp"

namespace lobmf {

using ScalarFn = std::function<double(double)>;
using LocalFn = std::function<double(double x, double q)>;

/// g(<mu, psi>) with analytic first derivatives.
struct CylTerm {
  ScalarFn g, dg, psi, dpsi;
};

/// phi(x, q, mu) = f(x, q) + sum_j g_j(<mu, psi_j>).
struct CylindricalFunction {
  LocalFn f, f_x, f_xx, f_q;  // all unset means f = 0
  std::vector<CylTerm> terms;
  std::string name;

  double local(double x, double q) const { return f ? f(x, q) : 0.0; }
  double value(double x, double q, const EmpiricalMeasure& mu) const;
  /// Lions derivative: sum_j g_j'(<mu, psi_j>) psi_j'(y).
  double lions(const EmpiricalMeasure& mu, double y) const;
  /// Throws ContractError when a derivative is missing.
  void check() const;

  static CylindricalFunction constant(double c);
};

CylindricalFunction operator+(const CylindricalFunction& a, const CylindricalFunction& b);
CylindricalFunction operator*(double s, const CylindricalFunction& a);

/// phi = q.
CylindricalFunction phi_q();
/// phi = q^2.
CylindricalFunction phi_q_squared();
/// phi = sin(x) + q^2/8.
CylindricalFunction phi_sin_quadratic();
/// phi = <mu, y^2> + <mu, y>^2.
CylindricalFunction phi_law_moments();
/// The three functions used by the consistency checks.
std::vector<CylindricalFunction> shipped_test_functions();

/// Buy-side jump term. `model` follows ModelCoefficients::buy_compensated:
/// raw jumps int [phi(q - z) - phi(q)] when false, the compensated integrand
/// int [phi(q - z) - phi(q) + phi_q z] when true. `negated` negates the
/// compensated integrand.
enum class BuyForm { model, raw, compensated, negated };
std::string to_string(BuyForm f);

struct GeneratorTerms {
  double diffusion = 0.0;  // b phi_x + sigma^2/2 phi_xx
  double drift = 0.0;      // a phi_q
  double sells = 0.0;
  double buys = 0.0;
  double law = 0.0;        // the measure-derivative terms
  double total() const { return diffusion + drift + sells + buys + law; }
};

GeneratorTerms generator_terms(const CylindricalFunction& phi, const ModelCoefficients& m, double x, double q,
                               const EmpiricalMeasure& mu, double l, BuyForm form = BuyForm::model);

double apply_generator(const CylindricalFunction& phi, const ModelCoefficients& m, double x, double q,
                       const EmpiricalMeasure& mu, double l, BuyForm form = BuyForm::model);

struct ItoConfig {
  double x0 = 1.0;
  double q0 = 1.0;
  double horizon = 1.0;
  std::size_t steps = 128;
  std::size_t particles = 8192;
  std::uint64_t seed = 1;
  double picard_tol = 1e-3;
  int max_picard = 25;
  unsigned threads = 1;
};

struct ItoReport {
  std::string phi;
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
  double se = 0.0;
  double lhs_local = 0.0, rhs_local = 0.0, se_local = 0.0;
  double lhs_law = 0.0, rhs_law = 0.0, se_law = 0.0;
  std::size_t reflections = 0;  // particles whose regulator moved
  bool precondition_ok = true;  // false when reflection meets phi_q(., 0) != 0
  int picard_iterations = 0;
};

/// phi(Theta_s) - phi(Theta_0) against the time integral of the generator
/// along the same trajectories (pinned particles for the local part,
/// reference particles for the law part).
ItoReport ito_consistency(const CylindricalFunction& phi, const ModelCoefficients& m, const Policy& policy,
                          const EmpiricalMeasure& q0_law, const ItoConfig& cfg);

struct RichardsonReport {
  std::vector<double> deltas;
  std::vector<double> estimates;  // (E phi(Theta_delta) - phi(Theta_0)) / delta
  std::vector<double> errors;     // estimates minus the generator
  std::vector<double> se;
  double generator = 0.0;
  double slope = 0.0;             // least-squares slope of log|error| on log delta
  bool same_sign = false;
};

/// Finite-difference generator estimates from the simulator at several
/// delta, compared with apply_generator at the start point.
RichardsonReport generator_richardson(const CylindricalFunction& phi, const ModelCoefficients& m,
                                      const Policy& policy, const EmpiricalMeasure& q0_law,
                                      const std::vector<double>& deltas, const ItoConfig& cfg,
                                      BuyForm form = BuyForm::model);

/// Values on a uniform (x, q) grid with optional standard errors.
struct GridFunction {
  std::vector<double> x_grid, q_grid;
  std::vector<double> values;  // x-major
  std::vector<double> se;      // empty means exact
  std::vector<double> bias;    // deterministic error bound per cell (horizon truncation); empty means none

  double at(std::size_t i, std::size_t j) const { return values[i * q_grid.size() + j]; }
  double se_at(std::size_t i, std::size_t j) const { return se.empty() ? 0.0 : se[i * q_grid.size() + j]; }
  double bias_at(std::size_t i, std::size_t j) const { return bias.empty() ? 0.0 : bias[i * q_grid.size() + j]; }
  /// Linear in q along x_grid[i]; below the grid the first value is used,
  /// above it the last two points are extrapolated.
  double along_q(std::size_t i, double q) const;

  static GridFunction from_table(const ValueTable& t);
  static GridFunction from_function(std::vector<double> xs, std::vector<double> qs,
                                    const std::function<double(double, double)>& f);
};

struct HjbPoint {
  double x = 0.0, q = 0.0;
  double v = 0.0;
  double residual = 0.0;  // rho v - max_l [J^l v + L]
  double best_l = 0.0;
  double noise = 0.0;        // propagated table noise
  double truncation = 0.0;   // propagated deterministic table error
  double differencing = 0.0; // |residual(h) - residual(2h)|
  double tolerance = 0.0;
  std::string classification;
};

struct HjbResidualReport {
  std::vector<HjbPoint> points;
  double h_x = 0.0, h_q = 0.0;  // bandwidths (grid spacing; 2h for the error estimate)
  std::string label = "frozen-law diagnostic";
  bool conditioning_warning = false;
  double median_abs = 0.0, p90_abs = 0.0, max_abs = 0.0;
};

/// Residual of the stationary equation on the interior of the table with the
/// law frozen at mu; measure-derivative terms are omitted.
HjbResidualReport hjb_residual_scan(const ModelCoefficients& m, const RewardSpec& reward, const GridFunction& v,
                                    const EmpiricalMeasure& mu, const std::vector<double>& l_grid,
                                    BuyForm form = BuyForm::model);

}  // namespace lobmf
