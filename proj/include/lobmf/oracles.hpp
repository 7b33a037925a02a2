#pragma once

// Independent reference computations used by the tests and the acceptance
// suite. None of these share code paths with the solvers they check.

#include <functional>
#include <optional>
#include <vector>

#include "lobmf/bertrand.hpp"
#include "lobmf/skorokhod.hpp"

namespace lobmf::oracle {

/// Pointwise minimum, over every integer-valued nondecreasing regulator with
/// K(t0) = 0 that keeps y + K >= 0 at all knots and left limits, of the
/// regulator at each knot and each left limit (interleaved: left limit of
/// knot k at index 2k - 1, value at knot k at index 2k). `y` must take
/// integer values. Values are searched in [0, cap].
std::vector<double> min_integer_regulator(const CadlagPath& y, int cap);

/// Same interleaving of an existing regulator path.
std::vector<double> interleave(const CadlagPath& k);

/// Best response found by scanning `points` prices on [0, hi] of `profit`.
double grid_argmax(const std::function<double(double)>& profit, double hi, int points);

/// Symmetric fixed point of grid best responses for the N-seller linear game
/// with raw (untruncated) demand.
double grid_symmetric_equilibrium(const LinearDemand& d, const LinearCost& c, std::size_t n,
                                  int points, int sweeps);

/// Fixed point m = argmax_p Pi(p, m) of the representative profit on a grid.
double grid_representative_fixed_point(const LinearParams& q, int points, int sweeps);

/// Expected discounted value sum_k P(N_T = k) * int_0^T e^{-rho t} g(k, t) ...
/// computed for a frozen liquidity q0 hit by unit buy orders at rate beta:
/// E int_0^T e^{-rho t} r(Q_t) dt with Q_t = max(q0 - N_t, 0), truncated at
/// k_max events. Integrates over event times exactly through the Poisson
/// occupation formula.
double buy_only_value(double q0, double beta, double rho, double T, int k_max,
                      const std::function<double(double)>& r);

}  // namespace lobmf::oracle
