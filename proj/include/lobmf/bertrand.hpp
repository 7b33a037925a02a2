#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lobmf {

/// h_i = A - B p_i + C * (mean of the other prices) at the top level.
struct LinearDemand {
  double A = 1.0;
  double B = 2.0;
  double C = 1.0;
};

/// Demand of the seller at position i given the full price vector (any length
/// n >= 1 at the top level). Must be decreasing in p_i, increasing in the
/// others and symmetric in the others.
using DemandFn = std::function<double(std::size_t i, const std::vector<double>& p)>;

/// c_i = fixed_i + x p_i - y * (mean of the other prices).
/// `fixed` is indexed by seller id and may be empty (all zero).
struct LinearCost {
  double x = 0.0;
  double y = 0.0;
  std::vector<double> fixed;
};

/// Waiting cost of the seller at position i given the prices of the current
/// subgame and the book liquidity Q.
using CostFn = std::function<double(std::size_t i, const std::vector<double>& p, double Q)>;

struct GameSpec {
  std::size_t n_sellers = 2;
  std::variant<LinearDemand, DemandFn> demand = LinearDemand{};
  std::variant<LinearCost, CostFn> cost = LinearCost{};
  double liquidity = 0.0;
  double tolerance = 1e-10;  // best-response sup-norm stopping rule
  int max_iter = 2000;
  double damping = 0.5;
};

enum class Participation { interior, boundary, exited };
std::string to_string(Participation p);

struct SellerOutcome {
  std::size_t id = 0;
  double price = 0.0;
  double demand = 0.0;            // actual demand at the reported prices
  double candidate_demand = 0.0;  // level demand at the candidate when classified
  double cost = 0.0;
  double profit = 0.0;
  Participation cls = Participation::interior;
};

struct EquilibriumReport {
  std::vector<SellerOutcome> sellers;  // ascending in price
  std::size_t active_count = 0;
  std::size_t boundary_count = 0;
  std::size_t exit_count = 0;
  int iterations = 0;

  std::vector<double> prices() const;
  std::vector<double> profits() const;
  /// Outcomes reordered by seller id.
  std::vector<SellerOutcome> by_id() const;
};

/// Raw demand of the level-n subgame (the top level is n = n_sellers).
/// Lower levels are obtained by pinning the dropped seller at its choke price.
std::vector<double> level_demand(const GameSpec& spec, std::size_t n, const std::vector<double>& p);

/// Linear level coefficients (a_n, b_n, c_n) for n = 1..N. Index 0 unused.
struct LevelCoefficients {
  double a, b, c;
};
std::vector<LevelCoefficients> linear_levels(const LinearDemand& d, std::size_t N);

/// Actual demand for an ascending price vector of length N.
/// Throws DomainError when p is not sorted, ModelError when a choke price
/// cannot be bracketed.
std::vector<double> actual_demand(const GameSpec& spec, const std::vector<double>& p);

/// Actual demand for prices in any order; the result follows the input order.
/// Only the first `n` levels are used when n < n_sellers (subgame view).
std::vector<double> actual_demand_unsorted(const GameSpec& spec, std::size_t n,
                                           const std::vector<double>& p);

/// Waiting cost of each seller in a subgame. `ids` maps positions to seller ids.
std::vector<double> subgame_costs(const GameSpec& spec, const std::vector<std::size_t>& ids,
                                  const std::vector<double>& p);

/// Solves the game by damped best responses with the exit/boundary cascade.
/// Throws NonconvergenceError carrying the last iterate.
EquilibriumReport solve_equilibrium(const GameSpec& spec);

/// Largest gain any interior seller can obtain by moving to a point of an
/// evenly spaced grid on [0, choke], holding the rest of the interior
/// subgame fixed.
double max_deviation_gain(const GameSpec& spec, const EquilibriumReport& rep, int grid_points = 200);

/// Spot checks of the demand and cost contracts at random points.
/// Throws ModelError naming the first violated property.
void check_game_contract(const GameSpec& spec, std::uint64_t seed, int samples = 32);

struct LinearParams {
  double a, b, c, x, y;
};

struct LinearSolution {
  double p_star;
  double p_bar;
};

/// Symmetric closed form for the n-seller linear game.
LinearSolution linear_equilibrium(const LinearParams& params, std::size_t n);
/// n -> infinity limit of the symmetric closed form.
LinearSolution meanfield_limit(const LinearParams& params);

/// Parameters of the n-seller level obtained when the demand and cost average
/// over all n prices (own price included) rather than over the n - 1 others.
LinearParams population_average_level(const LinearParams& params, std::size_t n);

/// Maximiser of the representative profit (a - b p + c m)(p - (x p - y m))
/// for a given mean price m.
double representative_best_response(const LinearParams& params, double mean_price);

double representative_profit(const LinearParams& params, double p, double mean_price);

}  // namespace lobmf
