#include "lobmf/bertrand.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/tools/minima.hpp>

#include "lobmf/errors.hpp"
#include "lobmf/measures.hpp"

namespace lobmf {

std::string to_string(Participation p) {
  switch (p) {
    case Participation::interior: return "interior";
    case Participation::boundary: return "boundary";
    case Participation::exited: return "exited";
  }
  return "unknown";
}

std::vector<double> EquilibriumReport::prices() const {
  std::vector<double> out;
  for (const auto& s : sellers) out.push_back(s.price);
  return out;
}

std::vector<double> EquilibriumReport::profits() const {
  std::vector<double> out;
  for (const auto& s : sellers) out.push_back(s.profit);
  return out;
}

std::vector<SellerOutcome> EquilibriumReport::by_id() const {
  auto out = sellers;
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<LevelCoefficients> linear_levels(const LinearDemand& d, std::size_t N) {
  std::vector<LevelCoefficients> lv(N + 1, {0.0, 0.0, 0.0});
  lv[N] = {d.A, d.B, d.C};
  // Dropping seller n+1 at its choke price (a + c * mean_others) / b folds its
  // price into the remaining n demands.
  for (std::size_t n = N - 1; n >= 1; --n) {
    const auto [a, b, c] = lv[n + 1];
    const double nn = static_cast<double>(n);
    const double r = 1.0 + c / (nn * b);
    lv[n] = {a * r, b - c * c / (nn * nn * b), (nn - 1.0) * (c / nn) * r};
  }
  return lv;
}

namespace {

double mean_others(const std::vector<double>& p, std::size_t i) {
  if (p.size() < 2) return 0.0;
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j)
    if (j != i) s += p[j];
  return s / static_cast<double>(p.size() - 1);
}

double bisect_root(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw ModelError("choke price not bracketed");
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double callable_level(const GameSpec& spec, const DemandFn& h, std::size_t n, std::size_t i,
                      const std::vector<double>& p);

double callable_choke_for_next(const GameSpec& spec, const DemandFn& h, std::size_t n,
                               const std::vector<double>& p) {
  // price of an added (n+1)-th seller making its own level-(n+1) demand zero
  std::vector<double> q(p);
  q.push_back(0.0);
  auto f = [&](double s) {
    q.back() = s;
    return callable_level(spec, h, n + 1, n, q);
  };
  const double pmax = 10.0 * ((p.empty() ? 0.0 : *std::max_element(p.begin(), p.end())) + 1.0);
  return bisect_root(f, 0.0, pmax);
}

double callable_level(const GameSpec& spec, const DemandFn& h, std::size_t n, std::size_t i,
                      const std::vector<double>& p) {
  if (n == spec.n_sellers) return h(i, p);
  std::vector<double> q(p);
  q.push_back(callable_choke_for_next(spec, h, n, p));
  return callable_level(spec, h, n + 1, i, q);
}

// Own-price root of seller i's level-n demand holding the others fixed.
double own_choke(const GameSpec& spec, std::size_t n, std::size_t i, const std::vector<double>& p) {
  if (const auto* lin = std::get_if<LinearDemand>(&spec.demand)) {
    const auto lv = linear_levels(*lin, spec.n_sellers)[n];
    return (lv.a + lv.c * mean_others(p, i)) / lv.b;
  }
  const auto& h = std::get<DemandFn>(spec.demand);
  std::vector<double> q(p);
  auto f = [&](double s) {
    q[i] = s;
    return callable_level(spec, h, n, i, q);
  };
  const double pmax = 10.0 * (*std::max_element(p.begin(), p.end()) + 1.0);
  if (f(0.0) <= 0.0) return 0.0;
  return bisect_root(f, 0.0, pmax);
}

std::vector<double> actual_demand_level(const GameSpec& spec, std::size_t top,
                                        const std::vector<double>& p) {
  std::vector<double> out(top, 0.0);
  for (std::size_t n = top; n >= 1; --n) {
    std::vector<double> sub(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(n));
    auto h = level_demand(spec, n, sub);
    if (h[n - 1] >= 0.0) {
      std::copy(h.begin(), h.end(), out.begin());
      return out;
    }
  }
  return out;
}

}  // namespace

std::vector<double> level_demand(const GameSpec& spec, std::size_t n, const std::vector<double>& p) {
  if (n == 0 || n > spec.n_sellers || p.size() != n) throw DomainError("level_demand: bad level");
  std::vector<double> out(n);
  if (const auto* lin = std::get_if<LinearDemand>(&spec.demand)) {
    const auto lv = linear_levels(*lin, spec.n_sellers)[n];
    for (std::size_t i = 0; i < n; ++i) out[i] = lv.a - lv.b * p[i] + lv.c * mean_others(p, i);
    return out;
  }
  const auto& h = std::get<DemandFn>(spec.demand);
  if (!h) throw ContractError("demand callable missing");
  if (n == spec.n_sellers) {
    for (std::size_t i = 0; i < n; ++i) out[i] = h(i, p);
    return out;
  }
  std::vector<double> q(p);
  q.push_back(callable_choke_for_next(spec, h, n, p));
  for (std::size_t i = 0; i < n; ++i) out[i] = callable_level(spec, h, n + 1, i, q);
  return out;
}

std::vector<double> actual_demand(const GameSpec& spec, const std::vector<double>& p) {
  if (p.size() != spec.n_sellers) throw DomainError("actual_demand: price vector length");
  if (!std::is_sorted(p.begin(), p.end())) throw DomainError("actual_demand: prices must be ascending");
  return actual_demand_level(spec, spec.n_sellers, p);
}

std::vector<double> actual_demand_unsorted(const GameSpec& spec, std::size_t n,
                                           const std::vector<double>& p) {
  if (p.size() != n) throw DomainError("actual_demand_unsorted: price vector length");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> sorted(n);
  for (std::size_t k = 0; k < n; ++k) sorted[k] = p[order[k]];
  const auto hs = actual_demand_level(spec, n, sorted);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[order[k]] = hs[k];
  return out;
}

std::vector<double> subgame_costs(const GameSpec& spec, const std::vector<std::size_t>& ids,
                                  const std::vector<double>& p) {
  std::vector<double> out(p.size());
  if (const auto* lin = std::get_if<LinearCost>(&spec.cost)) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double f = lin->fixed.empty() ? 0.0 : lin->fixed.at(ids[i]);
      out[i] = f + lin->x * p[i] - lin->y * mean_others(p, i);
    }
    return out;
  }
  const auto& c = std::get<CostFn>(spec.cost);
  if (!c) throw ContractError("cost callable missing");
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = c(i, p, spec.liquidity);
  return out;
}

namespace {

double profit_at(const GameSpec& spec, const std::vector<std::size_t>& ids, std::vector<double> p,
                 std::size_t i, double s) {
  p[i] = s;
  const double h = actual_demand_unsorted(spec, p.size(), p)[i];
  if (h <= 0.0) return 0.0;
  return (s - subgame_costs(spec, ids, p)[i]) * h;
}

double best_response(const GameSpec& spec, const std::vector<std::size_t>& ids,
                     const std::vector<double>& p, std::size_t i) {
  const std::size_t n = p.size();
  const double choke = own_choke(spec, n, i, p);
  if (!(choke > 0.0)) return 0.0;
  constexpr int kGrid = 200;
  double best_s = 0.0, best_v = -std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (int k = 0; k < kGrid; ++k) {
    const double s = choke * k / (kGrid - 1);
    const double v = profit_at(spec, ids, p, i, s);
    if (v > best_v) {
      best_v = v;
      best_s = s;
      best_k = k;
    }
  }
  const double scale = std::max(1.0, std::abs(best_v));
  if (std::holds_alternative<LinearDemand>(spec.demand) &&
      std::holds_alternative<LinearCost>(spec.cost)) {
    // stationary point of the raw quadratic profit
    const auto lv = linear_levels(std::get<LinearDemand>(spec.demand), spec.n_sellers)[n];
    const auto& lc = std::get<LinearCost>(spec.cost);
    const double mo = mean_others(p, i);
    const double f = lc.fixed.empty() ? 0.0 : lc.fixed.at(ids[i]);
    const double yterm = n > 1 ? lc.y * mo : 0.0;
    double s = ((1.0 - lc.x) * (lv.a + lv.c * mo) - lv.b * (yterm - f)) / (2.0 * lv.b * (1.0 - lc.x));
    s = std::clamp(s, 0.0, choke);
    const double v = profit_at(spec, ids, p, i, s);
    if (v >= best_v - 1e-13 * scale) return s;
  }
  const double h = choke / (kGrid - 1);
  const double lo = std::max(0.0, choke * best_k / (kGrid - 1) - h);
  const double hi = std::min(choke, choke * best_k / (kGrid - 1) + h);
  auto neg = [&](double s) { return -profit_at(spec, ids, p, i, s); };
  const auto r = boost::math::tools::brent_find_minima(neg, lo, hi, std::numeric_limits<double>::digits);
  return -r.second >= best_v ? r.first : best_s;
}

std::vector<double> solve_subgame(const GameSpec& spec, const std::vector<std::size_t>& ids,
                                  std::vector<double> p, int& iterations) {
  std::vector<double> history;
  for (int it = 0; it < spec.max_iter; ++it) {
    ++iterations;
    std::vector<double> next(p.size());
    double diff = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double br = best_response(spec, ids, p, i);
      next[i] = (1.0 - spec.damping) * p[i] + spec.damping * br;
      diff = std::max(diff, std::abs(next[i] - p[i]));
    }
    p = std::move(next);
    history.push_back(diff);
    if (diff < spec.tolerance) return p;
  }
  throw NonconvergenceError("best-response iteration did not converge", std::move(history), std::move(p));
}

}  // namespace

EquilibriumReport solve_equilibrium(const GameSpec& spec) {
  if (spec.n_sellers == 0) throw DomainError("game needs at least one seller");
  if (const auto* lc = std::get_if<LinearCost>(&spec.cost)) {
    if (!lc->fixed.empty() && lc->fixed.size() != spec.n_sellers)
      throw DomainError("fixed cost vector length differs from seller count");
    if (!(lc->x < 1.0)) throw DomainError("linear cost needs x < 1");
  }
  if (const auto* ld = std::get_if<LinearDemand>(&spec.demand)) {
    if (!(ld->B > 0.0)) throw DomainError("linear demand needs B > 0");
  }
  EquilibriumReport rep;
  std::vector<std::size_t> ids(spec.n_sellers);
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<double> p(spec.n_sellers, 0.0);
  while (!ids.empty()) {
    const std::size_t n = ids.size();
    p = solve_subgame(spec, ids, p, rep.iterations);
    std::size_t top = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (p[i] >= p[top]) top = i;
    const auto costs = subgame_costs(spec, ids, p);
    const auto raw = level_demand(spec, n, p);
    const bool above_cost = p[top] > costs[top];
    // a price within the stopping tolerance of the choke price has zero demand
    const double choke = own_choke(spec, n, top, p);
    const bool demand_left = raw[top] > 0.0 && p[top] < choke - 10.0 * spec.tolerance * std::max(1.0, choke);
    if (above_cost && demand_left) {
      const auto hs = actual_demand_unsorted(spec, n, p);
      for (std::size_t i = 0; i < n; ++i) {
        rep.sellers.push_back({ids[i], p[i], hs[i], raw[i], costs[i], (p[i] - costs[i]) * hs[i],
                               Participation::interior});
      }
      rep.active_count = n;
      break;
    }
    // candidate demand at the reported price, the seller's cost
    std::vector<double> at_cost(p);
    at_cost[top] = costs[top];
    const double candidate = level_demand(spec, n, at_cost)[top];
    SellerOutcome out{ids[top], costs[top], 0.0, candidate, costs[top], 0.0, Participation::exited};
    if (candidate > 0.0) {
      out.cls = Participation::boundary;
      out.demand = candidate;
      ++rep.boundary_count;
    } else {
      ++rep.exit_count;
    }
    rep.sellers.push_back(out);
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(top));
    p.erase(p.begin() + static_cast<std::ptrdiff_t>(top));
  }
  std::stable_sort(rep.sellers.begin(), rep.sellers.end(),
                   [](const auto& a, const auto& b) { return a.price < b.price; });
  return rep;
}

double max_deviation_gain(const GameSpec& spec, const EquilibriumReport& rep, int grid_points) {
  std::vector<std::size_t> ids;
  std::vector<double> p;
  for (const auto& s : rep.by_id()) {
    if (s.cls == Participation::interior) {
      ids.push_back(s.id);
      p.push_back(s.price);
    }
  }
  double gain = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double base = profit_at(spec, ids, p, i, p[i]);
    const double choke = own_choke(spec, ids.size(), i, p);
    for (int k = 0; k < grid_points; ++k) {
      const double s = choke * k / (grid_points - 1);
      gain = std::max(gain, profit_at(spec, ids, p, i, s) - base);
    }
  }
  return gain;
}

void check_game_contract(const GameSpec& spec, std::uint64_t seed, int samples) {
  if (const auto* ld = std::get_if<LinearDemand>(&spec.demand)) {
    if (!(ld->B > ld->C && ld->C > 0.0 && ld->A >= 0.0))
      throw ModelError("linear demand needs B > C > 0 and A >= 0");
  }
  if (const auto* lc = std::get_if<LinearCost>(&spec.cost)) {
    if (!(lc->x >= 0.0 && lc->x < 1.0 && lc->y >= 0.0))
      throw ModelError("linear cost needs 0 <= x < 1 and y >= 0");
  }
  const std::size_t N = spec.n_sellers;
  std::vector<std::size_t> ids(N);
  std::iota(ids.begin(), ids.end(), 0);
  RngStream rng(seed, purpose::test, 0, 0);
  const double eps = 1e-6;
  for (int s = 0; s < samples; ++s) {
    std::vector<double> p(N);
    for (auto& v : p) v = 2.0 * rng.uniform();
    const auto h0 = level_demand(spec, N, p);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        auto q = p;
        q[j] += eps;
        const double d = level_demand(spec, N, q)[i] - h0[i];
        if (i == j && !(d < 0.0)) throw ModelError("demand must decrease in own price");
        if (i != j && d < -1e-12) throw ModelError("demand must not decrease in other prices");
      }
    }
    if (N >= 3) {
      // swap two competitors of seller 0
      auto q = p;
      std::swap(q[1], q[2]);
      const double tol = 1e-10 * std::max(1.0, std::abs(h0[0]));
      if (std::abs(level_demand(spec, N, q)[0] - h0[0]) > tol)
        throw ModelError("demand not exchangeable in competitor prices");
      if (std::holds_alternative<CostFn>(spec.cost)) {
        const double c0 = subgame_costs(spec, ids, p)[0];
        if (std::abs(subgame_costs(spec, ids, q)[0] - c0) > 1e-10 * std::max(1.0, std::abs(c0)))
          throw ModelError("cost not exchangeable in competitor prices");
      }
    }
  }
}

LinearSolution linear_equilibrium(const LinearParams& q, std::size_t n) {
  if (n == 0) throw DomainError("linear_equilibrium needs n >= 1");
  if (!(q.b * (1.0 - q.x) > 0.0)) throw DomainError("linear_equilibrium needs b(1-x) > 0");
  if (n == 1) {
    const double p = q.a / (2.0 * q.b);
    return {p, p};
  }
  const double den_bar = 2.0 * q.b * (1.0 - q.x) - q.c * (1.0 - q.x) + q.b * q.y;
  if (!(den_bar > 0.0)) throw DomainError("linear_equilibrium: nonpositive mean-price denominator");
  const double p_bar = q.a * (1.0 - q.x) / den_bar;
  const double nm1 = static_cast<double>(n - 1);
  const double nn = static_cast<double>(n);
  const double den1 = 2.0 * q.b + (q.c - q.b * q.y / (1.0 - q.x)) / nm1;
  if (!(den1 > 0.0)) throw DomainError("linear_equilibrium: nonpositive price denominator");
  const double D = q.c * (1.0 - q.x) - q.b * q.y;
  const double den2 = nm1 / nn * 2.0 * q.b * (1.0 - q.x) + D / nn;
  if (den2 == 0.0) throw DomainError("linear_equilibrium: zero coupling denominator");
  return {q.a / den1 + D / den2 * p_bar, p_bar};
}

LinearSolution meanfield_limit(const LinearParams& q) {
  const double den = (2.0 * q.b - q.c) * (1.0 - q.x) + q.b * q.y;
  if (!(den > 0.0)) throw DomainError("meanfield_limit: nonpositive denominator");
  const double p = q.a * (1.0 - q.x) / den;
  return {p, p};
}

LinearParams population_average_level(const LinearParams& q, std::size_t n) {
  const double nn = static_cast<double>(n);
  return {q.a, q.b - q.c / nn, q.c * (nn - 1.0) / nn, q.x - q.y / nn, q.y * (nn - 1.0) / nn};
}

double representative_best_response(const LinearParams& q, double m) {
  return q.a / (2.0 * q.b) + (q.c * (1.0 - q.x) - q.b * q.y) / (2.0 * q.b * (1.0 - q.x)) * m;
}

double representative_profit(const LinearParams& q, double p, double m) {
  return (q.a - q.b * p + q.c * m) * (p - (q.x * p - q.y * m));
}

}  // namespace lobmf
