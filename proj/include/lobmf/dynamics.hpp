#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lobmf/measures.hpp"
#include "lobmf/skorokhod.hpp"

namespace lobmf {

struct TimeGrid {
  std::vector<double> nodes;

  static TimeGrid uniform(double t0, double t1, std::size_t steps);
  std::size_t size() const { return nodes.size(); }
  double front() const { return nodes.front(); }
  double back() const { return nodes.back(); }
  /// Index k with nodes[k] <= t < nodes[k+1]; the last cell is closed.
  std::size_t cell(double t) const;
};

/// Finite mark measure: total mass times a discrete distribution on atoms.
struct MarkMeasure {
  double mass = 0.0;
  std::vector<double> atoms;
  std::vector<double> probs;

  static MarkMeasure none() { return {}; }
  static MarkMeasure point(double mass, double z) { return {mass, {z}, {1.0}}; }

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) acc += probs[k] * f(atoms[k]);
    return mass * acc;
  }
  double first_moment() const {
    return integrate([](double z) { return z; });
  }
  bool active() const { return mass > 0.0 && !atoms.empty(); }
};

/// Summary of a law used by the coefficients: moments plus integrals of the
/// declared kernels.
struct LawStats {
  double mean = 0.0;
  double second_moment = 0.0;
  double variance = 0.0;
  std::vector<double> kernels;
};

using Kernel = std::function<double(double)>;
LawStats law_stats(const EmpiricalMeasure& mu, const std::vector<Kernel>& kernels);

enum class XCoupling { per_pair, common };

struct ModelCoefficients {
  std::function<double(double x)> b;
  std::function<double(double x)> sigma;
  std::function<double(double q, const LawStats& mu)> lambda;
  double lambda_max = 1.0;
  std::function<double(double x, double q, double l, double z)> h;
  /// Liquidity drift. When unset the compensator a = lambda * int h dnu_s is
  /// used, i.e. the raw accepted jumps carry no extra drift.
  std::function<double(double x, double q, const LawStats& mu, double l)> a;
  std::function<double(double x, double q, double l)> c;
  MarkMeasure nu_s;
  MarkMeasure nu_b;
  double rho = 1.0;
  double lipschitz = 0.0;
  std::vector<Kernel> law_kernels;
  bool law_dependent = true;
  bool positivity = false;
  /// Adds the buy-side compensator drift +int z dnu_b to the liquidity.
  bool buy_compensated = false;
  XCoupling x_coupling = XCoupling::per_pair;

  /// a(x,q,mu,l) - lambda(q,mu) * int h dnu_s: the drift the raw-jump
  /// simulator adds between events.
  double drift_correction(double x, double q, const LawStats& mu, double l) const;
  /// The liquidity drift a (compensator form when unset).
  double drift(double x, double q, const LawStats& mu, double l) const;
};

/// Spot checks of the coefficient contract. Throws ModelError.
void check_coefficients(const ModelCoefficients& m, std::uint64_t seed, int samples = 64);

struct Policy {
  enum class Form { constant, affine_in_q, grid_feedback };
  Form form = Form::constant;
  double level = 0.0;
  double slope = 0.0;
  std::vector<double> x_grid;
  std::vector<double> q_grid;
  std::vector<double> table;  // x-major, size x_grid.size() * q_grid.size()
  double l_max = std::numeric_limits<double>::infinity();

  static Policy constant(double l, double l_max = std::numeric_limits<double>::infinity());
  static Policy affine(double l0, double l1, double l_max = std::numeric_limits<double>::infinity());
  static Policy grid(std::vector<double> xs, std::vector<double> qs, std::vector<double> table,
                     double l_max = std::numeric_limits<double>::infinity());

  /// Feedback value in [0, l_max]; grid policies use the nearest grid point.
  double operator()(double t, double x, double q) const;
  std::string describe() const;
};

struct SellCandidate {
  double t;
  double z;
  double u;
};

struct BuyOrder {
  double t;
  double z;
};

/// Per-particle driving noise, independent of the state: candidate sell
/// arrivals at the dominating rate lambda_max * nu_s(A) and buy arrivals at
/// rate nu_b(B) on (t0, t1]. Reusing it gives common random numbers across
/// law iterations and exact replay across restarts.
struct DrivingNoise {
  std::vector<SellCandidate> sells;
  std::vector<BuyOrder> buys;
};

std::vector<DrivingNoise> generate_noise(const ModelCoefficients& m, double t0, double t1,
                                         std::uint64_t seed, std::uint64_t purpose_tag,
                                         std::size_t count, unsigned threads = 1, std::size_t first = 0);

/// Euler-Maruyama mid-price paths on `grid`, projected to [0, inf) when
/// positivity is requested. One path per particle (or one shared path).
/// `first` offsets the particle index of the streams so large runs can be
/// generated in chunks; the same applies to generate_noise.
std::vector<CadlagPath> simulate_midprice(const ModelCoefficients& m, double x0, const TimeGrid& grid,
                                          std::uint64_t seed, std::size_t count, unsigned threads = 1,
                                          std::size_t first = 0);

/// Mid price at time t from a path stored on its own grid (piecewise constant).
double midprice_at(const CadlagPath& x, double t);

struct SimulationOptions {
  TimeGrid grid;
  std::uint64_t seed = 0;
  std::size_t particles = 8192;
  double picard_tol = 1e-3;
  int max_picard = 25;
  unsigned threads = 1;
};

struct EnsembleMeta {
  std::uint64_t seed = 0;
  int iterations = 0;
  double gap = 0.0;
  std::vector<double> gap_history;
};

struct ParticleEnsemble {
  TimeGrid grid;
  std::vector<CadlagPath> x_paths;  // one per particle, or a single shared path
  std::vector<CadlagPath> q_paths;
  std::vector<CadlagPath> k_paths;
  std::vector<EmpiricalMeasure> law_flow;  // one per grid node
  EnsembleMeta meta;

  std::size_t particles() const { return q_paths.size(); }
  const CadlagPath& x_path(std::size_t i) const { return x_paths.size() == 1 ? x_paths[0] : x_paths[i]; }
  /// Particle states at the last node.
  std::vector<double> final_q() const;
};

/// Reference (law-defining) system started from explicit initial states,
/// solved by Picard iteration on the law flow with fixed driving noise.
/// Throws NonconvergenceError with the gap history when max_picard is hit.
ParticleEnsemble simulate_reference(const ModelCoefficients& m, const std::vector<double>& q0,
                                    const Policy& policy, const std::vector<CadlagPath>& x_paths,
                                    const std::vector<DrivingNoise>& noise, const SimulationOptions& opt);

/// Draws opt.particles initial states from q0_law (or uses its atoms when the
/// sizes agree), generates noise and mid-price paths and runs
/// simulate_reference.
ParticleEnsemble simulate_liquidity(const ModelCoefficients& m, const EmpiricalMeasure& q0_law,
                                    const Policy& policy, const std::vector<CadlagPath>& x_paths,
                                    const SimulationOptions& opt);

/// Pinned system: particles started at given states under a frozen law flow
/// (one law per grid node). Returns an ensemble whose law_flow is the frozen
/// flow passed in.
ParticleEnsemble simulate_pinned(const ModelCoefficients& m, const std::vector<double>& q0,
                                 const Policy& policy, const std::vector<CadlagPath>& x_paths,
                                 const std::vector<DrivingNoise>& noise,
                                 const std::vector<EmpiricalMeasure>& law_flow, const TimeGrid& grid,
                                 unsigned threads = 1);

/// Initial states for the reference system.
std::vector<double> draw_initial_states(const EmpiricalMeasure& q0_law, std::size_t count,
                                        std::uint64_t seed);

struct Segment {
  double t0, t1;     // consecutive knots of a liquidity path
  double x;          // mid price on the segment
  double q0, q1;     // right limit at t0, left limit at t1
  std::size_t cell;  // grid cell containing the segment
};

/// Visits the segments between consecutive knots of q.
void for_each_segment(const CadlagPath& q, const CadlagPath& x, const TimeGrid& grid,
                      const std::function<void(const Segment&)>& f);

struct FlowGap {
  double gap_q = 0.0;    // ensemble average of per-particle sup differences on [s, r]
  double gap_law = 0.0;  // sup over common nodes of W1 between the two law flows
};

/// Direct run on [t, r] against a run on [t, s] restarted at s on [s, r],
/// with the same mid-price paths and driving noise. `steps` sets the direct
/// grid resolution; s is added to the split grids.
FlowGap flow_property_check(const ModelCoefficients& m, const Policy& policy, double t, double s, double r,
                            double x0, const EmpiricalMeasure& q0_law, std::size_t steps,
                            std::size_t particles, std::uint64_t seed, double picard_tol = 1e-12,
                            int max_picard = 60, unsigned threads = 1);

}  // namespace lobmf
