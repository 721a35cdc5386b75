#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "glab/langevin.hpp"
#include "glab/lattice.hpp"
#include "glab/rng.hpp"
#include "glab/stats.hpp"

namespace glab {

/// Conductances c_t(b) = V''(grad h_t(b)) on the active bonds, piecewise
/// constant on [t_k, t_k + spacing).
struct EnvironmentTrajectory {
  std::shared_ptr<const LatticeDomain> domain;
  double spacing = 0.5;
  Eigen::MatrixXd rates;  // active bond x snapshot
  double a_lower = 1.0;
  double a_upper = 1.0;

  long snapshots() const { return static_cast<long>(rates.cols()); }
  double horizon() const { return spacing * static_cast<double>(rates.cols()); }
  /// Same snapshots in reverse order.
  EnvironmentTrajectory reversed() const;
  /// A single snapshot held for the whole horizon.
  static EnvironmentTrajectory frozen(std::shared_ptr<const LatticeDomain> d, const Eigen::VectorXd& rates,
                                      double horizon, double a_lower, double a_upper);
};

/// Records the environment of a running chain: a snapshot every `spacing`
/// time units for a total of `length`.
EnvironmentTrajectory harvest_environment(FieldState& s, Rng& rng, double length, double spacing = 0.5);

struct WalkPath {
  Site start;
  std::vector<double> jump_times;
  std::vector<Site> sites;  // sites[0] = start; sites[k + 1] entered at jump_times[k]
  double exit_time = 0.0;
  Site exit_site;
  bool exited = false;  // false: horizon exhausted first (flagged)
};

/// Continuous-time walk with jump rates c_t(b) started at x0 at trajectory
/// time t0, simulated by thinning against the bound 4 A_V.
WalkPath simulate_walk(const EnvironmentTrajectory& env, Site x0, Rng& rng, double t0 = 0.0);

/// Occupation time of y before exit and the exit site, without storing the path.
struct WalkSummary {
  double occupation = 0.0;
  double exit_time = 0.0;
  Site exit_site;
  bool exited = false;
};

WalkSummary run_walk(const EnvironmentTrajectory& env, Site x0, Site y, Rng& rng, double t0 = 0.0);

/// Minimum walk horizon 20 R^2 / a_V.
double required_horizon(const LatticeDomain& d, double a_lower);

struct HsOptions {
  double dt = 0.0;           // 0: default_dt
  double spacing = 0.5;      // snapshot spacing
  double burn = 0.0;         // 0: 20 R^2
  double window = 0.0;       // start-time window per segment; 0: R^2
  long n_traj = 20;          // segments, one batch each
  long walks_per_traj = 1000;
};

struct HsEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long walks = 0;
  long flagged = 0;
  std::vector<double> batch_values;  // one per trajectory (per node and trajectory for the mean)
  bool refused = false;              // more than 0.1% of walks flagged
};

/// Cov(h(x), h(y)) as the mean occupation time of y before exit of the walk
/// from x, over stationary environment segments of one long chain.
HsEstimate estimate_covariance(FieldState state, Site x, Site y, const HsOptions& opt, std::uint64_t seed);

/// E h(x) = int_0^1 E_x psi(X_tau) dr, midpoint rule with r_nodes nodes; the
/// environment at node r comes from the chain with boundary r psi.
HsEstimate estimate_mean(std::shared_ptr<const LatticeDomain> d, const Potential& p, const GridField& psi, Site x,
                         int r_nodes, const HsOptions& opt, std::uint64_t seed);

/// Flag rate above which estimates are refused.
inline constexpr double kMaxFlaggedFraction = 1e-3;

}  // namespace glab
