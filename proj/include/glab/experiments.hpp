#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "glab/harmonic.hpp"
#include "glab/langevin.hpp"
#include "glab/lattice.hpp"
#include "glab/potential.hpp"
#include "glab/rng.hpp"
#include "glab/stats.hpp"

namespace glab {

/// Smooth function on the continuum domain with its analytic gradient.
struct TestFunction {
  std::string name;
  std::function<double(double, double)> f;
  std::function<Eigen::Vector2d(double, double)> grad;
  bool compact = false;  // vanishes on the boundary of the unit square

  double operator()(double x, double y) const { return f(x, y); }

  /// sin(k1 pi x) sin(k2 pi y).
  static TestFunction sine_product(int k1, int k2);
  static TestFunction constant(double c);
  /// a x + b y.
  static TestFunction linear(double a, double b);

  TestFunction scaled(double c) const;
  friend TestFunction operator+(const TestFunction& a, const TestFunction& b);
};

/// Largest gap between grad and central differences with step eps at
/// `points` random points of the unit square.
double gradient_mismatch(const TestFunction& g, int points, double eps, Rng& rng);

/// Affine map from sites to the continuum: x = (i - i0) scale, y = (j - j0) scale.
struct UnitMap {
  double i0 = 0.0;
  double j0 = 0.0;
  double scale = 1.0;

  Eigen::Vector2d operator()(Site s) const { return {(s.i - i0) * scale, (s.j - j0) * scale}; }
  /// Sends the bounding box of D u dD onto [0, 1]^2 (one scale for both axes,
  /// set by the longer side).
  static UnitMap of(const LatticeDomain& d);
};

/// g at the sites of D u dD (NaN elsewhere).
GridField sample_on(const LatticeDomain& d, const UnitMap& m, const TestFunction& g);

/// u . x at the sites of D u dD.
GridField tilt_field(const LatticeDomain& d, const Eigen::Vector2d& u);

/// Copies the values of `field` (on `from`'s grid) at the sites of
/// `to` u d`to`.
GridField transfer(const LatticeDomain& from, const GridField& field, const LatticeDomain& to);

/// xi(g) = sum over interior bonds of a(b) grad g(b) grad(h - phi)(b).
double xi_functional(const LatticeDomain& d, const GridField& h, const GridField& phi, const GridField& g, Beta a);

/// nu with xi(g) = nu . (h - phi) on the interior (interior bonds never touch dD).
Eigen::VectorXd xi_coefficients(const LatticeDomain& d, const GridField& g, Beta a);

struct Quadrature {
  double value = 0.0;
  int mesh = 0;          // final midpoint mesh
  bool converged = false;  // successive meshes agreed to 1e-4 relative
};

/// int_{[0,1]^2} sum_i beta_i d_i g1 d_i g2 by the midpoint rule, doubling
/// the mesh from `mesh` until two successive values agree.
Quadrature dirichlet_ip_beta(const TestFunction& g1, const TestFunction& g2, Beta beta, int mesh = 16);

/// Runs of these experiments use thinned samples of burned-in chains.
struct ChainSchedule {
  double dt = 0.0;    // 0: default_dt
  double burn = 0.0;  // time units; 0: a size-dependent default
  double gap = 0.0;   // time units between samples; 0: a size-dependent default
};

struct CltConfig {
  int n = 32;  // interior (n-1) x (n-1), lattice spacing 1/n
  Potential potential = Potential::cosine_perturbed();
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  std::optional<TestFunction> boundary_f;  // h = n u.x + f on dD
  std::vector<TestFunction> tests;
  Beta a;  // a_u per orientation
  long samples = 5000;
  int chains = 4;
  ChainSchedule schedule{0.04, 0.0, 0.0};  // burn n^2, gap 0.15 n^2 / a_V
};

struct CltSeries {
  std::string name;
  std::vector<double> xi;
  Estimate mean;
  Estimate variance;
  NormalityReport normality;
  double target = 0.0;  // (g, g)^beta_grad
  double ratio = 0.0;   // Var / target
  double lag1 = 0.0;    // worst per-chain lag-1 autocorrelation
  double oracle_variance = 0.0;     // nu^T G nu (quadratic V only)
  double em_oracle_variance = 0.0;  // same for the EM stationary law
};

struct CltReport {
  std::vector<CltSeries> series;
  double ratio_spread = 0.0;  // max ratio / min ratio - 1
  bool decorrelated = true;   // every lag-1 autocorrelation <= 0.1
  long samples = 0;
};

CltReport clt_experiment(const CltConfig& cfg, std::uint64_t seed);

/// Boundary data as a function of site and domain size R.
using BoundaryRule = std::function<double(Site, int)>;

/// Square interior R x R with the given boundary rule.
struct SizedSquare {
  std::shared_ptr<const LatticeDomain> domain;
  GridField boundary;
};
SizedSquare square_with_boundary(int r, const BoundaryRule& psi);

struct MeanHarmonicConfig {
  std::vector<int> sizes{16, 32};
  Potential potential = Potential::cosine_perturbed();
  BoundaryRule psi;
  double r_fraction = 0.25;
  Beta beta;
  /// Stiffness of the coupled quadratic control chain; 0: no control.
  double control_stiffness = 1.2;
  double span = 0.0;  // averaging time; 0: 80 R^2
  int batches = 20;
  ChainSchedule schedule;
};

struct MeanHarmonicRow {
  int size = 0;
  std::vector<Site> sites;          // D(r)
  std::vector<double> deviation;    // |m(x) - hhat(x)| on D(r)
  std::vector<double> std_error;    // of m(x)
  double max_deviation = 0.0;
  double median_deviation = 0.0;
  double max_std_error = 0.0;
  double budget = 0.0;  // Bonferroni z times max_std_error
  double ratio = 0.0;   // max_deviation / budget
  bool underpowered = false;  // max_std_error > max_deviation / 2
};

std::vector<MeanHarmonicRow> mean_harmonic_experiment(const MeanHarmonicConfig& cfg, std::uint64_t seed);

struct CouplingConfig {
  std::vector<int> sizes{16, 32};
  Potential potential = Potential::cosine_perturbed();
  BoundaryRule psi;
  BoundaryRule psi_tilde;
  double r_fraction = 0.25;
  double epsilon = 0.0;  // 0: 0.1 osc(psi - psi_tilde)
  Beta beta;
  long replicas = 200;
  ChainSchedule schedule;
};

struct CouplingRow {
  int size = 0;
  std::vector<double> deviations;  // max over D(r) of |hbar - hhat|, per replica
  double epsilon = 0.0;
  double exceedance = 0.0;
  /// Per replica, the oscillation over D of hbar minus the harmonic extension
  /// of psi - psi_tilde (distance from the quadratic limit); by the maximum
  /// principle it bounds that replica's deviation in the quadratic case.
  std::vector<double> residuals;
  double contraction_residual = 0.0;  // max of residuals
  double solver_tol = 0.0;  // sup-norm error of the extension solves
  bool burn_in_ok = true;  // first and second halves agree within 3 se
};

std::vector<CouplingRow> coupling_experiment(const CouplingConfig& cfg, std::uint64_t seed);

struct EntropyConfig {
  std::shared_ptr<const LatticeDomain> domain;
  Potential potential = Potential::cosine_perturbed();
  GridField zeta;
  GridField zeta_tilde;
  Beta beta;
  long samples = 1000;
  ChainSchedule schedule;
};

struct EntropyReport {
  Estimate main;       // sum_b E[V''(grad h(b)) grad g(b) grad(g - hbar)(b)]
  Estimate remainder;  // L sum_b E[(|grad hbar|^2 + |grad g|^2) |grad g|]
  double total = 0.0;
  double pinsker = 0.0;         // sqrt(max(total, 0) / 2)
  double roundoff_floor = 0.0;  // error floor for pathwise-cancelling sums
  double effective_error = 0.0;  // max(main.std_error, roundoff_floor)
};

EntropyReport entropy_estimate(const EntropyConfig& cfg, std::uint64_t seed);

struct BlRow {
  Estimate var_gl;
  double var_dgff = 0.0;  // nu^T (a_V (-Delta))^{-1} nu
  bool pass = false;
};

struct BlReport {
  std::vector<BlRow> rows;
  bool pass = true;
};

BlReport brascamp_lieb_check(std::shared_ptr<const LatticeDomain> d, const Potential& p, const GridField& psi,
                             const std::vector<Eigen::VectorXd>& nus, long samples, const ChainSchedule& schedule,
                             std::uint64_t seed);

/// Two-sided Bonferroni quantile for m simultaneous comparisons at level alpha.
double bonferroni_z(std::size_t m, double alpha = 0.05);

}  // namespace glab
