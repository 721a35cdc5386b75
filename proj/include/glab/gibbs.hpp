#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "glab/harmonic.hpp"
#include "glab/lattice.hpp"
#include "glab/potential.hpp"
#include "glab/rng.hpp"
#include "glab/stats.hpp"

namespace glab {

/// Periodic height on the n x n torus with tilt u. The Hamiltonian is
/// sum_b V(grad h(b) + u . (head - tail)); the reported gradient field is
/// eta = grad h + u . (head - tail). Gauge: h(0, 0) = 0.
struct TorusField {
  TorusDomain torus{2};
  Potential potential;
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  Eigen::ArrayXXd h;  // h(i, j)
  double time = 0.0;
  double dt = 0.01;

  /// Flat start h = 0; dt <= 0 selects default_dt(p).
  static TorusField make(int n, Potential p, Eigen::Vector2d u = Eigen::Vector2d::Zero(), double dt = 0.0);

  /// eta on the canonical bond with tail s.
  double eta(Site s, Orientation o) const;
};

/// eta on every canonical bond, indexed by tail site.
struct GradientSample {
  Eigen::ArrayXXd horizontal;
  Eigen::ArrayXXd vertical;

  int side() const { return static_cast<int>(horizontal.rows()); }
  /// eta on the canonical bond with tail s (periodic).
  double operator()(Site s, Orientation o) const;
};

GradientSample gradient_field(const TorusField& s);

/// sum over bonds at x, oriented away from x, of V'(eta(b)).
double torus_drift(const TorusField& s, Site x);

/// `steps` Euler-Maruyama steps with the gauge re-fixed after each one.
void torus_advance(TorusField& s, Rng& rng, long steps);
TorusField torus_step(TorusField s, Rng& rng);

/// Shifts h so that h(anchor) = 0; eta is unchanged.
void regauge(TorusField& s, Site anchor);

struct TiltEstimate {
  Estimate a1;  // E V''(eta(0, e1))
  Estimate a2;  // E V''(eta(0, e2))
  Beta beta;    // (a1, a2), unnormalized
  double mean_eta1 = 0.0;
  double mean_eta2 = 0.0;
  double lag1_autocorrelation = 0.0;  // of the thinned a1 series
  long samples = 0;
  int side = 0;
};

struct TiltOptions {
  double burn = 0.0;  // time units; 0: 0.5 n^2
  long samples = 1000;
  double thin = 2.0;  // time units between samples
  double dt = 0.0;    // 0: default_dt
};

/// a_u(b) = E V''(eta(b)), averaged over all bonds of each orientation and
/// over thinned stationary samples of one chain; batch-means errors.
TiltEstimate estimate_a_u(int n, const Potential& p, Eigen::Vector2d u, const TiltOptions& opt, Rng& rng);

enum class Axis { horizontal, vertical };

/// Canonical bond of the torus.
struct TorusBond {
  Site tail;
  Orientation orientation;
};

/// Image of a bond under x -> (-x1, x2) (horizontal) or (x1, -x2)
/// (vertical), as a canonical bond.
TorusBond reflect(TorusBond b, Axis axis);

/// Default bond pattern of the reflection test: two horizontal and two
/// vertical bonds near the origin, not symmetric under either reflection.
std::vector<TorusBond> default_pattern();

struct ReflectionReport {
  KsResult ks;
  std::vector<double> original;   // pattern averages, even-indexed samples
  std::vector<double> reflected;  // reflected-pattern averages, odd-indexed samples
};

/// Two-sample KS test comparing the pattern average of f(eta) with the
/// average over the reflected pattern. Even-indexed samples feed the first
/// sample and odd-indexed ones the second, so the two are independent.
/// `shift` is added to the reflected values (0 in real runs; a positive
/// shift gives the power control).
ReflectionReport reflection_test(const std::vector<GradientSample>& samples, Axis axis,
                                 const std::function<double(double)>& f, const std::vector<TorusBond>& pattern,
                                 double shift = 0.0);

/// Stationary samples of eta with `thin` time units between them.
std::vector<GradientSample> sample_gradients(int n, const Potential& p, Eigen::Vector2d u, const TiltOptions& opt,
                                             Rng& rng);

/// Var(eta(b)) for V = x^2 / 2 and u = 0 from the eigenvalues of the torus
/// Laplacian; dt > 0 gives the Euler-Maruyama stationary value instead of the
/// continuum one.
double torus_gradient_variance(int n, Orientation o, double dt = 0.0);

}  // namespace glab
