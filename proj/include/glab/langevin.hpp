#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "glab/harmonic.hpp"
#include "glab/lattice.hpp"
#include "glab/potential.hpp"
#include "glab/rng.hpp"

namespace glab {

/// Height field evolving under the Langevin dynamics. Boundary cells of `h`
/// hold the pinned values psi and never change.
struct FieldState {
  std::shared_ptr<const LatticeDomain> domain;
  Potential potential;
  GridField h;
  double time = 0.0;
  double dt = 0.01;

  /// Interior starts at `interior_value`; dt <= 0 selects default_dt(p).
  static FieldState make(std::shared_ptr<const LatticeDomain> d, Potential p, const GridField& boundary,
                         double dt = 0.0, double interior_value = 0.0);
};

/// Components driven by the same Gaussian increments at every site.
struct CouplingState {
  std::vector<FieldState> components;

  double time() const { return components.front().time; }
  double dt() const { return components.front().dt; }
  const LatticeDomain& domain() const { return *components.front().domain; }
};

/// Checks the shared domain, potential, dt and clock of a coupling.
void validate_coupling(const CouplingState& c);

/// sum over bonds b at x, oriented away from x, of V'(grad(h v psi)(b)).
double drift(const FieldState& s, Site x);

/// Multiplies the Gaussian increments; 0 turns the scheme into the
/// deterministic gradient flow (test hook).
struct StepOptions {
  double noise_scale = 1.0;
};

/// One Euler-Maruyama step driven by the given standard normals (interior()
/// order). Throws std::runtime_error when the field stops being finite.
void step_with_noise(FieldState& s, const Eigen::Ref<const Eigen::VectorXd>& xi, double noise_scale = 1.0);

/// `steps` Euler-Maruyama steps: h += dt drift + sqrt(2 dt) xi.
void advance(FieldState& s, Rng& rng, long steps, const StepOptions& opt = {});
void advance(CouplingState& c, Rng& rng, long steps, const StepOptions& opt = {});

FieldState em_step(FieldState s, Rng& rng, const StepOptions& opt = {});
CouplingState coupled_step(CouplingState c, Rng& rng, const StepOptions& opt = {});

/// Steps needed to cover a time span at step dt.
long steps_for(double span, double dt);

/// Evolves for a further time T.
void burn_in(FieldState& s, double horizon, Rng& rng);
void burn_in(CouplingState& c, double horizon, Rng& rng);

/// Runs `count` thinned samples: `gap` steps between calls of `visit`.
void sample_thinned(FieldState& s, Rng& rng, long gap, long count, const std::function<void(const FieldState&)>& visit);

/// Difference h1 - h2 of a two-component coupling, on D u dD.
GridField difference(const CouplingState& c);

/// Per-step record of the difference field of a two-component coupling.
struct CouplingTrace {
  std::vector<double> times;
  std::vector<double> mass;           // sum_x hbar^2
  std::vector<double> bulk_energy;    // sum over D* of (grad hbar)^2
  std::vector<double> crossing_energy;  // sum over crossing bonds of (grad hbar)^2
  std::vector<double> boundary_flux;  // sum over crossing bonds of |psibar(y_b)| |grad hbar(b)|
  std::vector<double> sup_norm;       // max_x |hbar|
};

CouplingTrace record_coupling(CouplingState& c, double horizon, Rng& rng, long record_every = 1);

struct EnergyReport {
  double lhs = 0.0;       // sum hbar_T^2 + 2 a_V int sum_{D*} (grad hbar)^2
  double rhs0 = 0.0;      // sum hbar_0^2
  double boundary = 0.0;  // int sum_{crossing} |psibar| |grad hbar|
  double slack = 0.05;
  double boundary_constant = 0.0;  // C_B = 2 A_V
  double ratio = 0.0;              // (lhs - rhs0) / boundary, 0 when boundary = 0
  bool pass = false;
};

/// Trapezoid-in-time version of the energy inequality for a recorded trace.
EnergyReport energy_inequality_report(const CouplingTrace& trace, const Potential& p, double slack = 0.05);

/// (E M^p)^{1/p} with M = max_x |h(x) - hhat(x)|, hhat the harmonic extension
/// of the boundary values.
struct MaxMoments {
  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
  long samples = 0;
};

MaxMoments maximum_moments(FieldState s, Rng& rng, double burn, long gap, long samples);

/// Exact stationary covariance of the Euler-Maruyama chain for V = x^2 / 2:
/// Q^{-1} (I - dt Q / 2)^{-1}, Q = -Delta on the interior.
Eigen::MatrixXd em_stationary_covariance(const LatticeDomain& d, double dt);

}  // namespace glab
