#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "glab/lattice.hpp"
#include "glab/potential.hpp"

namespace glab {

/// Axis weights of the anisotropic Laplacian: b1 on e1 bonds, b2 on e2 bonds.
struct Beta {
  double b1 = 1.0;
  double b2 = 1.0;

  Beta() = default;
  Beta(double horizontal, double vertical) : b1(horizontal), b2(vertical) {
    if (!(b1 > 0) || !(b2 > 0)) throw std::invalid_argument("Beta: weights must be positive");
  }
  double along(Orientation o) const { return o == Orientation::horizontal ? b1 : b2; }
};

/// Conductances on the bonds touching a domain, stored per tail cell of the
/// domain grid (one array per orientation). Bonds not touching D are 0.
class BondWeights {
 public:
  BondWeights() = default;
  static BondWeights uniform(const LatticeDomain& d, double w);
  static BondWeights from_beta(const LatticeDomain& d, Beta beta);
  /// omega(b) = V''(grad h(b)) on every active bond.
  static BondWeights from_field(const LatticeDomain& d, const Potential& p, const GridField& h);

  /// Weight of a bond in either orientation; 0 for bonds outside the grid.
  double operator()(const Bond& b) const;
  void set(const Bond& b, double w);

  Site origin() const { return origin_; }
  const Eigen::ArrayXXd& horizontal() const { return horizontal_; }
  const Eigen::ArrayXXd& vertical() const { return vertical_; }
  Eigen::ArrayXXd& horizontal() { return horizontal_; }
  Eigen::ArrayXXd& vertical() { return vertical_; }

 private:
  explicit BondWeights(const LatticeDomain& d);
  Site origin_{0, 0};
  Eigen::ArrayXXd horizontal_;  // bond cell -> cell + e1
  Eigen::ArrayXXd vertical_;    // bond cell -> cell + e2
};

/// Delta^beta f(x). Throws if a stencil value is missing.
double apply_delta_beta(const LatticeDomain& d, const GridField& f, Site x, Beta beta);

/// Delta^omega f(x) = sum over bonds b at x, oriented away from x, of omega(b) grad f(b).
double apply_laplacian(const LatticeDomain& d, const BondWeights& w, const GridField& f, Site x);

/// Interior precision -Delta^omega with zero boundary, rows in interior() order.
Eigen::SparseMatrix<double> precision_matrix(const LatticeDomain& d, const BondWeights& w);

/// Boundary contribution to -Delta^omega: rhs(x) = sum over crossing bonds at
/// x of omega(b) psi(y). The omega-harmonic extension u solves Q u = rhs.
Eigen::VectorXd boundary_source(const LatticeDomain& d, const BondWeights& w, const GridField& psi);

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, long iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  long iterations() const { return iterations_; }

 private:
  double residual_;
  long iterations_;
};

enum class SolverChoice { automatic, direct, iterative };

struct HarmonicOptions {
  double tol = 1e-8;
  SolverChoice solver = SolverChoice::automatic;
  long max_iterations = 0;  // 0: 100 R^2
};

/// Sites up to which the automatic choice uses a sparse direct solve.
inline constexpr std::size_t kDirectSolveLimit = 2500;

/// Omega-harmonic extension of the boundary values of `psi` (interior cells
/// of psi are ignored). The result satisfies |Delta^omega u| <= tol max(1,
/// osc psi) on D. Throws ConvergenceError if the relaxation stalls.
GridField weighted_harmonic_extend(const LatticeDomain& d, const BondWeights& w, const GridField& psi,
                                   const HarmonicOptions& opt = {});

/// Delta^beta-harmonic extension.
GridField harmonic_extend(const LatticeDomain& d, const GridField& psi, Beta beta = {}, double tol = 1e-8);

/// Largest |Delta^omega u(x)| over the interior.
double max_residual(const LatticeDomain& d, const BondWeights& w, const GridField& u);

/// Green's function G = (-Delta^omega)^{-1} on the interior (zero boundary).
struct GreensTable {
  std::shared_ptr<const LatticeDomain> domain;
  Eigen::MatrixXd g;  // interior() order

  /// G(x, y); 0 when either site is not interior.
  double operator()(Site x, Site y) const;
  /// nu^T G nu for a weight vector in interior() order.
  double quadratic_form(const Eigen::VectorXd& nu) const { return nu.dot(g * nu); }
};

GreensTable greens_function(std::shared_ptr<const LatticeDomain> d, const BondWeights& w);

enum class BondSet { interior, interior_and_crossing };

/// sum_b omega(b) (grad f(b))^2 over the chosen bond set.
double dirichlet_energy(const GridField& f, const LatticeDomain& d, const BondWeights& w,
                        BondSet bonds = BondSet::interior_and_crossing);
/// Bilinear form sum_b omega(b) grad f(b) grad g(b).
double dirichlet_product(const GridField& f, const GridField& g, const LatticeDomain& d, const BondWeights& w,
                         BondSet bonds = BondSet::interior_and_crossing);

/// Which axis carries b1 in the hitting experiment.
enum class BeurlingConvention { beta1_horizontal, beta1_vertical };

struct BeurlingReport {
  double p_hat = 0.0;
  double std_error = 0.0;
  std::optional<double> exact;  // absorbing-chain value when the chain is small
  long walks = 0;
  BeurlingConvention convention = BeurlingConvention::beta1_horizontal;
};

/// Half-line {(k, 0) : k <= 0}.
inline bool half_line(Site s) { return s.j == 0 && s.i <= 0; }

/// Probability that the embedded chain of the beta-walk started at x leaves
/// the ball |X - x| < r before it hits the obstacle.
BeurlingReport beurling_experiment(const std::function<bool(Site)>& obstacle, Site x, double r, Beta beta,
                                   long walks, std::uint64_t seed,
                                   BeurlingConvention convention = BeurlingConvention::beta1_horizontal);

/// States of the absorbing chain above this many are not solved exactly.
inline constexpr std::size_t kBeurlingExactLimit = 400;

}  // namespace glab
