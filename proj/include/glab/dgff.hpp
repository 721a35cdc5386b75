#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseCholesky>

#include "glab/harmonic.hpp"
#include "glab/lattice.hpp"
#include "glab/rng.hpp"

namespace glab {

/// Exact sampler for the DGFF with conductances omega and boundary psi:
/// mean = omega-harmonic extension of psi, covariance = (-Delta^omega)^{-1}.
class DgffSampler {
 public:
  using Factor = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>>;

  static DgffSampler build(std::shared_ptr<const LatticeDomain> d, BondWeights w, const GridField& boundary);

  /// One exact draw on D u dD (boundary cells carry psi).
  GridField sample(Rng& rng) const;
  /// Zero-mean part only, interior() order: L^{-T} z.
  Eigen::VectorXd sample_fluctuation(Rng& rng) const;

  /// Replaces the values on W by an exact draw from the conditional law given
  /// the rest of `field`. W must lie in the interior.
  GridField conditional_resample(const GridField& field, const std::vector<Site>& w, Rng& rng) const;

  const LatticeDomain& domain() const { return *domain_; }
  std::shared_ptr<const LatticeDomain> domain_ptr() const { return domain_; }
  const BondWeights& weights() const { return weights_; }
  const GridField& boundary_mean() const { return mean_; }
  const Eigen::SparseMatrix<double>& precision() const { return precision_; }
  /// Lower factor L with L L^T = precision.
  Eigen::SparseMatrix<double> factor_l() const { return factor_->matrixL(); }

 private:
  std::shared_ptr<const LatticeDomain> domain_;
  BondWeights weights_;
  Eigen::SparseMatrix<double> precision_;
  std::shared_ptr<const Factor> factor_;
  GridField mean_;
};

}  // namespace glab
