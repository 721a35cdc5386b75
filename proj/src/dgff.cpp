#include "glab/dgff.hpp"

#include <stdexcept>

namespace glab {

DgffSampler DgffSampler::build(std::shared_ptr<const LatticeDomain> d, BondWeights w, const GridField& boundary) {
  if (d->empty()) throw std::invalid_argument("DgffSampler: empty domain");
  DgffSampler s;
  s.precision_ = precision_matrix(*d, w);
  auto factor = std::make_shared<Factor>(s.precision_);
  if (factor->info() != Eigen::Success) throw std::runtime_error("DgffSampler: precision is not positive definite");
  s.factor_ = std::move(factor);

  s.mean_ = d->make_field();
  for (Eigen::Index c : d->boundary_cells()) {
    const double v = boundary.data()[c];
    if (std::isnan(v)) throw std::invalid_argument("DgffSampler: boundary value missing");
    s.mean_.data()[c] = v;
  }
  set_interior(*d, s.mean_, s.factor_->solve(boundary_source(*d, w, boundary)));
  s.domain_ = std::move(d);
  s.weights_ = std::move(w);
  return s;
}

Eigen::VectorXd DgffSampler::sample_fluctuation(Rng& rng) const {
  Eigen::VectorXd z(precision_.rows());
  for (auto& v : z) v = rng.normal();
  factor_->matrixU().solveInPlace(z);
  return z;
}

GridField DgffSampler::sample(Rng& rng) const {
  GridField h = mean_;
  const Eigen::VectorXd x = sample_fluctuation(rng);
  const auto cells = domain_->interior_cells();
  for (Eigen::Index k = 0; k < x.size(); ++k) h.data()[cells[static_cast<std::size_t>(k)]] += x[k];
  return h;
}

GridField DgffSampler::conditional_resample(const GridField& field, const std::vector<Site>& w, Rng& rng) const {
  for (const Site& s : w)
    if (!domain_->contains(s)) throw std::invalid_argument("conditional_resample: W must lie in the interior");
  GridField out = field;
  if (w.empty()) return out;

  auto sub = std::make_shared<const LatticeDomain>(LatticeDomain::from_sites(w, /*require_connected=*/false));
  BondWeights sub_w = BondWeights::uniform(*sub, 0.0);
  GridField sub_psi = sub->make_field();
  for (const auto& cells : sub->active_bond_cells()) {
    const Bond b = {sub->site_at(cells.tail), sub->site_at(cells.head),
                    cells.head - cells.tail == 1 ? Orientation::horizontal : Orientation::vertical};
    sub_w.set(b, weights_(b));
  }
  for (Eigen::Index c : sub->boundary_cells()) sub_psi.data()[c] = field.data()[domain_->cell(sub->site_at(c))];

  const GridField draw = build(sub, std::move(sub_w), sub_psi).sample(rng);
  for (Eigen::Index c : sub->interior_cells()) out.data()[domain_->cell(sub->site_at(c))] = draw.data()[c];
  return out;
}

}  // namespace glab
