#include "glab/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "glab/parallel.hpp"
#include "glab/rng.hpp"
#include "glab/stats.hpp"

namespace glab {

BondWeights::BondWeights(const LatticeDomain& d)
    : origin_(d.origin()),
      horizontal_(Eigen::ArrayXXd::Zero(d.grid_width(), d.grid_height())),
      vertical_(Eigen::ArrayXXd::Zero(d.grid_width(), d.grid_height())) {}

BondWeights BondWeights::uniform(const LatticeDomain& d, double w) {
  if (!(w >= 0)) throw std::invalid_argument("BondWeights: weights must be nonnegative");
  BondWeights bw(d);
  for (const auto& cells : d.active_bond_cells())
    (cells.head - cells.tail == 1 ? bw.horizontal_ : bw.vertical_).data()[cells.tail] = w;
  return bw;
}

BondWeights BondWeights::from_beta(const LatticeDomain& d, Beta beta) {
  BondWeights bw(d);
  for (const auto& cells : d.active_bond_cells()) {
    const bool horizontal = cells.head - cells.tail == 1;
    (horizontal ? bw.horizontal_ : bw.vertical_).data()[cells.tail] = horizontal ? beta.b1 : beta.b2;
  }
  return bw;
}

BondWeights BondWeights::from_field(const LatticeDomain& d, const Potential& p, const GridField& h) {
  BondWeights bw(d);
  p.visit([&](const auto& k) {
    for (const auto& cells : d.active_bond_cells()) {
      const double c = k.ddv(h.data()[cells.head] - h.data()[cells.tail]);
      (cells.head - cells.tail == 1 ? bw.horizontal_ : bw.vertical_).data()[cells.tail] = c;
    }
  });
  return bw;
}

namespace {

// Canonical tail cell of a bond in a grid of the given shape, or -1.
Eigen::Index tail_cell(const Bond& b, Site origin, Eigen::Index width, Eigen::Index height) {
  const Bond c = b.is_canonical() ? b : b.reversed();
  const Eigen::Index i = c.tail.i - origin.i, j = c.tail.j - origin.j;
  if (i < 0 || j < 0 || i >= width || j >= height) return -1;
  return i + j * width;
}

}  // namespace

double BondWeights::operator()(const Bond& b) const {
  const Eigen::Index c = tail_cell(b, origin_, horizontal_.rows(), horizontal_.cols());
  if (c < 0) return 0.0;
  return (b.orientation == Orientation::horizontal ? horizontal_ : vertical_).data()[c];
}

void BondWeights::set(const Bond& b, double w) {
  const Eigen::Index c = tail_cell(b, origin_, horizontal_.rows(), horizontal_.cols());
  if (c < 0) throw std::out_of_range("BondWeights::set: bond outside the grid");
  (b.orientation == Orientation::horizontal ? horizontal_ : vertical_).data()[c] = w;
}

namespace {

double stencil_value(const LatticeDomain& d, const GridField& f, Site s) {
  if (!d.in_grid(s)) throw std::out_of_range("stencil site outside the domain grid");
  const double v = f.data()[d.cell(s)];
  if (std::isnan(v)) throw std::invalid_argument("stencil site has no value");
  return v;
}

// Weights of the four bonds at an interior cell, order right, up, left, down.
std::array<double, 4> incident_weights(const BondWeights& w, Eigen::Index c, Eigen::Index width) {
  const double* h = w.horizontal().data();
  const double* v = w.vertical().data();
  return {h[c], v[c], h[c - 1], v[c - width]};
}

}  // namespace

double apply_delta_beta(const LatticeDomain& d, const GridField& f, Site x, Beta beta) {
  const double c = stencil_value(d, f, x);
  const double fe = stencil_value(d, f, x + kE1), fw = stencil_value(d, f, x - kE1);
  const double fn = stencil_value(d, f, x + kE2), fs = stencil_value(d, f, x - kE2);
  return beta.b1 * (fe + fw - 2 * c) + beta.b2 * (fn + fs - 2 * c);
}

double apply_laplacian(const LatticeDomain& d, const BondWeights& w, const GridField& f, Site x) {
  const double c = stencil_value(d, f, x);
  double s = 0.0;
  for (Site e : {kE1, kE2}) {
    const Orientation o = e == kE1 ? Orientation::horizontal : Orientation::vertical;
    s += w(Bond::canonical(x, o)) * (stencil_value(d, f, x + e) - c);
    s += w(Bond::canonical(x - e, o)) * (stencil_value(d, f, x - e) - c);
  }
  return s;
}

Eigen::SparseMatrix<double> precision_matrix(const LatticeDomain& d, const BondWeights& w) {
  const auto n = static_cast<Eigen::Index>(d.interior().size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(5 * n));
  const auto cells = d.interior_cells();
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index c = cells[static_cast<std::size_t>(k)];
    const auto ws = incident_weights(w, c, d.grid_width());
    const auto& inc = d.incidence()[static_cast<std::size_t>(k)];
    double diag = 0.0;
    for (int m = 0; m < 4; ++m) {
      diag += ws[m];
      const Site y = d.site_at(inc.neighbor_cell[m]);
      const Eigen::Index col = d.interior_index(y);
      if (col >= 0) trips.emplace_back(k, col, -ws[m]);
    }
    trips.emplace_back(k, k, diag);
  }
  Eigen::SparseMatrix<double> q(n, n);
  q.setFromTriplets(trips.begin(), trips.end());
  return q;
}

Eigen::VectorXd boundary_source(const LatticeDomain& d, const BondWeights& w, const GridField& psi) {
  const auto n = static_cast<Eigen::Index>(d.interior().size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  const auto cells = d.interior_cells();
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index c = cells[static_cast<std::size_t>(k)];
    const auto ws = incident_weights(w, c, d.grid_width());
    const auto& inc = d.incidence()[static_cast<std::size_t>(k)];
    for (int m = 0; m < 4; ++m) {
      if (d.cell_kind(inc.neighbor_cell[m]) != LatticeDomain::Cell::boundary) continue;
      const double v = psi.data()[inc.neighbor_cell[m]];
      if (std::isnan(v)) throw std::invalid_argument("boundary value missing");
      rhs[k] += ws[m] * v;
    }
  }
  return rhs;
}

double max_residual(const LatticeDomain& d, const BondWeights& w, const GridField& u) {
  double worst = 0.0;
  const auto cells = d.interior_cells();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const Eigen::Index c = cells[k];
    const auto ws = incident_weights(w, c, d.grid_width());
    const auto& inc = d.incidence()[k];
    double s = 0.0;
    for (int m = 0; m < 4; ++m) s += ws[m] * (u.data()[inc.neighbor_cell[m]] - u.data()[c]);
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

namespace {

double boundary_oscillation(const LatticeDomain& d, const GridField& psi) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index c : d.boundary_cells()) {
    const double v = psi.data()[c];
    if (std::isnan(v)) throw std::invalid_argument("harmonic_extend: boundary value missing");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return d.boundary_cells().empty() ? 0.0 : hi - lo;
}

// Red-black successive over-relaxation in place.
void relax(const LatticeDomain& d, const BondWeights& w, GridField& u, double target, long cap) {
  std::array<std::vector<std::size_t>, 2> colour;
  for (std::size_t k = 0; k < d.interior().size(); ++k) {
    const Site s = d.interior()[k];
    colour[static_cast<std::size_t>(((s.i + s.j) % 2 + 2) % 2)].push_back(k);
  }
  const double omega = 2.0 / (1.0 + std::sin(std::numbers::pi / (d.diameter() + 1.0)));
  const auto cells = d.interior_cells();
  double residual = max_residual(d, w, u);
  long it = 0;
  while (residual > target) {
    if (it >= cap)
      throw ConvergenceError("harmonic_extend: no convergence, residual " + std::to_string(residual), residual, it);
    for (int sweep = 0; sweep < 10; ++sweep, ++it) {
      for (const auto& list : colour) {
        for (std::size_t k : list) {
          const Eigen::Index c = cells[k];
          const auto ws = incident_weights(w, c, d.grid_width());
          const auto& inc = d.incidence()[k];
          double num = 0.0, den = 0.0;
          for (int m = 0; m < 4; ++m) {
            num += ws[m] * u.data()[inc.neighbor_cell[m]];
            den += ws[m];
          }
          u.data()[c] += omega * (num / den - u.data()[c]);
        }
      }
    }
    residual = max_residual(d, w, u);
  }
}

}  // namespace

GridField weighted_harmonic_extend(const LatticeDomain& d, const BondWeights& w, const GridField& psi,
                                   const HarmonicOptions& opt) {
  if (!(opt.tol > 0)) throw std::invalid_argument("harmonic_extend: tol must be positive");
  const double target = opt.tol * std::max(1.0, boundary_oscillation(d, psi));
  GridField u = d.make_field();
  for (Eigen::Index c : d.boundary_cells()) u.data()[c] = psi.data()[c];
  if (d.empty()) return u;

  const bool direct = opt.solver == SolverChoice::direct ||
                      (opt.solver == SolverChoice::automatic && d.interior().size() <= kDirectSolveLimit);
  const long cap = opt.max_iterations > 0 ? opt.max_iterations
                                          : 100L * static_cast<long>(d.diameter()) * d.diameter();
  if (direct) {
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>> llt(
        precision_matrix(d, w));
    if (llt.info() != Eigen::Success) throw std::runtime_error("harmonic_extend: factorization failed");
    set_interior(d, u, llt.solve(boundary_source(d, w, psi)));
  } else {
    // Start from the boundary mean.
    double mean = 0.0;
    for (Eigen::Index c : d.boundary_cells()) mean += psi.data()[c];
    mean /= static_cast<double>(d.boundary_cells().size());
    for (Eigen::Index c : d.interior_cells()) u.data()[c] = mean;
  }
  relax(d, w, u, target, cap);
  return u;
}

GridField harmonic_extend(const LatticeDomain& d, const GridField& psi, Beta beta, double tol) {
  HarmonicOptions opt;
  opt.tol = tol;
  return weighted_harmonic_extend(d, BondWeights::from_beta(d, beta), psi, opt);
}

double GreensTable::operator()(Site x, Site y) const {
  const Eigen::Index a = domain->interior_index(x), b = domain->interior_index(y);
  return (a < 0 || b < 0) ? 0.0 : g(a, b);
}

GreensTable greens_function(std::shared_ptr<const LatticeDomain> d, const BondWeights& w) {
  if (d->empty()) throw std::invalid_argument("greens_function: empty domain");
  const Eigen::MatrixXd q = precision_matrix(*d, w);
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw std::runtime_error("greens_function: precision is singular");
  GreensTable t;
  t.g = llt.solve(Eigen::MatrixXd::Identity(q.rows(), q.cols()));
  t.g = 0.5 * (t.g + t.g.transpose()).eval();
  t.domain = std::move(d);
  return t;
}

double dirichlet_product(const GridField& f, const GridField& g, const LatticeDomain& d, const BondWeights& w,
                         BondSet bonds) {
  const auto active = d.active_bond_cells();
  const std::size_t count = bonds == BondSet::interior ? d.interior_bonds().size() : active.size();
  double s = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const auto [t, h] = active[k];
    const double wt = (h - t == 1 ? w.horizontal() : w.vertical()).data()[t];
    s += wt * (f.data()[h] - f.data()[t]) * (g.data()[h] - g.data()[t]);
  }
  return s;
}

double dirichlet_energy(const GridField& f, const LatticeDomain& d, const BondWeights& w, BondSet bonds) {
  return dirichlet_product(f, f, d, w, bonds);
}

namespace {

struct SiteHash {
  std::size_t operator()(Site s) const {
    return std::hash<std::uint64_t>()((static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.i)) << 32) ^
                                      static_cast<std::uint32_t>(s.j));
  }
};

bool escaped(Site z, Site x, double r) {
  const double di = z.i - x.i, dj = z.j - x.j;
  return di * di + dj * dj >= r * r;
}

std::optional<double> absorbing_chain(const std::function<bool(Site)>& obstacle, Site x, double r, double ph) {
  std::unordered_map<Site, Eigen::Index, SiteHash> index;
  std::vector<Site> states{x};
  index[x] = 0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    for (Site e : {kE1, kE2, Site{-1, 0}, Site{0, -1}}) {
      const Site z = states[k] + e;
      if (obstacle(z) || escaped(z, x, r) || index.count(z)) continue;
      if (states.size() >= kBeurlingExactLimit) return std::nullopt;
      index[z] = static_cast<Eigen::Index>(states.size());
      states.push_back(z);
    }
  }
  const auto n = static_cast<Eigen::Index>(states.size());
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    trips.emplace_back(k, k, 1.0);
    for (Site e : {kE1, kE2, Site{-1, 0}, Site{0, -1}}) {
      const double p = 0.5 * (e.j == 0 ? ph : 1.0 - ph);
      const Site z = states[static_cast<std::size_t>(k)] + e;
      if (obstacle(z)) continue;
      if (escaped(z, x, r)) {
        rhs[k] += p;
      } else {
        trips.emplace_back(k, index.at(z), -p);
      }
    }
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(a);
  if (lu.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd p = lu.solve(rhs);
  return p[0];
}

}  // namespace

BeurlingReport beurling_experiment(const std::function<bool(Site)>& obstacle, Site x, double r, Beta beta,
                                   long walks, std::uint64_t seed, BeurlingConvention convention) {
  if (!(r > 0)) throw std::invalid_argument("beurling_experiment: r must be positive");
  if (walks < 1) throw std::invalid_argument("beurling_experiment: need at least one walk");
  BeurlingReport rep;
  rep.walks = walks;
  rep.convention = convention;
  if (obstacle(x)) {
    rep.exact = 0.0;  // the obstacle is hit at time 0
    return rep;
  }
  const double w_h = convention == BeurlingConvention::beta1_horizontal ? beta.b1 : beta.b2;
  const double w_v = convention == BeurlingConvention::beta1_horizontal ? beta.b2 : beta.b1;
  const double ph = w_h / (w_h + w_v);

  const auto hits = parallel_map(static_cast<std::size_t>(walks), [&](std::size_t k) {
    Rng rng = Rng::stream(seed, k);
    Site z = x;
    for (;;) {
      const double u = rng.uniform();
      if (u < ph) {
        z.i += u < 0.5 * ph ? 1 : -1;
      } else {
        z.j += u < ph + 0.5 * (1.0 - ph) ? 1 : -1;
      }
      if (obstacle(z)) return 0.0;
      if (escaped(z, x, r)) return 1.0;
    }
  });
  const Estimate e = iid_mean(hits);
  rep.p_hat = e.value;
  rep.std_error = e.std_error;
  rep.exact = absorbing_chain(obstacle, x, r, ph);
  return rep;
}

}  // namespace glab
