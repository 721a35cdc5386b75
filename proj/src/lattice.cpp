#include "glab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace glab {

LatticeDomain LatticeDomain::from_sites(std::vector<Site> interior, bool require_connected) {
  LatticeDomain d;
  std::sort(interior.begin(), interior.end(),
            [](Site a, Site b) { return a.j != b.j ? a.j < b.j : a.i < b.i; });
  interior.erase(std::unique(interior.begin(), interior.end()), interior.end());
  if (interior.empty()) return d;

  int min_i = interior.front().i, max_i = min_i;
  int min_j = interior.front().j, max_j = interior.back().j;
  for (const Site& s : interior) {
    min_i = std::min(min_i, s.i);
    max_i = std::max(max_i, s.i);
  }
  d.diameter_ = std::max(max_i - min_i + 1, max_j - min_j + 1);
  d.origin_ = {min_i - 1, min_j - 1};
  d.width_ = max_i - min_i + 3;
  d.height_ = max_j - min_j + 3;

  const auto cells = static_cast<std::size_t>(d.width_) * static_cast<std::size_t>(d.height_);
  d.mask_.assign(cells, Cell::outside);
  d.interior_index_.assign(cells, -1);
  for (const Site& s : interior) d.mask_[static_cast<std::size_t>(d.cell(s))] = Cell::interior;

  // Raster order over the grid gives interior() and boundary() in row-major order.
  constexpr std::array<Site, 4> steps{kE1, kE2, Site{-1, 0}, Site{0, -1}};
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(cells); ++c) {
    const Site s = d.site_at(c);
    if (d.mask_[static_cast<std::size_t>(c)] == Cell::interior) {
      d.interior_index_[static_cast<std::size_t>(c)] = static_cast<Eigen::Index>(d.interior_.size());
      d.interior_.push_back(s);
      d.interior_cells_.push_back(c);
      continue;
    }
    const bool touches = std::any_of(steps.begin(), steps.end(), [&](Site e) {
      const Site n = s + e;
      return d.in_grid(n) && d.mask_[static_cast<std::size_t>(d.cell(n))] == Cell::interior;
    });
    if (touches) d.mask_[static_cast<std::size_t>(c)] = Cell::boundary;
  }
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(cells); ++c) {
    if (d.mask_[static_cast<std::size_t>(c)] == Cell::boundary) {
      d.boundary_.push_back(d.site_at(c));
      d.boundary_cells_.push_back(c);
    }
  }

  // Bonds, canonical orientation.
  std::vector<Bond> crossing;
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(cells); ++c) {
    const Cell k = d.mask_[static_cast<std::size_t>(c)];
    if (k == Cell::outside) continue;
    const Site s = d.site_at(c);
    for (Orientation o : {Orientation::horizontal, Orientation::vertical}) {
      const Bond b = Bond::canonical(s, o);
      const Cell kh = d.kind(b.head);
      if (kh == Cell::outside) continue;
      if (k == Cell::interior && kh == Cell::interior) {
        d.interior_bonds_.push_back(b);
      } else {
        d.boundary_bonds_.push_back(b);
        if (k == Cell::interior || kh == Cell::interior) crossing.push_back(b);
      }
    }
  }
  d.crossing_bonds_ = std::move(crossing);

  d.horizontal_bond_at_.assign(cells, -1);
  d.vertical_bond_at_.assign(cells, -1);
  auto register_bond = [&](const Bond& b) {
    const auto k = static_cast<Eigen::Index>(d.active_cells_.size());
    d.active_cells_.push_back({d.cell(b.tail), d.cell(b.head)});
    auto& table = b.orientation == Orientation::horizontal ? d.horizontal_bond_at_ : d.vertical_bond_at_;
    table[static_cast<std::size_t>(d.cell(b.tail))] = k;
  };
  for (const Bond& b : d.interior_bonds_) register_bond(b);
  for (const Bond& b : d.crossing_bonds_) register_bond(b);

  d.incidence_.reserve(d.interior_.size());
  for (const Site& s : d.interior_) {
    Incidence inc{};
    const Site left = s - kE1, down = s - kE2;
    inc.bond = {d.horizontal_bond_at_[static_cast<std::size_t>(d.cell(s))],
                d.vertical_bond_at_[static_cast<std::size_t>(d.cell(s))],
                d.horizontal_bond_at_[static_cast<std::size_t>(d.cell(left))],
                d.vertical_bond_at_[static_cast<std::size_t>(d.cell(down))]};
    inc.neighbor_cell = {d.cell(s + kE1), d.cell(s + kE2), d.cell(left), d.cell(down)};
    inc.sign = {1.0, 1.0, -1.0, -1.0};
    d.incidence_.push_back(inc);
  }

  // Connectivity of the interior.
  std::vector<char> seen(d.interior_.size(), 0);
  std::deque<std::size_t> queue{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const std::size_t k = queue.front();
    queue.pop_front();
    for (Site e : steps) {
      const Eigen::Index n = d.interior_index(d.interior_[k] + e);
      if (n >= 0 && !seen[static_cast<std::size_t>(n)]) {
        seen[static_cast<std::size_t>(n)] = 1;
        ++reached;
        queue.push_back(static_cast<std::size_t>(n));
      }
    }
  }
  d.connected_ = reached == d.interior_.size();
  if (require_connected && !d.connected_) throw std::invalid_argument("LatticeDomain: interior is not connected");
  return d;
}

Bond LatticeDomain::active_bond(Eigen::Index k) const {
  const auto n_interior = static_cast<Eigen::Index>(interior_bonds_.size());
  return k < n_interior ? interior_bonds_[static_cast<std::size_t>(k)]
                        : crossing_bonds_[static_cast<std::size_t>(k - n_interior)];
}

Eigen::Index LatticeDomain::active_bond_index(const Bond& b) const {
  if (!b.is_canonical() || !in_grid(b.tail)) return -1;
  const auto& table = b.orientation == Orientation::horizontal ? horizontal_bond_at_ : vertical_bond_at_;
  return table[static_cast<std::size_t>(cell(b.tail))];
}

GridField LatticeDomain::make_field(double interior_value, double boundary_value) const {
  GridField f = GridField::Constant(width_, height_, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index c : interior_cells_) f.data()[c] = interior_value;
  for (Eigen::Index c : boundary_cells_) f.data()[c] = boundary_value;
  return f;
}

LatticeDomain build_rectangle(int width, int height) {
  if (width < 1 || height < 1) throw std::invalid_argument("build_rectangle: dimensions must be positive");
  std::vector<Site> sites;
  sites.reserve(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int j = 0; j < height; ++j)
    for (int i = 0; i < width; ++i) sites.push_back({i, j});
  return LatticeDomain::from_sites(std::move(sites));
}

LatticeDomain build_disk(double radius) {
  if (!(radius >= 1.0)) throw std::invalid_argument("build_disk: radius must be at least 1");
  const int r = static_cast<int>(std::floor(radius));
  const double r2 = radius * radius;
  std::vector<Site> sites;
  for (int j = -r; j <= r; ++j)
    for (int i = -r; i <= r; ++i)
      if (static_cast<double>(i * i + j * j) <= r2 * (1.0 + 1e-12)) sites.push_back({i, j});
  return LatticeDomain::from_sites(std::move(sites));
}

LatticeDomain build_from_mask(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::string row;
    for (char ch : line) {
      if (ch == '0' || ch == '1') {
        row.push_back(ch);
      } else if (ch != ' ' && ch != '\t' && ch != '\r' && ch != ',') {
        throw std::invalid_argument(std::string("build_from_mask: unexpected character '") + ch + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  std::vector<Site> sites;
  const int n_rows = static_cast<int>(rows.size());
  for (int r = 0; r < n_rows; ++r)
    for (int c = 0; c < static_cast<int>(rows[static_cast<std::size_t>(r)].size()); ++c)
      if (rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '1') sites.push_back({c, n_rows - 1 - r});
  if (sites.empty()) throw std::invalid_argument("build_from_mask: mask selects no sites");
  return LatticeDomain::from_sites(std::move(sites));
}

double boundary_distance(const LatticeDomain& d, Site x) {
  double best = std::numeric_limits<double>::infinity();
  for (const Site& y : d.boundary()) {
    const double di = x.i - y.i, dj = x.j - y.j;
    best = std::min(best, di * di + dj * dj);
  }
  return std::sqrt(best) - 1.0;
}

LatticeDomain inner_region(const LatticeDomain& d, double r) {
  if (!(r >= 0.0)) throw std::invalid_argument("inner_region: r must be nonnegative");
  std::vector<Site> kept;
  for (const Site& x : d.interior())
    if (boundary_distance(d, x) >= r) kept.push_back(x);
  return LatticeDomain::from_sites(std::move(kept), /*require_connected=*/false);
}

std::vector<Site> annulus(const LatticeDomain& d, double r1, double r2) {
  if (!(r1 >= 0.0) || !(r1 < r2)) throw std::invalid_argument("annulus: need 0 <= r1 < r2");
  std::vector<Site> out;
  for (const Site& x : d.interior()) {
    const double dist = boundary_distance(d, x);
    if (dist >= r1 && dist < r2) out.push_back(x);
  }
  return out;
}

Eigen::VectorXd interior_vector(const LatticeDomain& d, const GridField& field) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d.interior().size()));
  const auto cells = d.interior_cells();
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = field.data()[cells[static_cast<std::size_t>(k)]];
  return v;
}

void set_interior(const LatticeDomain& d, GridField& field, const Eigen::Ref<const Eigen::VectorXd>& values) {
  const auto cells = d.interior_cells();
  if (values.size() != static_cast<Eigen::Index>(cells.size()))
    throw std::invalid_argument("set_interior: size mismatch");
  for (Eigen::Index k = 0; k < values.size(); ++k) field.data()[cells[static_cast<std::size_t>(k)]] = values[k];
}

}  // namespace glab
