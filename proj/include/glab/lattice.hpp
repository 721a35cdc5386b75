#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace glab {

struct Site {
  int i = 0;
  int j = 0;

  friend constexpr auto operator<=>(const Site&, const Site&) = default;
  constexpr Site operator+(Site o) const { return {i + o.i, j + o.j}; }
  constexpr Site operator-(Site o) const { return {i - o.i, j - o.j}; }
};

inline constexpr Site kE1{1, 0};
inline constexpr Site kE2{0, 1};

enum class Orientation : std::uint8_t { horizontal, vertical };

/// Oriented nearest-neighbor bond. Domains store bonds canonically, with
/// head - tail equal to e1 (horizontal) or e2 (vertical).
struct Bond {
  Site tail;
  Site head;
  Orientation orientation = Orientation::horizontal;

  static constexpr Bond canonical(Site tail, Orientation o) {
    return {tail, tail + (o == Orientation::horizontal ? kE1 : kE2), o};
  }
  constexpr Bond reversed() const { return {head, tail, orientation}; }
  constexpr bool is_canonical() const {
    return head - tail == (orientation == Orientation::horizontal ? kE1 : kE2);
  }
  friend constexpr bool operator==(const Bond&, const Bond&) = default;
};

/// Height values on the padded bounding box of a domain (one cell of margin
/// around the interior). Interior and boundary cells carry h v psi; cells
/// outside D u dD hold NaN.
using GridField = Eigen::ArrayXXd;

/// Finite connected subgraph D of Z^2 with its outer vertex boundary.
///
/// Stored as a dense mask over the padded bounding box plus index tables;
/// immutable after construction.
class LatticeDomain {
 public:
  enum class Cell : std::uint8_t { outside, interior, boundary };

  /// Incident active bonds of an interior site, in the order right, up,
  /// left, down. `sign` is +1 when the site is the bond's tail.
  struct Incidence {
    std::array<Eigen::Index, 4> bond;
    std::array<Eigen::Index, 4> neighbor_cell;
    std::array<double, 4> sign;
  };

  /// Active bonds are the interior bonds followed by the crossing bonds.
  struct BondCells {
    Eigen::Index tail;
    Eigen::Index head;
  };

  LatticeDomain() = default;

  /// Builds the domain spanned by `interior`. Throws if the set is not
  /// connected unless `require_connected` is false.
  static LatticeDomain from_sites(std::vector<Site> interior, bool require_connected = true);

  bool empty() const { return interior_.empty(); }
  bool connected() const { return connected_; }
  /// Extent of the interior bounding box, max(width, height).
  int diameter() const { return diameter_; }

  std::span<const Site> interior() const { return interior_; }
  std::span<const Site> boundary() const { return boundary_; }
  std::span<const Bond> interior_bonds() const { return interior_bonds_; }
  /// All of dD*: bonds inside dD and bonds joining dD to D.
  std::span<const Bond> boundary_bonds() const { return boundary_bonds_; }
  /// The part of dD* joining dD to D.
  std::span<const Bond> crossing_bonds() const { return crossing_bonds_; }

  bool contains(Site s) const { return kind(s) == Cell::interior; }
  bool is_boundary(Site s) const { return kind(s) == Cell::boundary; }
  Cell kind(Site s) const {
    return in_grid(s) ? mask_[static_cast<std::size_t>(cell(s))] : Cell::outside;
  }
  /// Position of `s` in interior(), or -1.
  Eigen::Index interior_index(Site s) const {
    return in_grid(s) ? interior_index_[static_cast<std::size_t>(cell(s))] : -1;
  }

  // Grid addressing: cell = (i - origin.i) + (j - origin.j) * grid_width.
  Site origin() const { return origin_; }
  int grid_width() const { return width_; }
  int grid_height() const { return height_; }
  bool in_grid(Site s) const {
    return s.i >= origin_.i && s.j >= origin_.j && s.i < origin_.i + width_ && s.j < origin_.j + height_;
  }
  Eigen::Index cell(Site s) const {
    return static_cast<Eigen::Index>(s.i - origin_.i) + static_cast<Eigen::Index>(s.j - origin_.j) * width_;
  }
  Site site_at(Eigen::Index cell) const {
    return {origin_.i + static_cast<int>(cell % width_), origin_.j + static_cast<int>(cell / width_)};
  }
  Cell cell_kind(Eigen::Index cell) const { return mask_[static_cast<std::size_t>(cell)]; }

  std::span<const Eigen::Index> interior_cells() const { return interior_cells_; }
  std::span<const Eigen::Index> boundary_cells() const { return boundary_cells_; }
  std::span<const BondCells> active_bond_cells() const { return active_cells_; }
  Eigen::Index active_bond_count() const { return static_cast<Eigen::Index>(active_cells_.size()); }
  /// Active bond k as a Bond value.
  Bond active_bond(Eigen::Index k) const;
  /// Index of a canonical active bond, or -1.
  Eigen::Index active_bond_index(const Bond& b) const;
  /// Parallel to interior().
  std::span<const Incidence> incidence() const { return incidence_; }

  /// Grid with `interior_value` on D, `boundary_value` on dD, NaN elsewhere.
  GridField make_field(double interior_value = 0.0, double boundary_value = 0.0) const;

 private:
  std::vector<Site> interior_;
  std::vector<Site> boundary_;
  std::vector<Bond> interior_bonds_;
  std::vector<Bond> boundary_bonds_;
  std::vector<Bond> crossing_bonds_;
  int diameter_ = 0;
  bool connected_ = true;

  Site origin_{0, 0};
  int width_ = 0;
  int height_ = 0;
  std::vector<Cell> mask_;
  std::vector<Eigen::Index> interior_index_;
  std::vector<Eigen::Index> interior_cells_;
  std::vector<Eigen::Index> boundary_cells_;
  std::vector<BondCells> active_cells_;
  std::vector<Eigen::Index> horizontal_bond_at_;  // per cell, bond with that tail, or -1
  std::vector<Eigen::Index> vertical_bond_at_;
  std::vector<Incidence> incidence_;
};

/// Interior {0..width-1} x {0..height-1}.
LatticeDomain build_rectangle(int width, int height);

/// Interior { x in Z^2 : |x|_2 <= radius }.
LatticeDomain build_disk(double radius);

/// Interior from a text grid of 0/1 rows. The first row is the top (largest j);
/// column c of row r maps to site (c, rows - 1 - r).
LatticeDomain build_from_mask(const std::string& text);

/// Euclidean distance from `x` to the outermost interior layer: the distance
/// to the nearest boundary vertex minus one (0 for sites adjacent to dD).
double boundary_distance(const LatticeDomain& d, Site x);

/// D(r) = { x in D : boundary_distance(x) >= r }. May be empty or
/// disconnected; check empty() / connected().
LatticeDomain inner_region(const LatticeDomain& d, double r);

/// Half-open annulus { x in D : r1 <= boundary_distance(x) < r2 }; r2 may be
/// +infinity.
std::vector<Site> annulus(const LatticeDomain& d, double r1, double r2);

/// grad h(b) = h(head) - h(tail). Throws if either endpoint has no value.
template <typename Derived>
double gradient(const LatticeDomain& d, const Eigen::ArrayBase<Derived>& field, const Bond& b) {
  if (!d.in_grid(b.tail) || !d.in_grid(b.head))
    throw std::out_of_range("gradient: bond endpoint outside the domain grid");
  const double head = field.derived().data()[d.cell(b.head)];
  const double tail = field.derived().data()[d.cell(b.tail)];
  if (std::isnan(head) || std::isnan(tail)) throw std::invalid_argument("gradient: endpoint has no value");
  return head - tail;
}

/// Interior values in interior() order.
Eigen::VectorXd interior_vector(const LatticeDomain& d, const GridField& field);
/// Writes `values` (interior() order) into the interior cells of `field`.
void set_interior(const LatticeDomain& d, GridField& field, const Eigen::Ref<const Eigen::VectorXd>& values);

/// Periodic n x n torus; every site has degree 4 and there are 2 n^2 bonds.
struct TorusDomain {
  int n = 0;

  explicit TorusDomain(int side) : n(side) {
    if (side < 2) throw std::invalid_argument("TorusDomain: side must be at least 2");
  }
  int site_count() const { return n * n; }
  int bond_count() const { return 2 * n * n; }
  Site wrap(Site s) const { return {((s.i % n) + n) % n, ((s.j % n) + n) % n}; }
};

}  // namespace glab
