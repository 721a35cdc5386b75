#include <doctest.h>

#include <cmath>
#include <memory>

#include <Eigen/Dense>

#include "glab/harmonic.hpp"
#include "glab/rng.hpp"

using namespace glab;

namespace {

template <typename F>
GridField field_from(const LatticeDomain& d, F f) {
  GridField g = d.make_field();
  for (Eigen::Index c = 0; c < g.size(); ++c)
    if (d.cell_kind(c) != LatticeDomain::Cell::outside) g.data()[c] = f(d.site_at(c));
  return g;
}

GridField random_field(const LatticeDomain& d, Rng& rng, bool zero_boundary) {
  GridField g = field_from(d, [&](Site) { return rng.normal(); });
  if (zero_boundary)
    for (Eigen::Index c : d.boundary_cells()) g.data()[c] = 0.0;
  return g;
}

}  // namespace

TEST_CASE("Delta^beta stencil") {
  const auto d = build_rectangle(5, 5);
  const Site x{2, 2};
  const auto lin = field_from(d, [](Site s) { return 2.0 * s.i - 0.5 * s.j; });
  CHECK(apply_delta_beta(d, lin, x, Beta(3, 0.2)) == doctest::Approx(0.0));
  const auto sq = field_from(d, [](Site s) { return double(s.i * s.i); });
  CHECK(apply_delta_beta(d, sq, x, Beta()) == doctest::Approx(2.0));
  const auto saddle = field_from(d, [](Site s) { return double(s.i * s.i - s.j * s.j); });
  CHECK(apply_delta_beta(d, saddle, x, Beta(1, 1)) == doctest::Approx(0.0));
  CHECK(apply_delta_beta(d, saddle, x, Beta(2, 1)) == doctest::Approx(2.0));
  CHECK_THROWS(apply_delta_beta(d, saddle, Site{-1, 0}, Beta()));  // stencil leaves the grid
  CHECK_THROWS(Beta(0, 1));
}

TEST_CASE("harmonic extension") {
  const auto d = build_rectangle(12, 7);
  SUBCASE("constant boundary") {
    const auto u = harmonic_extend(d, field_from(d, [](Site) { return 3.5; }), Beta(2, 1));
    for (Eigen::Index c : d.interior_cells()) CHECK(u.data()[c] == doctest::Approx(3.5).epsilon(1e-9));
  }
  SUBCASE("linear boundary, either solver") {
    const auto psi = field_from(d, [](Site s) { return double(s.i); });
    for (auto solver : {SolverChoice::direct, SolverChoice::iterative}) {
      HarmonicOptions opt;
      opt.solver = solver;
      const auto u = weighted_harmonic_extend(d, BondWeights::from_beta(d, Beta(0.3, 5)), psi, opt);
      for (std::size_t k = 0; k < d.interior().size(); ++k)
        CHECK(u.data()[d.interior_cells()[k]] == doctest::Approx(d.interior()[k].i).epsilon(1e-7));
    }
  }
  SUBCASE("harmonic measure against a dense solve") {
    const auto small = build_rectangle(3, 3);
    const Site target{3, 1};
    const auto psi = field_from(small, [&](Site s) { return s == target ? 1.0 : 0.0; });
    const auto u = harmonic_extend(small, psi);
    // Oracle: 9x9 system (4I - A) u = b assembled by hand.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(9, 9);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(9);
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) {
        const int k = i + 3 * j;
        a(k, k) = 4;
        for (Site e : {kE1, kE2, Site{-1, 0}, Site{0, -1}}) {
          const Site y = Site{i, j} + e;
          if (y.i >= 0 && y.i < 3 && y.j >= 0 && y.j < 3) {
            a(k, y.i + 3 * y.j) = -1;
          } else if (y == target) {
            b[k] += 1;
          }
        }
      }
    const Eigen::VectorXd oracle = a.lu().solve(b);
    CHECK((interior_vector(small, u) - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("maximum principle and beta scaling") {
    Rng rng(4);
    const auto disk = build_disk(6.5);
    const auto psi = random_field(disk, rng, false);
    const auto u1 = harmonic_extend(disk, psi, Beta(1, 2.5));
    const auto u2 = harmonic_extend(disk, psi, Beta(4, 10));
    double lo = 1e300, hi = -1e300;
    for (Eigen::Index c : disk.boundary_cells()) {
      lo = std::min(lo, psi.data()[c]);
      hi = std::max(hi, psi.data()[c]);
    }
    for (Eigen::Index c : disk.interior_cells()) {
      CHECK(u1.data()[c] >= lo - 1e-9);
      CHECK(u1.data()[c] <= hi + 1e-9);
      CHECK(u1.data()[c] == doctest::Approx(u2.data()[c]).epsilon(1e-7));
    }
    for (const Site& x : disk.interior())
      CHECK(std::abs(apply_delta_beta(disk, u1, x, Beta(1, 2.5))) <= 1e-8 * std::max(1.0, hi - lo));
  }
  SUBCASE("iteration cap is reported") {
    HarmonicOptions opt;
    opt.solver = SolverChoice::iterative;
    opt.max_iterations = 5;
    opt.tol = 1e-14;
    const auto psi = field_from(d, [](Site s) { return std::sin(s.i) + s.j; });
    CHECK_THROWS_AS(weighted_harmonic_extend(d, BondWeights::uniform(d, 1), psi, opt), ConvergenceError);
  }
}

TEST_CASE("Green's function") {
  auto one = std::make_shared<const LatticeDomain>(build_rectangle(1, 1));
  CHECK(greens_function(one, BondWeights::uniform(*one, 1))(Site{0, 0}, Site{0, 0}) == doctest::Approx(0.25));
  CHECK(greens_function(one, BondWeights::uniform(*one, 2))(Site{0, 0}, Site{0, 0}) == doctest::Approx(0.125));

  auto strip = std::make_shared<const LatticeDomain>(build_rectangle(2, 1));
  const auto g = greens_function(strip, BondWeights::uniform(*strip, 1));
  Eigen::Matrix2d q;
  q << 4, -1, -1, 4;
  const Eigen::Matrix2d oracle = q.inverse();
  CHECK(g({0, 0}, {0, 0}) == doctest::Approx(oracle(0, 0)));
  CHECK(g({0, 0}, {1, 0}) == doctest::Approx(oracle(0, 1)));
  CHECK(g({0, 0}, {2, 0}) == 0.0);  // boundary

  Rng rng(8);
  auto d = std::make_shared<const LatticeDomain>(build_disk(4));
  BondWeights w = BondWeights::uniform(*d, 1);
  for (const auto& cells : d->active_bond_cells())
    (cells.head - cells.tail == 1 ? w.horizontal() : w.vertical()).data()[cells.tail] = 1 + 2 * rng.uniform();
  const auto gw = greens_function(d, w);
  CHECK((gw.g - gw.g.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd v(gw.g.rows());
    for (auto& x : v) x = rng.normal();
    CHECK(gw.quadratic_form(v) > 0);
  }
  // Columns solve the elliptic problem with unit source.
  const Eigen::MatrixXd q2 = precision_matrix(*d, w);
  CHECK((q2 * gw.g - Eigen::MatrixXd::Identity(q2.rows(), q2.cols())).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Dirichlet energy") {
  const auto d = build_rectangle(2, 2);
  const auto w = BondWeights::uniform(d, 1);
  GridField f = d.make_field();
  for (std::size_t k = 0; k < d.interior().size(); ++k) f.data()[d.interior_cells()[k]] = d.interior()[k].i;
  CHECK(dirichlet_energy(f, d, w, BondSet::interior) == doctest::Approx(2.0));
  CHECK(dirichlet_energy(d.make_field(1.3, 1.3), d, w) == 0.0);
  GridField f2 = f * 2;
  CHECK(dirichlet_energy(f2, d, w) == doctest::Approx(4 * dirichlet_energy(f, d, w)));
}

TEST_CASE("summation by parts") {
  Rng rng(12);
  const auto d = build_from_mask("01110\n11111\n11011\n01110");
  BondWeights w = BondWeights::uniform(d, 1);
  for (const auto& cells : d.active_bond_cells())
    (cells.head - cells.tail == 1 ? w.horizontal() : w.vertical()).data()[cells.tail] = 1 + rng.uniform();
  for (int t = 0; t < 10; ++t) {
    const auto f = random_field(d, rng, true);
    const auto g = random_field(d, rng, false);
    double rhs = 0.0;
    for (const Site& x : d.interior()) rhs -= f.data()[d.cell(x)] * apply_laplacian(d, w, g, x);
    const double lhs = dirichlet_product(f, g, d, w);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("hitting experiment") {
  SUBCASE("start on the obstacle") {
    const auto rep = beurling_experiment(half_line, Site{0, 0}, 8, Beta(), 10, 1);
    CHECK(rep.p_hat == 0.0);
    CHECK(*rep.exact == 0.0);
  }
  SUBCASE("tiny instance against the absorbing chain") {
    auto obstacle = [](Site s) { return s == Site{1, 0}; };
    for (auto conv : {BeurlingConvention::beta1_horizontal, BeurlingConvention::beta1_vertical}) {
      const auto rep = beurling_experiment(obstacle, Site{0, 0}, 2, Beta(1, 3), 40000, 5, conv);
      REQUIRE(rep.exact.has_value());
      CHECK(std::abs(rep.p_hat - *rep.exact) <= 3 * rep.std_error);
    }
  }
  SUBCASE("reproducible") {
    const auto a = beurling_experiment(half_line, Site{3, 0}, 10, Beta(), 500, 9);
    const auto b = beurling_experiment(half_line, Site{3, 0}, 10, Beta(), 500, 9);
    CHECK(a.p_hat == b.p_hat);
    CHECK_FALSE(beurling_experiment(half_line, Site{3, 0}, 30, Beta(), 10, 9).exact.has_value());
  }
}
