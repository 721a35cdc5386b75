#include <doctest.h>

#include <cmath>
#include <numbers>

#include "glab/dgff.hpp"
#include "glab/experiments.hpp"

using namespace glab;

namespace {

constexpr double kPi = std::numbers::pi;

double sine_boundary(Site s, int r) { return 0.5 * std::sin(2 * kPi * s.i / r); }

}  // namespace

TEST_CASE("test functions carry their gradients") {
  Rng rng(1);
  const auto g = TestFunction::sine_product(2, 1) + TestFunction::linear(0.3, -1.0).scaled(2.0);
  CHECK(gradient_mismatch(TestFunction::sine_product(1, 1), 50, 1e-5, rng) < 1e-8);
  CHECK(gradient_mismatch(g, 50, 1e-5, rng) < 1e-8);
  CHECK(g(0.25, 0.5) == doctest::Approx(1.0 + 2 * (0.075 - 0.5)));
  CHECK(TestFunction::sine_product(1, 1).compact);
  CHECK_FALSE(g.compact);
}

TEST_CASE("weighted Dirichlet inner product") {
  const auto g1 = TestFunction::sine_product(1, 1), g2 = TestFunction::sine_product(2, 1);
  const auto a = dirichlet_ip_beta(g1, g1, {});
  CHECK(a.converged);
  CHECK(a.value == doctest::Approx(kPi * kPi / 2).epsilon(1e-6));
  CHECK(std::abs(dirichlet_ip_beta(g1, g2, {}).value) < 1e-10);
  CHECK(dirichlet_ip_beta(g1.scaled(2), g2, {}).value == doctest::Approx(2 * dirichlet_ip_beta(g1, g2, {}).value));
  CHECK(dirichlet_ip_beta(g1, g1, {2, 1}).value == doctest::Approx(3 * kPi * kPi / 4).epsilon(1e-6));
  const auto lin = TestFunction::linear(1, 2);
  CHECK(dirichlet_ip_beta(lin, lin, {}).value == doctest::Approx(5.0));
  CHECK_THROWS(dirichlet_ip_beta(g1, g1, {}, 8));
}

TEST_CASE("lattice sampling of test functions") {
  const auto d = build_rectangle(9, 9);
  const auto m = UnitMap::of(d);
  CHECK(m.scale == doctest::Approx(0.1));
  CHECK(m({-1, -1}).isApprox(Eigen::Vector2d(0, 0)));
  CHECK(m({9, 4}).isApprox(Eigen::Vector2d(1, 0.5)));
  const auto g = sample_on(d, m, TestFunction::sine_product(1, 1));
  for (Eigen::Index c : d.boundary_cells()) CHECK(std::abs(g.data()[c]) < 1e-12);
  CHECK(g.data()[d.cell({4, 4})] == doctest::Approx(1.0));

  const auto inner = inner_region(d, 2);
  const auto t = transfer(d, g, inner);
  for (Site s : inner.boundary()) CHECK(t.data()[inner.cell(s)] == g.data()[d.cell(s)]);
}

TEST_CASE("xi functional") {
  const auto d = std::make_shared<const LatticeDomain>(build_rectangle(9, 9));
  const auto m = UnitMap::of(*d);
  const Eigen::Vector2d u(0.3, -0.2);
  const GridField phi = tilt_field(*d, u);
  const auto g1 = sample_on(*d, m, TestFunction::sine_product(1, 1));
  const auto g2 = sample_on(*d, m, TestFunction::sine_product(2, 1));
  const Beta a{1.3, 0.8};
  CHECK(xi_functional(*d, phi, phi, g1, a) == 0.0);

  Rng rng(2);
  GridField h = phi;
  for (Eigen::Index c : d->interior_cells()) h.data()[c] += rng.normal();
  CHECK(xi_functional(*d, h, phi, sample_on(*d, m, TestFunction::constant(3)), a) == 0.0);
  const double x1 = xi_functional(*d, h, phi, g1, a), x2 = xi_functional(*d, h, phi, g2, a);
  const GridField sum = g1 + g2, scaled = 2.5 * g1;
  CHECK(std::abs(xi_functional(*d, h, phi, sum, a) - x1 - x2) < 1e-10);
  CHECK(std::abs(xi_functional(*d, h, phi, scaled, a) - 2.5 * x1) < 1e-10);
  const Eigen::VectorXd nu = xi_coefficients(*d, g1, a);
  CHECK(std::abs(nu.dot(interior_vector(*d, h - phi)) - x1) < 1e-10);
}

TEST_CASE("xi variance over exact DGFF samples matches the dense oracle") {
  const auto d = std::make_shared<const LatticeDomain>(build_rectangle(9, 9));
  const auto g = sample_on(*d, UnitMap::of(*d), TestFunction::sine_product(1, 1));
  const GridField zero = d->make_field();
  const auto sampler = DgffSampler::build(d, BondWeights::uniform(*d, 1), zero);
  Rng rng(3);
  std::vector<double> xs;
  for (int k = 0; k < 20000; ++k) xs.push_back(xi_functional(*d, sampler.sample(rng), zero, g, {}));
  const auto v = batch_variance(xs);
  const Eigen::VectorXd nu = xi_coefficients(*d, g, {});
  const double oracle = greens_function(d, BondWeights::uniform(*d, 1)).quadratic_form(nu);
  CHECK(std::abs(v.value - oracle) <= 4 * v.std_error);
}

TEST_CASE("quadratic CLT run") {
  CltConfig cfg;
  cfg.n = 10;
  cfg.potential = Potential::quadratic();
  cfg.tests = {TestFunction::sine_product(1, 1), TestFunction::sine_product(2, 1)};
  cfg.samples = 2000;
  cfg.schedule = {0.05, 20.0, 15.0};
  const auto r = clt_experiment(cfg, 4);
  REQUIRE(r.series.size() == 2);
  for (const auto& s : r.series) {
    CHECK(s.xi.size() == 2000);
    CHECK(std::abs(s.normality.skewness_z) <= 3);
    CHECK(std::abs(s.variance.value - s.em_oracle_variance) <= 4 * s.variance.std_error);
    CHECK(s.em_oracle_variance > s.oracle_variance);
    CHECK(s.lag1 <= 0.1);
  }
  CHECK(r.decorrelated);
}

TEST_CASE("mean harmonicity") {
  MeanHarmonicConfig cfg;
  cfg.sizes = {8};
  cfg.psi = sine_boundary;
  cfg.schedule.dt = 0.05;
  SUBCASE("quadratic with its own control is exact") {
    cfg.potential = Potential::quadratic();
    cfg.control_stiffness = 1.0;
    const auto r = mean_harmonic_experiment(cfg, 1).front();
    CHECK(r.max_deviation < 1e-9);
  }
  SUBCASE("quadratic without control stays inside its error budget") {
    cfg.potential = Potential::quadratic();
    cfg.control_stiffness = 0.0;
    const auto r = mean_harmonic_experiment(cfg, 2).front();
    CHECK(r.max_deviation <= r.budget);
    CHECK(r.sites.size() == r.deviation.size());
    CHECK(r.max_std_error > 0);
  }
  SUBCASE("cosine with the quadratic control") {
    cfg.schedule.dt = 0.04;
    const auto r = mean_harmonic_experiment(cfg, 3).front();
    CHECK(r.ratio < 3);
    CHECK(r.median_deviation <= r.max_deviation);
  }
}

TEST_CASE("harmonic coupling") {
  CouplingConfig cfg;
  cfg.sizes = {8};
  cfg.replicas = 20;
  cfg.psi = sine_boundary;
  cfg.schedule.dt = 0.04;
  SUBCASE("equal boundaries") {
    cfg.psi_tilde = sine_boundary;
    const auto r = coupling_experiment(cfg, 1).front();
    CHECK(r.exceedance == 0.0);
    for (double dev : r.deviations) CHECK(dev == 0.0);
  }
  SUBCASE("quadratic difference is deterministic and harmonic") {
    cfg.potential = Potential::quadratic();
    cfg.psi_tilde = [](Site s, int r) { return -sine_boundary(s, r); };
    const auto r = coupling_experiment(cfg, 2).front();
    CHECK(r.epsilon == doctest::Approx(0.1 * 2 * std::sin(2 * kPi * 2 / 8)));
    for (std::size_t k = 0; k < r.deviations.size(); ++k)
      CHECK(r.deviations[k] <= r.solver_tol + r.residuals[k]);
    CHECK(r.residuals.back() < 1e-10);
  }
}

TEST_CASE("entropy estimate") {
  const auto d = std::make_shared<const LatticeDomain>(build_rectangle(8, 8));
  EntropyConfig cfg;
  cfg.domain = d;
  cfg.zeta = d->make_field();
  cfg.samples = 200;
  cfg.schedule = {0.04, 20.0, 2.0};
  const auto perturbed = [&](double amp) {
    GridField z = d->make_field();
    for (Eigen::Index c : d->boundary_cells()) z.data()[c] = amp * std::sin(2 * kPi * d->site_at(c).i / 8);
    return z;
  };
  SUBCASE("equal boundaries give exactly zero") {
    cfg.zeta_tilde = cfg.zeta;
    const auto e = entropy_estimate(cfg, 1);
    CHECK(e.main.value == 0.0);
    CHECK(e.remainder.value == 0.0);
    CHECK(e.pinsker == 0.0);
  }
  SUBCASE("quadratic main term vanishes") {
    cfg.potential = Potential::quadratic();
    cfg.zeta_tilde = perturbed(0.2);
    const auto e = entropy_estimate(cfg, 2);
    CHECK(std::abs(e.main.value) <= 3 * e.effective_error);
    CHECK(e.remainder.value == 0.0);
    CHECK(e.pinsker == doctest::Approx(std::sqrt(std::max(e.total, 0.0) / 2)));
  }
  SUBCASE("cosine bound shrinks with the perturbation") {
    cfg.zeta_tilde = perturbed(0.2);
    const auto big = entropy_estimate(cfg, 3);
    cfg.zeta_tilde = perturbed(0.1);
    const auto small = entropy_estimate(cfg, 3);
    CHECK(big.total >= -3 * big.effective_error);
    CHECK(small.pinsker < big.pinsker);
  }
}

TEST_CASE("Brascamp-Lieb variance bound") {
  const auto d = std::make_shared<const LatticeDomain>(build_rectangle(8, 8));
  const auto n = static_cast<Eigen::Index>(d->interior().size());
  Eigen::VectorXd center = Eigen::VectorXd::Zero(n);
  center[d->interior_index({4, 4})] = 1.0;
  const std::vector<Eigen::VectorXd> nus{Eigen::VectorXd::Zero(n), center};
  const ChainSchedule sched{0.02, 20.0, 1.0};
  const auto q = brascamp_lieb_check(d, Potential::quadratic(), d->make_field(), nus, 3000, sched, 1);
  CHECK(q.rows[0].var_gl.value == 0.0);
  CHECK(q.rows[0].var_dgff == 0.0);
  CHECK(std::abs(q.rows[1].var_gl.value - q.rows[1].var_dgff) <= 4 * q.rows[1].var_gl.std_error + 0.02 * q.rows[1].var_dgff);
  const auto c = brascamp_lieb_check(d, Potential::cosine_perturbed(), d->make_field(), nus, 3000, sched, 2);
  CHECK(c.pass);
  CHECK_THROWS(brascamp_lieb_check(d, Potential::quadratic(), d->make_field(), {Eigen::VectorXd::Zero(3)}, 10, sched, 1));
}

TEST_CASE("Bonferroni quantile") {
  CHECK(bonferroni_z(1) == doctest::Approx(1.959964).epsilon(1e-5));
  CHECK(bonferroni_z(100) > bonferroni_z(10));
}
