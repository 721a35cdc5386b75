#include <doctest.h>

#include <cmath>

#include "glab/gibbs.hpp"

using namespace glab;

TEST_CASE("torus gradient variance oracle") {
  // Foster: the effective resistances of all 2 n^2 bonds sum to n^2 - 1.
  for (int n : {4, 6}) {
    const double foster = (n * n - 1.0) / (2.0 * n * n);
    CHECK(torus_gradient_variance(n, Orientation::horizontal) == doctest::Approx(foster).epsilon(1e-10));
    CHECK(torus_gradient_variance(n, Orientation::vertical) == doctest::Approx(foster).epsilon(1e-10));
  }
  CHECK(torus_gradient_variance(6, Orientation::horizontal, 0.01) > torus_gradient_variance(6, Orientation::horizontal));
}

TEST_CASE("torus drift") {
  for (const auto& p : {Potential::quadratic(), Potential::cosine_perturbed()}) {
    const auto s = TorusField::make(8, p, {0.7, -0.3});
    for (int i = 0; i < 8; ++i) CHECK(torus_drift(s, {i, 3}) == doctest::Approx(0.0));
  }
  auto s = TorusField::make(4, Potential::quadratic(), {0.5, 0.0});
  s.h(1, 1) = 1.0;
  CHECK(torus_drift(s, {1, 1}) == doctest::Approx(-4.0));
  CHECK(torus_drift(s, {1, 2}) == doctest::Approx(1.0));
  CHECK(torus_drift(s, {1, 0}) == doctest::Approx(1.0));  // wraps through j = 3
}

TEST_CASE("torus step keeps the gauge and is reproducible") {
  auto a = TorusField::make(8, Potential::cosine_perturbed(), {0.2, 0.1});
  auto b = a;
  Rng r1(5), r2(5);
  torus_advance(a, r1, 100);
  for (int k = 0; k < 100; ++k) b = torus_step(b, r2);
  CHECK(a.h(0, 0) == 0.0);
  CHECK((a.h - b.h).abs().maxCoeff() == 0.0);
  CHECK(a.time == doctest::Approx(b.time));

  const auto before = gradient_field(a);
  regauge(a, {3, 3});
  CHECK(a.h(3, 3) == 0.0);
  const auto after = gradient_field(a);
  CHECK((before.horizontal - after.horizontal).abs().maxCoeff() < 1e-12);
  CHECK((before.vertical - after.vertical).abs().maxCoeff() < 1e-12);
  CHECK_THROWS(TorusField::make(8, Potential::cosine_perturbed(), {0, 0}, 0.5));
}

TEST_CASE("quadratic torus matches the Laplacian oracle") {
  TiltOptions opt;
  opt.dt = 0.01;
  opt.samples = 4000;
  opt.thin = 1.0;
  opt.burn = 20.0;
  Rng rng(17);
  const auto samples = sample_gradients(6, Potential::quadratic(), {0, 0}, opt, rng);
  std::vector<double> sq;
  for (const auto& g : samples) sq.push_back(0.5 * (g.horizontal.square().mean() + g.vertical.square().mean()));
  const auto v = batch_mean(sq);
  const double oracle = torus_gradient_variance(6, Orientation::horizontal, opt.dt);
  CHECK(std::abs(v.value / oracle - 1) < 0.05);
  CHECK(std::abs(v.value - oracle) < 4 * v.std_error);
}

TEST_CASE("tilt estimates") {
  TiltOptions opt;
  opt.samples = 400;
  opt.thin = 1.0;
  opt.burn = 50.0;
  Rng rng(3);
  const auto q = estimate_a_u(8, Potential::quadratic(), {0.4, 0.2}, opt, rng);
  CHECK(q.a1.value == 1.0);
  CHECK(q.a2.value == 1.0);
  CHECK(q.mean_eta1 == doctest::Approx(0.4));
  CHECK(q.mean_eta2 == doctest::Approx(0.2));

  const auto c = estimate_a_u(16, Potential::cosine_perturbed(), {0, 0}, opt, rng);
  CHECK(c.a1.value >= 1.0);
  CHECK(c.a1.value <= 3.0);
  CHECK(c.a2.value >= 1.0);
  CHECK(c.a2.value <= 3.0);
  CHECK(std::abs(c.a1.value - c.a2.value) <= 3 * combined_stderr(c.a1, c.a2));
  CHECK(c.beta.b1 == c.a1.value);

  const auto tilted = estimate_a_u(8, Potential::cosine_perturbed(), {1.0, 0.0}, opt, rng);
  CHECK(tilted.mean_eta1 == doctest::Approx(1.0));
  CHECK(tilted.a1.value > tilted.a2.value);  // V'' grows away from 0 on [0, pi]
  CHECK_THROWS(estimate_a_u(6, Potential::quadratic(), {0, 0}, opt, rng));
}

TEST_CASE("bond marginals are shift invariant") {
  TiltOptions opt;
  opt.samples = 400;
  opt.thin = 1.0;
  opt.burn = 50.0;
  Rng rng(9);
  const auto p = Potential::cosine_perturbed();
  const auto samples = sample_gradients(16, p, {0.3, 0}, opt, rng);
  std::vector<double> left, right;
  for (const auto& g : samples) {
    const auto w = g.horizontal.unaryExpr([&](double x) { return p.ddv(x); });
    left.push_back(w.topRows(8).mean());
    right.push_back(w.bottomRows(8).mean());
  }
  const auto a = batch_mean(left), b = batch_mean(right);
  CHECK(std::abs(a.value - b.value) <= 3 * combined_stderr(a, b));
}

TEST_CASE("bond reflections") {
  const TorusBond h{{2, 1}, Orientation::horizontal}, v{{2, 1}, Orientation::vertical};
  const auto rh = reflect(h, Axis::horizontal);
  CHECK(rh.tail == Site{-3, 1});
  CHECK(reflect(v, Axis::horizontal).tail == Site{-2, 1});
  CHECK(reflect(v, Axis::vertical).tail == Site{2, -2});
  CHECK(reflect(h, Axis::vertical).tail == Site{2, -1});
  for (Axis a : {Axis::horizontal, Axis::vertical})
    for (const auto& b : default_pattern()) {
      const auto back = reflect(reflect(b, a), a);
      CHECK(back.tail == b.tail);
      CHECK(back.orientation == b.orientation);
    }
}

TEST_CASE("reflection test") {
  TiltOptions opt;
  opt.samples = 400;
  opt.thin = 5.0;
  opt.burn = 50.0;
  Rng rng(21);
  const auto q = Potential::quadratic();
  const auto qs = sample_gradients(8, q, {0, 0}, opt, rng);
  const auto flat = reflection_test(qs, Axis::horizontal, [&](double x) { return q.ddv(x); }, default_pattern());
  CHECK(flat.ks.statistic == 0.0);
  CHECK(flat.ks.p_value == 1.0);

  const auto c = Potential::cosine_perturbed();
  const auto cs = sample_gradients(16, c, {0, 0}, opt, rng);
  const auto f = [&](double x) { return c.ddv(x); };
  const auto r = reflection_test(cs, Axis::horizontal, f, default_pattern());
  CHECK(r.original.size() == 200);
  CHECK(r.reflected.size() == 200);
  CHECK(r.ks.p_value >= 0.01);
  const auto control = reflection_test(cs, Axis::horizontal, f, default_pattern(), 0.1);
  CHECK(control.ks.p_value < 0.001);
}
