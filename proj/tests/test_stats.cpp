#include <doctest.h>

#include <cmath>
#include <vector>

#include "glab/rng.hpp"
#include "glab/stats.hpp"

using namespace glab;

TEST_CASE("derived seeds are distinct and reproducible") {
  CHECK(derive_seed(7, 0) == derive_seed(7, 0));
  CHECK(derive_seed(7, 0) != derive_seed(7, 1));
  CHECK(derive_seed(7, 0) != derive_seed(8, 0));
  Rng a = Rng::stream(3, 4), b = Rng::stream(3, 4);
  for (int k = 0; k < 10; ++k) CHECK(a.normal() == b.normal());
}

TEST_CASE("bounded integers are uniform") {
  Rng rng(11);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int k = 0; k < n; ++k) ++counts[rng.below(7)];
  for (int c : counts) CHECK(std::abs(c - n / 7) < 5 * std::sqrt(n / 7.0));
}

TEST_CASE("normal quantile inverts the cdf") {
  for (double p : {1e-10, 0.001, 0.025, 0.3, 0.5, 0.9, 0.999})
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK_THROWS(normal_quantile(0.0));
}

TEST_CASE("moments of a normal sample") {
  Rng rng(5);
  std::vector<double> xs(200000);
  for (double& x : xs) x = 1.0 + 2.0 * rng.normal();
  CHECK(mean(xs) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(variance(xs) == doctest::Approx(4.0).epsilon(0.02));
  CHECK(std::abs(skewness(xs)) < 0.03);
  CHECK(std::abs(excess_kurtosis(xs)) < 0.06);
  const auto rep = normality(xs);
  CHECK(rep.ks.p_value > 0.001);
  CHECK(std::abs(rep.skewness_z) < 4);
}

TEST_CASE("batch means see autocorrelation") {
  Rng rng(9);
  std::vector<double> ar(100000);
  double x = 0;
  for (double& v : ar) v = x = 0.9 * x + rng.normal();
  const double naive = iid_mean(ar).std_error;
  const double batched = batch_mean(ar, 20).std_error;
  CHECK(batched > 3 * naive);  // true inflation factor is sqrt(19)
  CHECK(autocorrelation(ar, 1) == doctest::Approx(0.9).epsilon(0.02));
}

TEST_CASE("two-sample KS") {
  Rng rng(2);
  std::vector<double> a(2000), b(2000), c(2000);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = a[k] + 0.3;
  CHECK(ks_two_sample(a, b).p_value > 0.001);
  CHECK(ks_two_sample(a, c).p_value < 1e-6);
  CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.0494).epsilon(0.01));
}
