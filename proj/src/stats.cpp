#include "glab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace glab {

double combined_stderr(const Estimate& a, const Estimate& b) {
  return std::hypot(a.std_error, b.std_error);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

namespace {

struct CentralMoments {
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
};

CentralMoments central_moments(std::span<const double> xs) {
  const double m = mean(xs);
  CentralMoments c;
  for (double x : xs) {
    const double d = x - m;
    const double d2 = d * d;
    c.m2 += d2;
    c.m3 += d2 * d;
    c.m4 += d2 * d2;
  }
  const auto n = static_cast<double>(xs.size());
  c.m2 /= n;
  c.m3 /= n;
  c.m4 /= n;
  return c;
}

}  // namespace

double skewness(std::span<const double> xs) {
  if (xs.size() < 3) return 0.0;
  const auto c = central_moments(xs);
  return c.m2 > 0 ? c.m3 / std::pow(c.m2, 1.5) : 0.0;
}

double excess_kurtosis(std::span<const double> xs) {
  if (xs.size() < 4) return 0.0;
  const auto c = central_moments(xs);
  return c.m2 > 0 ? c.m4 / (c.m2 * c.m2) - 3.0 : 0.0;
}

double autocorrelation(std::span<const double> xs, std::size_t lag) {
  if (xs.size() <= lag + 1) return 0.0;
  const double m = mean(xs);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    den += (xs[i] - m) * (xs[i] - m);
    if (i + lag < xs.size()) num += (xs[i] - m) * (xs[i + lag] - m);
  }
  return den > 0 ? num / den : 0.0;
}

Estimate iid_mean(std::span<const double> xs) {
  Estimate e;
  e.value = mean(xs);
  e.std_error = xs.size() > 1 ? std::sqrt(variance(xs) / static_cast<double>(xs.size())) : 0.0;
  return e;
}

Estimate batch_mean(std::span<const double> xs, std::size_t batches) {
  if (xs.empty()) return {};
  batches = std::clamp<std::size_t>(batches, 1, xs.size());
  const std::size_t len = xs.size() / batches;
  std::vector<double> means;
  means.reserve(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t begin = b * len;
    const std::size_t end = (b + 1 == batches) ? xs.size() : begin + len;
    means.push_back(mean(xs.subspan(begin, end - begin)));
  }
  Estimate e;
  e.value = mean(xs);
  e.std_error = batches > 1 ? std::sqrt(variance(means) / static_cast<double>(batches)) : 0.0;
  return e;
}

Estimate batch_variance(std::span<const double> xs, std::size_t batches) {
  if (xs.size() < 2) return {};
  const double m = mean(xs);
  std::vector<double> sq(xs.size());
  std::transform(xs.begin(), xs.end(), sq.begin(), [m](double x) { return (x - m) * (x - m); });
  Estimate e = batch_mean(sq, batches);
  const double correction = static_cast<double>(xs.size()) / static_cast<double>(xs.size() - 1);
  e.value *= correction;
  e.std_error *= correction;
  return e;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  // Acklam's rational approximation followed by two Newton steps.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  for (int it = 0; it < 2; ++it) {
    const double err = normal_cdf(x) - p;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI);
    x -= err / pdf;
  }
  return x;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto n = static_cast<double>(x.size());
  const auto m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  const double ne = std::sqrt(n * m / (n + m));
  return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

KsResult ks_normal(std::span<const double> xs, double mu, double sigma) {
  if (xs.empty()) throw std::invalid_argument("ks_normal: empty sample");
  std::vector<double> x(xs.begin(), xs.end());
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf((x[i] - mu) / sigma);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)};
}

NormalityReport normality(std::span<const double> xs) {
  NormalityReport r;
  const auto n = static_cast<double>(xs.size());
  r.skewness = skewness(xs);
  r.excess_kurtosis = excess_kurtosis(xs);
  r.skewness_z = r.skewness / std::sqrt(6.0 / n);
  r.kurtosis_z = r.excess_kurtosis / std::sqrt(24.0 / n);
  r.jarque_bera = n / 6.0 * (r.skewness * r.skewness + 0.25 * r.excess_kurtosis * r.excess_kurtosis);
  // chi-square with two degrees of freedom
  r.jarque_bera_p = std::exp(-0.5 * r.jarque_bera);
  const double sd = std::sqrt(variance(xs));
  if (sd > 0) r.ks = ks_normal(xs, mean(xs), sd);
  return r;
}

}  // namespace glab
