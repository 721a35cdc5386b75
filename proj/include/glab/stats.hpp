#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace glab {

/// A Monte Carlo estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Combined standard error of two independent estimates.
double combined_stderr(const Estimate& a, const Estimate& b);

double mean(std::span<const double> xs);
/// Unbiased sample variance.
double variance(std::span<const double> xs);
/// Sample skewness g1 = m3 / m2^{3/2}.
double skewness(std::span<const double> xs);
/// Sample excess kurtosis g2 = m4 / m2^2 - 3.
double excess_kurtosis(std::span<const double> xs);

/// Lag-k sample autocorrelation.
double autocorrelation(std::span<const double> xs, std::size_t lag = 1);

/// Mean of a correlated series with a batch-means standard error.
Estimate batch_mean(std::span<const double> xs, std::size_t batches = 20);

/// Variance of a correlated series; the standard error comes from batch means
/// of the centered squares.
Estimate batch_variance(std::span<const double> xs, std::size_t batches = 20);

/// Mean of independent values with the usual standard error.
Estimate iid_mean(std::span<const double> xs);

double normal_cdf(double z);
/// Inverse of the standard normal CDF, p in (0, 1).
double normal_quantile(double p);

/// Survival function of the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test (asymptotic p-value with Stephens'
/// small-sample correction).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// One-sample KS test against N(mu, sigma^2).
KsResult ks_normal(std::span<const double> xs, double mu, double sigma);

struct NormalityReport {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double skewness_z = 0.0;
  double kurtosis_z = 0.0;
  double jarque_bera = 0.0;
  double jarque_bera_p = 1.0;
  KsResult ks;  // against the fitted normal
};

NormalityReport normality(std::span<const double> xs);

}  // namespace glab
