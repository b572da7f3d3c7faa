#pragma once

// Sample statistics used by the Monte Carlo validation layer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cubevar/errors.hpp"

namespace cubevar {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

inline double sample_mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Unbiased sample variance.
inline double sample_variance(std::span<const double> xs) {
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

struct CovarianceEstimate {
  double value{};
  double std_error{};
};

// Sample covariance of paired observations with the standard error of the
// estimator (std of centered products / sqrt(n)).
inline CovarianceEstimate sample_covariance(std::span<const double> xs,
                                            std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw precondition_error("sample_covariance: need >= 2 paired observations");
  const double n = static_cast<double>(xs.size());
  const double mx = sample_mean(xs);
  const double my = sample_mean(ys);
  double cov = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) cov += (xs[i] - mx) * (ys[i] - my);
  cov /= (n - 1.0);
  double var_prod = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double p = (xs[i] - mx) * (ys[i] - my) - cov;
    var_prod += p * p;
  }
  var_prod /= (n - 1.0);
  return {cov, std::sqrt(var_prod / n)};
}

// Kolmogorov-Smirnov distance of the sample against a caller-supplied CDF.
template <typename Cdf>
double ks_statistic(std::span<const double> samples, const Cdf& cdf) {
  if (samples.size() < 1) throw precondition_error("ks_statistic: empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    const double hi = static_cast<double>(i + 1) / n - f;
    const double lo = f - static_cast<double>(i) / n;
    d = std::max(d, std::max(hi, lo));
  }
  return d;
}

struct MomentDiagnostics {
  double ks_stat{};
  double skewness{};
  double excess_kurtosis{};
};

// KS distance of the sample from the zero-mean normal with the sample's
// (second-moment) variance, plus shape diagnostics.
inline MomentDiagnostics normality_diagnostics(std::span<const double> samples) {
  if (samples.size() < 100) throw precondition_error("normality_diagnostics: need >= 100 samples");
  const double n = static_cast<double>(samples.size());
  double m2 = 0.0;
  for (double x : samples) m2 += x * x;
  m2 /= n;
  if (!(m2 > 0.0)) throw std::domain_error("normality_diagnostics: degenerate sample");
  const double sd = std::sqrt(m2);
  const double ks = ks_statistic(samples, [sd](double x) { return normal_cdf(x / sd); });
  const double mean = sample_mean(samples);
  double c2 = 0.0, c3 = 0.0, c4 = 0.0;
  for (double x : samples) {
    const double d = x - mean;
    c2 += d * d;
    c3 += d * d * d;
    c4 += d * d * d * d;
  }
  c2 /= n;
  c3 /= n;
  c4 /= n;
  return {ks, c3 / std::pow(c2, 1.5), c4 / (c2 * c2) - 3.0};
}

}  // namespace cubevar
