#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fractoid::stats {

/// Mergeable running mean/variance (Welford, Chan et al. merge).
class RunningStats {
 public:
  void add(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  void merge(const RunningStats& other) noexcept;

  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  /// Unbiased sample variance; 0 with fewer than two samples.
  double variance() const noexcept;
  double standard_error() const noexcept;

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double mean(std::span<const double> xs);
double variance(std::span<const double> xs);
/// Linear-interpolated quantile, q in [0, 1]. Copies its input.
double quantile(std::span<const double> xs, double q);
double median(std::span<const double> xs);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};

/// One-sample test against the uniform law on [lo, hi].
KsResult ks_uniform(std::span<const double> sample, double lo, double hi);
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

}  // namespace fractoid::stats
