#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace revdiff {

/// Sum with pairwise (tree) reduction. The reduction order depends only on
/// the length of the input, so results are reproducible bit for bit.
double pairwise_sum(std::span<const double> values);

/// log(sum_i exp(v_i)) with max subtraction.
double log_sum_exp(std::span<const double> values);

/// In-place softmax with max subtraction; returns log of the normalizer.
double softmax_inplace(std::span<double> logits);

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Mean and standard error of a list of per-sample values.
struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};
MeanEstimate mean_and_se(std::span<const double> values);

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double q);

/// Runs body(begin, end) over contiguous chunks of [0, n) on `workers`
/// threads and rethrows the first exception. Chunking never affects results
/// as long as body writes only to its own indices.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace revdiff
