#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace revdiff {

using Point = std::vector<double>;

/// Training atoms {x_i} with convex weights: the empirical initial law
/// rho_0 = sum_i w_i delta_{x_i}. Points are stored row-major (N x d).
class SampleSet {
public:
    /// Throws DomainError when N == 0, coordinates are non-finite, weights are
    /// negative or do not sum to 1 within 1e-12, or N >= 2 atoms all coincide.
    /// Empty `weights` means uniform 1/N.
    SampleSet(std::size_t dim, std::vector<double> coords, std::vector<double> weights = {});

    static SampleSet from_points(const std::vector<Point>& points,
                                 std::vector<double> weights = {});

    std::size_t size() const { return weights_.size(); }
    std::size_t dim() const { return dim_; }

    std::span<const double> point(std::size_t i) const {
        return {coords_.data() + i * dim_, dim_};
    }
    std::span<const double> coords() const { return coords_; }
    std::span<const double> weights() const { return weights_; }
    double weight(std::size_t i) const { return weights_[i]; }
    /// log w_i, -inf for zero weights.
    double log_weight(std::size_t i) const { return log_weights_[i]; }

    /// Running sums of the weights; last entry is 1.
    std::span<const double> cumulative_weights() const { return cumulative_; }

    /// Largest pairwise distance. A single atom has unit scale.
    double scale() const { return scale_; }

    Point weighted_mean() const;

private:
    std::size_t dim_;
    std::vector<double> coords_;
    std::vector<double> weights_;
    std::vector<double> log_weights_;
    std::vector<double> cumulative_;
    double scale_ = 1.0;
};

/// Ornstein-Uhlenbeck transition X_t | X_0 ~ N(alpha X_0, beta_sq Id).
struct TransitionCoeffs {
    double alpha = 1.0;    ///< e^{-t}
    double beta_sq = 0.0;  ///< 1 - e^{-2t}
};

/// Throws DomainError for negative or non-finite t.
TransitionCoeffs coeffs(double t);

/// e^{-t} x0 + sqrt(1 - e^{-2t}) noise.
Point forward_sample(std::span<const double> x0, double t, std::span<const double> noise);
void forward_sample_into(std::span<const double> x0, double t, std::span<const double> noise,
                         std::span<double> out);

enum class ScheduleKind { Uniform, Geometric, Custom };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

/// Reverse-time grid 0 = s_0 < ... < s_n = T* - t_min. The matching forward
/// times are t_k = T* - s_k.
class Schedule {
public:
    /// Explicit grid; `s_values` must start at 0 and increase strictly,
    /// with last value < horizon.
    static Schedule custom(double horizon, std::vector<double> s_values);

    double horizon() const { return horizon_; }
    double t_min() const { return t_min_; }
    ScheduleKind kind() const { return kind_; }
    std::span<const double> s_values() const { return s_values_; }
    std::size_t steps() const { return s_values_.size() - 1; }
    std::size_t nodes() const { return s_values_.size(); }

    double s(std::size_t k) const { return s_values_[k]; }
    /// Forward time at node k.
    double t(std::size_t k) const { return forward_times_[k]; }
    std::span<const double> forward_times() const { return forward_times_; }

private:
    friend Schedule make_schedule(ScheduleKind, double, std::size_t, double);
    Schedule(ScheduleKind kind, double horizon, std::vector<double> s_values,
             std::vector<double> forward_times);

    ScheduleKind kind_;
    double horizon_;
    double t_min_;
    std::vector<double> s_values_;
    std::vector<double> forward_times_;
};

/// Uniform: equal reverse-time steps. Geometric: forward times log-spaced
/// from T* down to t_min so steps shrink as t -> 0.
/// Throws DomainError unless T* > t_min > 0 and steps >= 1.
Schedule make_schedule(ScheduleKind kind, double horizon, std::size_t steps, double t_min);

}  // namespace revdiff
