#include "revdiff/core.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "revdiff/errors.hpp"
#include "revdiff/numerics.hpp"

namespace revdiff {

SampleSet::SampleSet(std::size_t dim, std::vector<double> coords, std::vector<double> weights)
    : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {
    if (dim_ == 0) throw DomainError("SampleSet: dimension must be positive");
    if (coords_.empty() || coords_.size() % dim_ != 0)
        throw DomainError("SampleSet: need at least one point with " + std::to_string(dim_) +
                          " coordinates");
    const std::size_t n = coords_.size() / dim_;
    for (double c : coords_)
        if (!std::isfinite(c)) throw DomainError("SampleSet: non-finite coordinate");

    if (weights_.empty()) weights_.assign(n, 1.0 / static_cast<double>(n));
    if (weights_.size() != n) throw DomainError("SampleSet: weight count differs from point count");
    for (double w : weights_)
        if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("SampleSet: negative weight");
    const double total = pairwise_sum(weights_);
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("SampleSet: weights must sum to 1");

    cumulative_.resize(n);
    std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
    cumulative_.back() = 1.0;
    log_weights_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        log_weights_[i] = weights_[i] > 0.0 ? std::log(weights_[i]) : -std::numeric_limits<double>::infinity();

    if (n >= 2) {
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                best = std::max(best, squared_distance(point(i), point(j)));
        scale_ = std::sqrt(best);
        if (!(scale_ > 0.0)) throw DomainError("SampleSet: all atoms coincide");
    }
}

SampleSet SampleSet::from_points(const std::vector<Point>& points, std::vector<double> weights) {
    if (points.empty()) throw DomainError("SampleSet: empty point list");
    const std::size_t d = points.front().size();
    std::vector<double> coords;
    coords.reserve(points.size() * d);
    for (const auto& p : points) {
        if (p.size() != d) throw DomainError("SampleSet: ragged point list");
        coords.insert(coords.end(), p.begin(), p.end());
    }
    return SampleSet(d, std::move(coords), std::move(weights));
}

Point SampleSet::weighted_mean() const {
    Point m(dim_, 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
        const auto p = point(i);
        for (std::size_t k = 0; k < dim_; ++k) m[k] += weights_[i] * p[k];
    }
    return m;
}

TransitionCoeffs coeffs(double t) {
    if (!std::isfinite(t) || t < 0.0)
        throw DomainError("coeffs: forward time must be finite and >= 0, got " + std::to_string(t));
    return {std::exp(-t), -std::expm1(-2.0 * t)};
}

void forward_sample_into(std::span<const double> x0, double t, std::span<const double> noise,
                         std::span<double> out) {
    if (x0.size() != noise.size() || out.size() != x0.size())
        throw DomainError("forward_sample: dimension mismatch between point and noise");
    const auto c = coeffs(t);
    const double beta = std::sqrt(c.beta_sq);
    for (std::size_t k = 0; k < x0.size(); ++k) out[k] = c.alpha * x0[k] + beta * noise[k];
}

Point forward_sample(std::span<const double> x0, double t, std::span<const double> noise) {
    Point out(x0.size());
    forward_sample_into(x0, t, noise, out);
    return out;
}

std::string to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::Uniform: return "uniform";
        case ScheduleKind::Geometric: return "geometric";
        case ScheduleKind::Custom: return "custom";
    }
    return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
    if (name == "uniform") return ScheduleKind::Uniform;
    if (name == "geometric") return ScheduleKind::Geometric;
    throw ConfigError("unknown schedule kind '" + name + "' (expected uniform|geometric)");
}

Schedule::Schedule(ScheduleKind kind, double horizon, std::vector<double> s_values,
                   std::vector<double> forward_times)
    : kind_(kind),
      horizon_(horizon),
      t_min_(forward_times.back()),
      s_values_(std::move(s_values)),
      forward_times_(std::move(forward_times)) {}

Schedule Schedule::custom(double horizon, std::vector<double> s_values) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw DomainError("Schedule: horizon must be positive");
    if (s_values.size() < 2 || s_values.front() != 0.0)
        throw DomainError("Schedule: need at least two nodes starting at s = 0");
    for (std::size_t k = 1; k < s_values.size(); ++k)
        if (!(s_values[k] > s_values[k - 1]))
            throw DomainError("Schedule: s values must increase strictly");
    if (!(s_values.back() < horizon))
        throw DomainError("Schedule: last node must stay below the horizon (t_min > 0)");
    std::vector<double> t(s_values.size());
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = horizon - s_values[k];
    return Schedule(ScheduleKind::Custom, horizon, std::move(s_values), std::move(t));
}

Schedule make_schedule(ScheduleKind kind, double horizon, std::size_t steps, double t_min) {
    if (!(t_min > 0.0) || !std::isfinite(horizon) || !(horizon > t_min))
        throw DomainError("make_schedule: require T* > t_min > 0");
    if (steps < 1) throw DomainError("make_schedule: steps must be >= 1");

    std::vector<double> s(steps + 1);
    std::vector<double> t(steps + 1);
    const double n = static_cast<double>(steps);
    switch (kind) {
        case ScheduleKind::Uniform:
            for (std::size_t k = 0; k <= steps; ++k) {
                s[k] = (horizon - t_min) * static_cast<double>(k) / n;
                t[k] = horizon - s[k];
            }
            break;
        case ScheduleKind::Geometric: {
            const double log_ratio = std::log(t_min / horizon);
            for (std::size_t k = 0; k <= steps; ++k) {
                t[k] = horizon * std::exp(log_ratio * static_cast<double>(k) / n);
                s[k] = horizon - t[k];
            }
            break;
        }
        case ScheduleKind::Custom:
            throw DomainError("make_schedule: use Schedule::custom for explicit grids");
    }
    // Pin the end points exactly.
    s.front() = 0.0;
    t.front() = horizon;
    t.back() = t_min;
    s.back() = horizon - t_min;
    for (std::size_t k = 1; k <= steps; ++k)
        if (!(s[k] > s[k - 1]))
            throw DomainError("make_schedule: too many steps for the floating-point resolution");
    return Schedule(kind, horizon, std::move(s), std::move(t));
}

}  // namespace revdiff
