#include "revdiff/score_field.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "revdiff/errors.hpp"
#include "revdiff/numerics.hpp"

namespace revdiff {

namespace {

void require_positive_time(double t, const char* what) {
    if (!(t > 0.0) || !std::isfinite(t))
        throw DomainError(std::string(what) + ": forward time must be > 0 (singular kernel at t = 0)");
}

void require_dim(std::span<const double> x, std::size_t d) {
    if (x.size() != d) throw DomainError("score field: point dimension mismatch");
}

// Only used by leaf computations that never call back into user code.
std::vector<double>& scratch(std::size_t n) {
    thread_local std::vector<double> buf;
    buf.resize(n);
    return buf;
}

// Log-weights log w_i - |x - alpha c_i|^2 / (2 var); zero-weight atoms map to -inf.
void component_logits(const SampleSet& s, std::span<const double> x, double alpha, double var,
                      std::span<double> out) {
    const std::size_t d = s.dim();
    const double inv2var = 0.5 / var;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double lw = s.log_weight(i);
        if (lw == -std::numeric_limits<double>::infinity()) {
            out[i] = lw;
            continue;
        }
        const auto c = s.point(i);
        double d2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = x[k] - alpha * c[k];
            d2 += diff * diff;
        }
        out[i] = lw - d2 * inv2var;
    }
}

double gaussian_log_normalizer(std::size_t d, double var) {
    return -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * var);
}

}  // namespace

void ScoreField::score_into(std::span<const double> x, double t, std::span<double> out) const {
    require_positive_time(t, "score");
    xbar0_into(x, t, out);
    const auto c = coeffs(t);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = (c.alpha * out[k] - x[k]) / c.beta_sq;
}

Point ScoreField::xbar0(std::span<const double> x, double t) const {
    Point out(dim());
    xbar0_into(x, t, out);
    return out;
}

Point ScoreField::score(std::span<const double> x, double t) const {
    Point out(dim());
    score_into(x, t, out);
    return out;
}

// --- KernelScore -----------------------------------------------------------

void KernelScore::weights_into(std::span<const double> x, double t, std::span<double> out) const {
    require_positive_time(t, "weights");
    require_dim(x, dim());
    const auto c = coeffs(t);
    component_logits(samples_, x, c.alpha, c.beta_sq, out);
    softmax_inplace(out);
}

std::vector<double> KernelScore::weights(std::span<const double> x, double t) const {
    std::vector<double> out(samples_.size());
    weights_into(x, t, out);
    return out;
}

void KernelScore::xbar0_into(std::span<const double> x, double t, std::span<double> out) const {
    auto& lambda = scratch(samples_.size());
    weights_into(x, t, lambda);
    require_dim(out, dim());
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (lambda[i] == 0.0) continue;
        const auto p = samples_.point(i);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += lambda[i] * p[k];
    }
}

double KernelScore::log_density(std::span<const double> x, double t) const {
    require_positive_time(t, "log_density");
    require_dim(x, dim());
    const auto c = coeffs(t);
    auto& logits = scratch(samples_.size());
    component_logits(samples_, x, c.alpha, c.beta_sq, logits);
    return log_sum_exp(logits) + gaussian_log_normalizer(dim(), c.beta_sq);
}

// --- GaussianMixtureScore -------------------------------------------------

GaussianMixtureScore::GaussianMixtureScore(SampleSet centers, double bandwidth)
    : centers_(std::move(centers)), bandwidth_(bandwidth) {
    if (!(bandwidth_ >= 0.0) || !std::isfinite(bandwidth_))
        throw DomainError("GaussianMixtureScore: bandwidth must be finite and >= 0");
}

double GaussianMixtureScore::component_variance(double t) const {
    const auto c = coeffs(t);
    return bandwidth_ * c.alpha * c.alpha + c.beta_sq;
}

void GaussianMixtureScore::weights_into(std::span<const double> x, double t,
                                        std::span<double> out) const {
    if (bandwidth_ == 0.0) require_positive_time(t, "weights");
    require_dim(x, dim());
    const auto c = coeffs(t);
    component_logits(centers_, x, c.alpha, bandwidth_ * c.alpha * c.alpha + c.beta_sq, out);
    softmax_inplace(out);
}

void GaussianMixtureScore::xbar0_into(std::span<const double> x, double t,
                                      std::span<double> out) const {
    if (bandwidth_ == 0.0) require_positive_time(t, "xbar0");
    require_dim(x, dim());
    const auto c = coeffs(t);
    const double var = bandwidth_ * c.alpha * c.alpha + c.beta_sq;
    auto& lambda = scratch(centers_.size());
    component_logits(centers_, x, c.alpha, var, lambda);
    softmax_inplace(lambda);
    const double shrink = bandwidth_ * c.alpha / var;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < centers_.size(); ++i) {
        if (lambda[i] == 0.0) continue;
        const auto ci = centers_.point(i);
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] += lambda[i] * (ci[k] + shrink * (x[k] - c.alpha * ci[k]));
    }
}

void GaussianMixtureScore::score_into(std::span<const double> x, double t,
                                      std::span<double> out) const {
    if (bandwidth_ == 0.0) require_positive_time(t, "score");
    require_dim(x, dim());
    const auto c = coeffs(t);
    const double var = bandwidth_ * c.alpha * c.alpha + c.beta_sq;
    auto& lambda = scratch(centers_.size());
    component_logits(centers_, x, c.alpha, var, lambda);
    softmax_inplace(lambda);
    const double inv_var = 1.0 / var;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < centers_.size(); ++i) {
        if (lambda[i] == 0.0) continue;
        const auto ci = centers_.point(i);
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] += lambda[i] * (c.alpha * ci[k] - x[k]) * inv_var;
    }
}

double GaussianMixtureScore::log_density(std::span<const double> x, double t) const {
    if (bandwidth_ == 0.0) require_positive_time(t, "log_density");
    require_dim(x, dim());
    const auto c = coeffs(t);
    const double var = component_variance(t);
    auto& logits = scratch(centers_.size());
    component_logits(centers_, x, c.alpha, var, logits);
    return log_sum_exp(logits) + gaussian_log_normalizer(dim(), var);
}

// --- PredictorScore -------------------------------------------------------

void xbar_from_eps(std::span<const double> x, double t, std::span<const double> eps,
                   std::span<double> out) {
    const auto c = coeffs(t);
    const double et = std::exp(t);
    const double beta = std::sqrt(c.beta_sq);
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = et * x[k] - et * beta * eps[k];
}

void eps_from_xbar(std::span<const double> x, double t, std::span<const double> xbar,
                   std::span<double> out) {
    require_positive_time(t, "eps_from_xbar");
    const auto c = coeffs(t);
    const double beta = std::sqrt(c.beta_sq);
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = (x[k] - c.alpha * xbar[k]) / beta;
}

void PredictorScore::xbar0_into(std::span<const double> x, double t, std::span<double> out) const {
    require_positive_time(t, "predictor");
    require_dim(x, dim_);
    switch (mode_) {
        case PredictorMode::Xbar: predictor_(x, t, out); break;
        case PredictorMode::Eps: {
            Point eps(dim_);
            predictor_(x, t, eps);
            xbar_from_eps(x, t, eps, out);
            break;
        }
        case PredictorMode::Score: {
            // Invert s = (alpha xbar - x) / beta^2.
            Point s(dim_);
            predictor_(x, t, s);
            const auto c = coeffs(t);
            for (std::size_t k = 0; k < dim_; ++k) out[k] = (x[k] + c.beta_sq * s[k]) / c.alpha;
            break;
        }
    }
}

void PredictorScore::score_into(std::span<const double> x, double t, std::span<double> out) const {
    require_positive_time(t, "predictor");
    require_dim(x, dim_);
    switch (mode_) {
        case PredictorMode::Score: predictor_(x, t, out); return;
        case PredictorMode::Eps: {
            const Point s = score_from_eps_predictor(predictor_, x, t);
            std::copy(s.begin(), s.end(), out.begin());
            return;
        }
        case PredictorMode::Xbar: ScoreField::score_into(x, t, out); return;
    }
}

Point score_from_eps_predictor(const PredictorFn& eps_theta, std::span<const double> x, double t) {
    require_positive_time(t, "score_from_eps_predictor");
    const std::size_t d = x.size();
    Point eps(d), x0(d), s(d);
    eps_theta(x, t, eps);             // (i) predicted noise
    xbar_from_eps(x, t, eps, x0);     // (ii) expected origin
    const auto c = coeffs(t);         // (iii) score
    for (std::size_t k = 0; k < d; ++k) s[k] = (c.alpha * x0[k] - x[k]) / c.beta_sq;
    return s;
}

}  // namespace revdiff
