#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "revdiff/core.hpp"

namespace revdiff {

/// Provider of the score grad log rho(x, t) of the forward marginals and of
/// the expected origin xbar0(x, t) = E[X_0 | X_t = x]. Implementations are
/// immutable; all queries are pure and may run concurrently.
class ScoreField {
public:
    virtual ~ScoreField() = default;

    virtual std::size_t dim() const = 0;

    virtual void xbar0_into(std::span<const double> x, double t, std::span<double> out) const = 0;

    /// Defaults to the affine identity (e^{-t} xbar0 - x) / (1 - e^{-2t}).
    virtual void score_into(std::span<const double> x, double t, std::span<double> out) const;

    Point xbar0(std::span<const double> x, double t) const;
    Point score(std::span<const double> x, double t) const;
};

/// Closed-form score of the empirical law sum_i w_i delta_{x_i}: xbar0 is the
/// softmax-weighted average of the atoms.
class KernelScore final : public ScoreField {
public:
    explicit KernelScore(SampleSet samples) : samples_(std::move(samples)) {}

    const SampleSet& samples() const { return samples_; }
    std::size_t dim() const override { return samples_.dim(); }

    /// Posterior atom probabilities lambda_i(x, t); throws DomainError for t <= 0.
    void weights_into(std::span<const double> x, double t, std::span<double> out) const;
    std::vector<double> weights(std::span<const double> x, double t) const;

    void xbar0_into(std::span<const double> x, double t, std::span<double> out) const override;
    double log_density(std::span<const double> x, double t) const;

private:
    SampleSet samples_;
};

/// Forward law of a Gaussian-mixture rho_0 = sum_i w_i N(c_i, v Id). It stays a
/// mixture with means e^{-t} c_i and variances v e^{-2t} + 1 - e^{-2t}, so every
/// quantity is analytic. With v = 0 it coincides with KernelScore.
class GaussianMixtureScore final : public ScoreField {
public:
    GaussianMixtureScore(SampleSet centers, double bandwidth);

    const SampleSet& centers() const { return centers_; }
    double bandwidth() const { return bandwidth_; }
    std::size_t dim() const override { return centers_.dim(); }

    /// Component responsibilities at (x, t).
    void weights_into(std::span<const double> x, double t, std::span<double> out) const;

    /// Posterior mean of X_0, including the shrinkage of each component.
    void xbar0_into(std::span<const double> x, double t, std::span<double> out) const override;

    /// Direct mixture score sum_i lambda_i (e^{-t} c_i - x) / s_t^2.
    void score_into(std::span<const double> x, double t, std::span<double> out) const override;

    double log_density(std::span<const double> x, double t) const;

    /// Variance of each forward mixture component at time t.
    double component_variance(double t) const;

private:
    SampleSet centers_;
    double bandwidth_;
};

/// (x, t) -> d-vector supplied by the caller.
using PredictorFn =
    std::function<void(std::span<const double> x, double t, std::span<double> out)>;

enum class PredictorMode {
    Xbar,   ///< predicts the expected origin xbar0
    Eps,    ///< predicts the added noise eps_0
    Score,  ///< returns the score directly
};

/// Score field wrapping an external predictor.
class PredictorScore final : public ScoreField {
public:
    PredictorScore(std::size_t dim, PredictorMode mode, PredictorFn predictor)
        : dim_(dim), mode_(mode), predictor_(std::move(predictor)) {}

    std::size_t dim() const override { return dim_; }
    PredictorMode mode() const { return mode_; }
    const PredictorFn& predictor() const { return predictor_; }

    void xbar0_into(std::span<const double> x, double t, std::span<double> out) const override;
    void score_into(std::span<const double> x, double t, std::span<double> out) const override;

private:
    std::size_t dim_;
    PredictorMode mode_;
    PredictorFn predictor_;
};

/// Score reconstruction from a noise predictor:
///   eps~ = eps_theta(x, t);  x0~ = e^t x - e^t sqrt(1 - e^{-2t}) eps~;
///   s = (e^{-t} x0~ - x) / (1 - e^{-2t}).
Point score_from_eps_predictor(const PredictorFn& eps_theta, std::span<const double> x, double t);

/// Noise prediction (x - e^{-t} xbar) / sqrt(1 - e^{-2t}) matching an origin prediction.
void eps_from_xbar(std::span<const double> x, double t, std::span<const double> xbar,
                   std::span<double> out);

/// Origin prediction e^t x - e^t sqrt(1 - e^{-2t}) eps matching a noise prediction.
void xbar_from_eps(std::span<const double> x, double t, std::span<const double> eps,
                   std::span<double> out);

}  // namespace revdiff
