#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "revdiff/core.hpp"
#include "revdiff/score_field.hpp"

namespace revdiff {

/// c(t) = e^{-t} / (1 - e^{-2t}).
double loss_weight(double t);

/// Law of the training time: uniform on [t_min, T*] or uniform over a grid.
struct TimeSampling {
    enum class Kind { Uniform, Discrete };
    Kind kind = Kind::Uniform;
    double t_min = 1e-3;
    double horizon = 1.0;
    std::vector<double> grid;

    static TimeSampling uniform(double t_min, double horizon);
    static TimeSampling discrete(std::vector<double> grid);

    /// Throws DomainError for an empty grid, nonpositive times or t_min >= T*.
    void validate() const;
    std::string describe() const;
};

struct LossConfig {
    TimeSampling sampling;
    std::size_t n_mc = 10000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct LossEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_mc = 0;
    std::string sampling;
    std::string weight;
    std::vector<double> per_sample;
};

/// The j-th joint draw (t, X_0, eps_0, X_t) shared by every estimator with
/// the same seed, so differences between predictors use common random numbers.
struct LossDraw {
    double t = 0.0;
    std::size_t atom = 0;
    Point x0;
    Point eps;
    Point xt;
};

LossDraw loss_draw(const SampleSet& samples, const TimeSampling& sampling, std::uint64_t seed,
                   std::size_t j);

/// E |s_theta(X_t, t) - grad log rho(X_t, t)|^2 with the kernel score as reference.
LossEstimate score_loss(const ScoreField& s_theta, const KernelScore& ref, const LossConfig& cfg);

/// E c(t)^2 |xbar_theta(X_t, t) - X_0|^2.
LossEstimate total_loss(const PredictorFn& xbar_theta, const SampleSet& samples,
                        const LossConfig& cfg);

/// E |eps_theta(X_t, t) - eps_0|^2 / (1 - e^{-2t}).
LossEstimate eps_total_loss(const PredictorFn& eps_theta, const SampleSet& samples,
                            const LossConfig& cfg);

/// Unweighted E |eps_theta(X_{t_k}, t_k) - eps_0|^2 with k uniform over the grid.
LossEstimate riemann_eps_loss(const PredictorFn& eps_theta, const SampleSet& samples,
                              const std::vector<double>& grid, std::size_t n_mc,
                              std::uint64_t seed, std::size_t workers = 1);

/// E c(t)^2 |X_0 - xbar0(X_t, t)|^2, the part of total_loss no predictor can
/// remove. Equals total_loss of the kernel predictor draw by draw.
LossEstimate variance_floor(const SampleSet& samples, const LossConfig& cfg);

/// Same floor with the conditional variance sum_i lambda_i |x_i - xbar0|^2
/// integrated analytically over X_0.
LossEstimate variance_floor_rao_blackwell(const SampleSet& samples, const LossConfig& cfg);

// Built-in predictors -------------------------------------------------------

/// Kernel xbar0 of the samples (the minimizer).
PredictorFn kernel_xbar_predictor(const SampleSet& samples);
PredictorFn zero_predictor();
PredictorFn shifted_predictor(PredictorFn base, Point shift);
/// The atom whose Voronoi cell contains e^t x.
PredictorFn nearest_atom_predictor(const SampleSet& samples);
/// base + amplitude * sum of `features` random cosine features of (x, t).
PredictorFn random_feature_predictor(PredictorFn base, std::size_t dim, std::size_t features,
                                     double amplitude, std::uint64_t seed);
/// `below` for t < t_cut, `above` otherwise.
PredictorFn time_gated_predictor(PredictorFn below, PredictorFn above, double t_cut);

/// Noise predictor matching an origin predictor, and back.
PredictorFn eps_predictor_from_xbar(PredictorFn xbar);
PredictorFn xbar_predictor_from_eps(PredictorFn eps);

}  // namespace revdiff
