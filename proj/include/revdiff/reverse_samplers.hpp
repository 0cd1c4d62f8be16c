#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "revdiff/core.hpp"
#include "revdiff/score_field.hpp"

namespace revdiff {

/// One reverse step from forward time t_from down to t_to = t_from - delta.
struct StepParams {
    double t_from = 0.0;
    double t_to = 0.0;
    double delta = 0.0;

    /// Throws DomainError unless t_from > t_to > 0.
    static StepParams between(double t_from, double t_to);
};

/// Step k -> k+1 of a schedule.
StepParams step_params(const Schedule& schedule, std::size_t k);

/// Noise coefficient used by Euler-Maruyama: sqrt(2 ds) matches the
/// sqrt(2) dB diffusion of the reverse SDE; `Paper` reproduces the printed
/// sqrt(ds) variant.
enum class EmNoiseScale { Sde, Paper };

std::string to_string(EmNoiseScale scale);
EmNoiseScale em_noise_scale_from_string(const std::string& name);

/// Instantaneous reverse drift x + 2 (e^{-t} xbar - x) / (1 - e^{-2t}).
double reverse_drift(double x, double xbar, double t);
/// Same drift as (xbar / cosh t - x) / tanh t.
double reverse_drift_coth(double x, double xbar, double t);
/// Same drift as -tanh(t/2) x + csch(t) (xbar - x).
double reverse_drift_half_tanh(double x, double xbar, double t);

/// x + ds (x + 2 score(x, t_from)) + noise_scale * noise.
Point em_step(std::span<const double> x, const StepParams& p, const ScoreField& field,
              std::span<const double> noise, EmNoiseScale scale = EmNoiseScale::Sde);

/// x' = x_coeff * x + xbar_coeff * xbar + sqrt(var) * noise.
struct ExactStepCoeffs {
    double x_coeff = 1.0;
    double xbar_coeff = 0.0;
    double var = 0.0;
};

/// Exponential form: the DDPM-style posterior mean/variance.
ExactStepCoeffs exact_step_coeffs(const StepParams& p);
/// Hyperbolic form sinh(t_to)/sinh(t_from), sinh(ds)/sinh(t_from),
/// 2 sinh(t_to) sinh(ds)/sinh(t_from); ratios taken in log space when t_from > 30.
ExactStepCoeffs sinh_step_coeffs(const StepParams& p);

/// Exact transition of the reverse SDE with xbar0 frozen over the step.
Point exact_step(std::span<const double> x, const StepParams& p, std::span<const double> xbar,
                 std::span<const double> noise);
Point sinh_step(std::span<const double> x, const StepParams& p, std::span<const double> xbar,
                std::span<const double> noise);

/// One Heun step of the transport flow dX/ds = X + score(X, T* - s).
Point ode_step(std::span<const double> x, const StepParams& p, const ScoreField& field);

/// Mean and per-component variance of a Gaussian with isotropic covariance.
struct IsotropicGaussian {
    Point mean;
    double var = 0.0;
};

/// Law of the reverse process at time s when rho_0 = delta_{x0} and the
/// reverse process starts at cevX0 (closed-form solution).
IsotropicGaussian dirac_exact_marginal(std::span<const double> x0, std::span<const double> cev_x0,
                                       double s, double horizon);

/// Normalized product of N(mu1, var1 Id) and N(mu2, var2 Id).
IsotropicGaussian gaussian_product(std::span<const double> mu1, double var1,
                                   std::span<const double> mu2, double var2);

/// Sample of X_{m-1} | X_m, X_0 = x0 built from the forward transitions
/// and the Gaussian product; requires 0 < t_prev < t_m.
Point posterior_step(std::span<const double> x_m, std::span<const double> x0, double t_prev,
                     double t_m, std::span<const double> noise);
IsotropicGaussian posterior_law(std::span<const double> x_m, std::span<const double> x0,
                                double t_prev, double t_m);

enum class SamplerKind { EulerMaruyama, Exact, Ode };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

/// Law q0 of the reverse process at s = 0.
struct InitialLaw {
    enum class Kind { StandardNormal, Dirac, ForwardMarginal };

    Kind kind = Kind::StandardNormal;
    std::size_t dim = 1;
    Point point;                                ///< Dirac location
    std::shared_ptr<const SampleSet> atoms;     ///< ForwardMarginal: rho_0 centers
    double bandwidth = 0.0;                     ///< ForwardMarginal: component variance
    double horizon = 0.0;                       ///< ForwardMarginal: rho(., T*)

    static InitialLaw standard_normal(std::size_t dim);
    static InitialLaw dirac(Point point);
    static InitialLaw forward_marginal(const SampleSet& atoms, double horizon,
                                       double bandwidth = 0.0);

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
    std::string describe() const;

    /// Deterministic draw for trajectory `index`.
    void draw(const class RandomStream& rng, std::uint64_t index, std::span<double> out) const;
};

struct ReverseOptions {
    SamplerKind sampler = SamplerKind::Exact;
    EmNoiseScale em_noise = EmNoiseScale::Sde;
    std::size_t workers = 1;
    /// Stop after this many steps (0 allowed); defaults to the full schedule.
    std::optional<std::size_t> max_steps;
    /// Schedule nodes to store; empty means every node that is reached.
    std::vector<std::size_t> record_nodes;
};

/// Ensemble of reverse trajectories. States are stored trajectory-major:
/// state(j, r) is the state of trajectory j at recorded node r.
struct TrajectoryBatch {
    std::size_t n_traj = 0;
    std::size_t dim = 0;
    std::vector<std::size_t> nodes;  ///< schedule indices of the recorded slices
    std::vector<double> states;
    std::shared_ptr<const Schedule> schedule;
    SamplerKind sampler = SamplerKind::Exact;
    InitialLaw q0;
    std::uint64_t master_seed = 0;

    std::size_t n_recorded() const { return nodes.size(); }
    std::span<const double> state(std::size_t traj, std::size_t rec) const {
        return {states.data() + (traj * nodes.size() + rec) * dim, dim};
    }
    std::span<double> state(std::size_t traj, std::size_t rec) {
        return {states.data() + (traj * nodes.size() + rec) * dim, dim};
    }
    std::span<const double> terminal(std::size_t traj) const { return state(traj, nodes.size() - 1); }
    double s(std::size_t rec) const { return schedule->s(nodes[rec]); }
    double t(std::size_t rec) const { return schedule->t(nodes[rec]); }
    /// Recorded slot of schedule node `node`; throws DomainError if absent.
    std::size_t slot_of(std::size_t node) const;
};

/// Simulates n_traj reverse trajectories. Trajectory j draws its start from
/// substream (InitialDraw, j) and step-n noise from (ReverseNoise, j, n), so
/// the result does not depend on `workers`.
TrajectoryBatch run_reverse(const ScoreField& field, const Schedule& schedule, const InitialLaw& q0,
                            std::size_t n_traj, std::uint64_t seed,
                            const ReverseOptions& options = {});

}  // namespace revdiff
