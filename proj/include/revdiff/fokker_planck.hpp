#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace revdiff {

class ScoreField;

/// Grid function on M+1 equispaced nodes of [-L, L].
struct DensityGrid {
    double half_width = 8.0;  ///< L
    std::vector<double> values;

    DensityGrid() = default;
    DensityGrid(double half_width, std::size_t intervals);

    /// Samples f at the nodes and normalizes to unit trapezoidal mass.
    static DensityGrid from_function(double half_width, std::size_t intervals,
                                     const std::function<double(double)>& f);
    static DensityGrid gaussian(double half_width, std::size_t intervals, double mean,
                                double variance);

    std::size_t intervals() const { return values.size() - 1; }  ///< M
    std::size_t size() const { return values.size(); }
    double dx() const { return 2.0 * half_width / static_cast<double>(intervals()); }
    double x(std::size_t i) const { return -half_width + static_cast<double>(i) * dx(); }

    double mass() const;
    double mean() const;
    double variance() const;
    /// Trapezoidal mass on x < 0 (half of the node at 0, if any).
    double mass_below_zero() const;
    void normalize();
};

/// Trapezoidal L1 distance between two grids on the same nodes.
double l1_distance(const DensityGrid& a, const DensityGrid& b);
double sup_distance(const DensityGrid& a, const DensityGrid& b);

/// Energy in the top third of the DCT-II spectrum of the node values.
double high_frequency_energy(std::span<const double> values);

/// Scalar score (x, t) -> d/dx log rho(x, t) used by the reverse PDEs.
using ScoreTable = std::function<double(double x, double t)>;

/// Wraps a one-dimensional score field.
ScoreTable score_table(const ScoreField& field);

/// Per-step diagnostics. Entry 0 describes the initial state.
struct PdeRunReport {
    std::vector<double> times;
    std::vector<double> mass_drift;  ///< |mass change| over the step
    std::vector<double> min_value;
    std::vector<double> max_value;
    std::vector<double> l2_norm;
    std::vector<double> hf_energy;  ///< filled only when spectra are tracked
    double clipped_mass = 0.0;      ///< total negative mass removed by clipping
    bool blew_up = false;
    std::size_t blowup_step = 0;    ///< first step with a non-finite value

    /// Largest per-step mass drift divided by the step length.
    double max_mass_drift_rate() const;
};

struct PdeOptions {
    double dt = 0.0;  ///< 0 selects dx^2
    /// Extra times (beyond the start and the end) at which the state is kept.
    std::vector<double> save_times;
    bool explicit_euler = false;  ///< forward solver only
    bool track_spectrum = false;
    double cfl = 0.9;  ///< transport solver
};

struct PdeSolution {
    std::vector<double> times;  ///< saved times, including 0 and the final time
    std::vector<DensityGrid> grids;
    PdeRunReport report;

    const DensityGrid& at(double time) const;
};

/// Forward Kolmogorov equation d_t rho = d_x(x rho) + d_xx rho on [0, horizon],
/// Chang-Cooper fluxes, zero-flux boundaries, Crank-Nicolson in time.
/// Explicit mode throws ConfigError when dt > dx^2 / 2.
PdeSolution solve_forward(const DensityGrid& rho0, double horizon, const PdeOptions& options = {});

/// d_s q = d_x([-x - 2 score(x, T* - s)] q) + d_xx q on s in [0, T* - t_min].
/// Throws NumericalError when the score is not finite at a node.
PdeSolution solve_reverse_stable(const DensityGrid& q0, const ScoreTable& score, double horizon,
                                 double t_min, const PdeOptions& options = {});

/// Naive reversal d_s q = -d_x(x q) - d_xx q with central differences and
/// explicit Euler. Stops at the first non-finite value.
PdeRunReport solve_reverse_unstable(const DensityGrid& q0, double t_run,
                                    const PdeOptions& options = {});

/// Transport d_s q = d_x([-x - score(x, T* - s)] q), first-order upwind with a
/// step limited by the positivity (CFL) bound.
PdeSolution solve_reverse_transport(const DensityGrid& q0, const ScoreTable& score,
                                    double horizon, double t_min, const PdeOptions& options = {});

/// Compares the discrete Laplacian of phi with 2 d_x(phi d_x log phi) - d_xx phi
/// on interior nodes; returns max |difference| / max |laplacian|.
double stabilization_identity_error(const DensityGrid& phi);

}  // namespace revdiff
