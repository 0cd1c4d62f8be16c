#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "revdiff/core.hpp"
#include "revdiff/reverse_samplers.hpp"

namespace revdiff {

class GaussianMixtureScore;

/// Index of the nearest atom; ties go to the lowest index.
std::size_t voronoi_assign(std::span<const double> x, const SampleSet& samples);

/// Landing probabilities omega_i of the exact reverse process started at
/// x_start with horizon T*: omega_i ~ w_i exp(-|x_i e^{-T*} - x_start|^2 / (2 beta^2)).
std::vector<double> terminal_weights(std::span<const double> x_start, const SampleSet& samples,
                                     double horizon);

struct WeightsEstimate {
    std::vector<double> mean;
    std::vector<double> std_error;
    std::size_t n_mc = 0;
};

/// Monte Carlo average of terminal_weights over x_start ~ q0. Start j uses the
/// same substream as trajectory j of run_reverse with the same seed.
WeightsEstimate expected_terminal_weights(const SampleSet& samples, const InitialLaw& q0,
                                          double horizon, std::size_t n_mc, std::uint64_t seed);

/// 0.1 * scale / sqrt(d).
double default_memorization_eps(const SampleSet& samples);

struct MemorizationReport {
    std::size_t n_traj = 0;
    double eps = 0.0;
    std::vector<std::size_t> hits;  ///< terminals within eps of atom i
    double frac_within_eps = 0.0;
    double median_dist = 0.0;  ///< distance to the nearest atom
    double p90_dist = 0.0;
    std::vector<double> empirical_weights;  ///< Voronoi frequencies of terminals
    std::vector<double> omega_ref;
    double tv_gap = 0.0;
};

/// Reference weights come from expected_terminal_weights with the batch's q0,
/// n_traj draws and a seed decorrelated from the batch seed.
MemorizationReport memorization_report(const TrajectoryBatch& batch, const SampleSet& samples,
                                       double eps);
MemorizationReport memorization_report(const TrajectoryBatch& batch, const SampleSet& samples,
                                       double eps, std::vector<double> omega_ref);

double total_variation(std::span<const double> p, std::span<const double> q);

/// p-Wasserstein distance (p = 1 or 2) between two empirical laws on the line.
/// Inputs need not be sorted; sizes may differ.
double wasserstein1d(std::span<const double> a, std::span<const double> b, int p);

/// Sliced W2 between two point clouds (row-major, dimension d) over
/// `projections` seeded random directions.
double sliced_wasserstein2(std::span<const double> a, std::span<const double> b, std::size_t dim,
                           std::uint64_t seed, std::size_t projections = 64);

struct DistanceCurve {
    std::vector<double> s;
    std::vector<double> value;
    std::vector<double> std_error;
};

/// sqrt(E|X_s - x0|^2) at every recorded node of the batch.
DistanceCurve w2_to_dirac(const TrajectoryBatch& batch, std::span<const double> x0);

struct TimeReversalOptions {
    double t1 = 0.5;
    double t2 = 2.0;
    double horizon = 4.0;
    std::size_t n_mc = 1000000;
    std::uint64_t seed = 0;
    std::size_t x_bins = 40;
    double x_lo = -6.0;
    double x_hi = 6.0;
    std::size_t y_bins = 5;
    double y_center = 0.0;
    double y_width = 0.2;      ///< width of one y-bin
    double reverse_ds = 0.01;  ///< target reverse step
    std::size_t workers = 1;
    std::size_t min_count = 500;
};

struct TimeReversalReport {
    std::vector<double> x_edges;
    std::vector<double> y_edges;
    std::vector<std::size_t> forward_counts;  ///< per y-bin
    std::vector<std::size_t> reverse_counts;
    /// Conditional bin probabilities, y-bin major.
    std::vector<double> forward_hist;
    std::vector<double> reverse_hist;
    std::vector<double> oracle_hist;
    std::vector<double> l1_forward_reverse;  ///< per y-bin
    std::vector<double> l1_forward_oracle;
    std::vector<double> l1_reverse_oracle;
    double max_discrepancy = 0.0;  ///< max of l1_forward_reverse

    double max_forward_oracle() const;
    double max_reverse_oracle() const;
};

/// Compares rho(x, t1 | y, t2) from forward simulation with q(x, s1 | y, s2)
/// from exact-sampler reverse simulation started at rho(., T*), in 1D.
/// The oracle histogram integrates the bivariate Gaussian components.
/// Throws StatisticsError when a y-bin has fewer than min_count samples.
TimeReversalReport time_reversal_check(const GaussianMixtureScore& rho0,
                                       const TimeReversalOptions& options);

}  // namespace revdiff
