#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "revdiff/core.hpp"
#include "revdiff/reverse_samplers.hpp"

namespace revdiff {

struct DataConfig {
    std::string source = "ring";  ///< ring | grid | blobs | csv | points
    std::string path;             ///< csv
    std::size_t n = 10;           ///< ring
    double radius = 1.0;          ///< ring
    std::size_t dim = 2;          ///< grid, blobs
    std::size_t per_axis = 3;     ///< grid
    double spacing = 1.0;         ///< grid
    std::size_t blobs = 3;
    std::size_t per_blob = 5;
    double spread = 0.1;          ///< blobs
    std::vector<std::vector<double>> points;  ///< points
    std::vector<double> weights;              ///< points; empty = uniform
};

struct ScheduleConfig {
    ScheduleKind kind = ScheduleKind::Geometric;
    double horizon = 4.0;
    std::size_t steps = 500;
    double t_min = 1e-4;
};

struct SamplerConfig {
    SamplerKind kind = SamplerKind::Exact;
    std::size_t n_traj = 1000;
    std::string q0 = "normal";  ///< normal | dirac | forward_marginal
    std::vector<double> q0_point;
    EmNoiseScale em_noise = EmNoiseScale::Sde;
};

struct PdeConfig {
    std::string mode = "forward";  ///< forward | reverse-stable | reverse-unstable | reverse-transport
    double half_width = 8.0;       ///< L
    std::size_t intervals = 800;   ///< M
    double dt = 0.0;               ///< 0 = solver default
    double bandwidth = 0.05;       ///< v of the Gaussian-mixture rho_0
    double t_min = 1e-2;
    std::vector<double> save_times;
    std::string q0 = "forward";    ///< forward (rho(., T*) computed on the grid) | normal
    double perturbation = 1e-6;    ///< reverse-unstable
    double t_run = 0.2;            ///< reverse-unstable
};

struct AnalysisConfig {
    std::optional<double> eps;  ///< default 0.1 * scale / sqrt(d)
    std::size_t bins = 40;
    double t1 = 0.5;
    double t2 = 2.0;
    std::size_t n_mc = 100000;
    std::size_t y_bins = 5;
    double y_width = 0.2;
    double x_lo = -6.0;
    double x_hi = 6.0;
    double reverse_ds = 0.01;
    double bandwidth = 0.0;  ///< rho_0 of the time-reversal check
    double x_start_lo = -2.0;
    double x_start_hi = 2.0;
    std::size_t x_start_count = 41;
};

struct LossSectionConfig {
    std::string predictor = "kernel";  ///< kernel | zero | shift | nearest | random_feature
    double shift = 0.1;
    std::size_t features = 16;
    double amplitude = 0.1;
    std::string sampling = "uniform";  ///< uniform | geometric | grid
    std::size_t grid_points = 50;
    double t_min = 1e-3;
    std::size_t n_mc = 10000;
};

struct ExperimentConfig {
    DataConfig data;
    ScheduleConfig schedule;
    SamplerConfig sampler;
    PdeConfig pde;
    AnalysisConfig analysis;
    LossSectionConfig loss;
    std::uint64_t seed = 0;
};

/// Validates types and ranges; unknown keys raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Full canonical form including defaults.
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

/// FNV-1a of the canonical JSON text.
std::uint64_t config_hash(const ExperimentConfig& cfg);

SampleSet build_samples(const DataConfig& data, std::uint64_t seed);
InitialLaw build_initial_law(const ExperimentConfig& cfg, const SampleSet& samples);
Schedule build_schedule(const ScheduleConfig& s);

}  // namespace revdiff
