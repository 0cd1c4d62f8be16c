#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "revdiff/analysis.hpp"
#include "revdiff/fokker_planck.hpp"
#include "revdiff/loss_lab.hpp"
#include "revdiff/reverse_samplers.hpp"

namespace revdiff {

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

/// Columns traj_id,step,s,t,x_0..x_{d-1}; `comment` (if non-empty) goes first
/// as a "# ..." line.
void write_trajectory_csv(std::ostream& out, const TrajectoryBatch& batch,
                          const std::string& comment);

/// Little-endian layout: "RDLB1\0\0\0", u64 config hash, u64 n_traj,
/// u64 n_recorded, u64 dim, then per recorded node (u64 step, f64 s, f64 t),
/// then the states as f64, trajectory-major.
void write_trajectory_binary(std::ostream& out, const TrajectoryBatch& batch,
                             std::uint64_t config_hash);

struct BinaryTrajectories {
    std::uint64_t config_hash = 0;
    std::size_t n_traj = 0;
    std::size_t dim = 0;
    std::vector<std::size_t> steps;
    std::vector<double> s, t;
    std::vector<double> states;
};

/// Throws ConfigError on a bad magic or truncated stream.
BinaryTrajectories read_trajectory_binary(std::istream& in);

/// Columns x,value with a "# ..." comment line.
void write_grid_csv(std::ostream& out, const DensityGrid& grid, const std::string& comment);

nlohmann::ordered_json to_json(const MemorizationReport& r);
nlohmann::ordered_json to_json(const LossEstimate& e);
nlohmann::ordered_json to_json(const PdeRunReport& r);
nlohmann::ordered_json to_json(const TimeReversalReport& r);
nlohmann::ordered_json to_json(const WeightsEstimate& w);

}  // namespace revdiff
