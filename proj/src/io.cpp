#include "revdiff/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>

#include "revdiff/errors.hpp"

namespace revdiff {

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryBatch& batch,
                          const std::string& comment) {
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "traj_id,step,s,t";
    for (std::size_t k = 0; k < batch.dim; ++k) out << ",x_" << k;
    out << '\n';
    std::string line;
    for (std::size_t j = 0; j < batch.n_traj; ++j) {
        for (std::size_t r = 0; r < batch.n_recorded(); ++r) {
            line.clear();
            line += std::to_string(j);
            line += ',';
            line += std::to_string(batch.nodes[r]);
            line += ',';
            line += format_double(batch.s(r));
            line += ',';
            line += format_double(batch.t(r));
            for (double v : batch.state(j, r)) {
                line += ',';
                line += format_double(v);
            }
            line += '\n';
            out << line;
        }
    }
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b.data(), 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
    std::array<unsigned char, 8> b{};
    in.read(reinterpret_cast<char*>(b.data()), 8);
    if (!in) throw ConfigError("binary trajectories: truncated stream");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

constexpr char kMagic[8] = {'R', 'D', 'L', 'B', '1', '\0', '\0', '\0'};

}  // namespace

void write_trajectory_binary(std::ostream& out, const TrajectoryBatch& batch,
                             std::uint64_t config_hash) {
    out.write(kMagic, 8);
    put_u64(out, config_hash);
    put_u64(out, batch.n_traj);
    put_u64(out, batch.n_recorded());
    put_u64(out, batch.dim);
    for (std::size_t r = 0; r < batch.n_recorded(); ++r) {
        put_u64(out, batch.nodes[r]);
        put_f64(out, batch.s(r));
        put_f64(out, batch.t(r));
    }
    for (double v : batch.states) put_f64(out, v);
}

BinaryTrajectories read_trajectory_binary(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError("binary trajectories: bad magic");
    BinaryTrajectories b;
    b.config_hash = get_u64(in);
    b.n_traj = get_u64(in);
    const std::size_t n_rec = get_u64(in);
    b.dim = get_u64(in);
    for (std::size_t r = 0; r < n_rec; ++r) {
        b.steps.push_back(get_u64(in));
        b.s.push_back(get_f64(in));
        b.t.push_back(get_f64(in));
    }
    b.states.resize(b.n_traj * n_rec * b.dim);
    for (double& v : b.states) v = get_f64(in);
    return b;
}

void write_grid_csv(std::ostream& out, const DensityGrid& grid, const std::string& comment) {
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "x,value\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
        out << format_double(grid.x(i)) << ',' << format_double(grid.values[i]) << '\n';
}

nlohmann::ordered_json to_json(const MemorizationReport& r) {
    nlohmann::ordered_json j;
    j["n_traj"] = r.n_traj;
    j["eps"] = r.eps;
    j["frac_within_eps"] = r.frac_within_eps;
    j["median_dist"] = r.median_dist;
    j["p90_dist"] = r.p90_dist;
    j["hits"] = r.hits;
    j["empirical_weights"] = r.empirical_weights;
    j["omega_ref"] = r.omega_ref;
    j["tv_gap"] = r.tv_gap;
    return j;
}

nlohmann::ordered_json to_json(const LossEstimate& e) {
    nlohmann::ordered_json j;
    j["value"] = e.value;
    j["se"] = e.std_error;
    j["n"] = e.n_mc;
    j["sampler"] = e.sampling;
    j["weight"] = e.weight;
    return j;
}

namespace {

// JSON has no inf/nan; those become null.
nlohmann::ordered_json finite_array(const std::vector<double>& v) {
    auto arr = nlohmann::ordered_json::array();
    for (double x : v) {
        if (std::isfinite(x))
            arr.push_back(x);
        else
            arr.push_back(nullptr);
    }
    return arr;
}

}  // namespace

nlohmann::ordered_json to_json(const PdeRunReport& r) {
    nlohmann::ordered_json j;
    j["times"] = finite_array(r.times);
    j["mass_drift"] = finite_array(r.mass_drift);
    j["min_value"] = finite_array(r.min_value);
    j["max_value"] = finite_array(r.max_value);
    j["l2_norm"] = finite_array(r.l2_norm);
    j["hf_energy"] = finite_array(r.hf_energy);
    j["clipped_mass"] = r.clipped_mass;
    j["blew_up"] = r.blew_up;
    j["blowup_step"] = r.blowup_step;
    return j;
}

nlohmann::ordered_json to_json(const TimeReversalReport& r) {
    nlohmann::ordered_json j;
    j["x_edges"] = r.x_edges;
    j["y_edges"] = r.y_edges;
    j["forward_counts"] = r.forward_counts;
    j["reverse_counts"] = r.reverse_counts;
    j["l1_forward_reverse"] = r.l1_forward_reverse;
    j["l1_forward_oracle"] = r.l1_forward_oracle;
    j["l1_reverse_oracle"] = r.l1_reverse_oracle;
    j["max_discrepancy"] = r.max_discrepancy;
    return j;
}

nlohmann::ordered_json to_json(const WeightsEstimate& w) {
    nlohmann::ordered_json j;
    j["mean"] = w.mean;
    j["std_error"] = w.std_error;
    j["n_mc"] = w.n_mc;
    return j;
}

}  // namespace revdiff
