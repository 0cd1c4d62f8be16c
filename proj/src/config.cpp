#include "revdiff/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "revdiff/data.hpp"
#include "revdiff/errors.hpp"
#include "revdiff/io.hpp"

namespace revdiff {

namespace {

using nlohmann::json;

/// Typed reader over one JSON object that remembers which keys were consumed.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            read(*it, out);
        } catch (const json::exception&) {
            throw ConfigError("config: " + name_ + "." + key + " has the wrong type");
        }
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("config: unknown key '" + name_ + "." + k + "'");
    }

private:
    static void read(const json& v, double& out) {
        if (!v.is_number()) throw json::type_error::create(302, "number expected", &v);
        out = v.get<double>();
    }
    static void read(const json& v, std::size_t& out) {
        if (!v.is_number_unsigned()) throw json::type_error::create(302, "unsigned expected", &v);
        out = v.get<std::size_t>();
    }
    static void read(const json& v, std::string& out) { out = v.get<std::string>(); }
    static void read(const json& v, std::vector<double>& out) {
        if (!v.is_array()) throw json::type_error::create(302, "array expected", &v);
        out.clear();
        for (const auto& e : v) {
            double d = 0.0;
            read(e, d);
            out.push_back(d);
        }
    }
    static void read(const json& v, std::vector<std::vector<double>>& out) {
        if (!v.is_array()) throw json::type_error::create(302, "array expected", &v);
        out.clear();
        for (const auto& e : v) {
            std::vector<double> row;
            read(e, row);
            out.push_back(std::move(row));
        }
    }
    static void read(const json& v, std::optional<double>& out) {
        if (v.is_null()) {
            out.reset();
            return;
        }
        double d = 0.0;
        read(v, d);
        out = d;
    }

    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError("config: " + message);
}

template <typename Enum, typename Parse>
void get_enum(Section& s, const char* key, Enum& out, Parse parse) {
    std::string text;
    s.get(key, text);
    if (!text.empty()) out = parse(text);
}

void check_choice(const std::string& value, std::initializer_list<const char*> choices,
                  const std::string& what) {
    for (const char* c : choices)
        if (value == c) return;
    std::string list;
    for (const char* c : choices) list += (list.empty() ? "" : "|") + std::string(c);
    throw ConfigError("config: " + what + " must be one of " + list + ", got '" + value + "'");
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    ExperimentConfig cfg;
    static const std::set<std::string> sections{"data", "schedule", "sampler", "pde",
                                                "analysis", "loss", "seed"};
    for (const auto& [k, v] : j.items())
        if (!sections.count(k)) throw ConfigError("config: unknown section '" + k + "'");

    if (j.contains("seed")) {
        const auto& v = j["seed"];
        require(v.is_number_unsigned(), "seed must be a non-negative integer");
        cfg.seed = v.get<std::uint64_t>();
    }
    if (j.contains("data")) {
        Section s(j["data"], "data");
        auto& d = cfg.data;
        s.get("source", d.source);
        s.get("path", d.path);
        s.get("n", d.n);
        s.get("radius", d.radius);
        s.get("dim", d.dim);
        s.get("per_axis", d.per_axis);
        s.get("spacing", d.spacing);
        s.get("blobs", d.blobs);
        s.get("per_blob", d.per_blob);
        s.get("spread", d.spread);
        s.get("points", d.points);
        s.get("weights", d.weights);
        s.finish();
    }
    check_choice(cfg.data.source, {"ring", "grid", "blobs", "csv", "points"}, "data.source");
    require(cfg.data.source != "csv" || !cfg.data.path.empty(), "data.path is required for csv data");
    require(cfg.data.source != "points" || !cfg.data.points.empty(), "data.points must not be empty");

    if (j.contains("schedule")) {
        Section s(j["schedule"], "schedule");
        auto& sc = cfg.schedule;
        get_enum(s, "kind", sc.kind, schedule_kind_from_string);
        s.get("horizon", sc.horizon);
        s.get("steps", sc.steps);
        s.get("t_min", sc.t_min);
        s.finish();
    }
    require(cfg.schedule.kind != ScheduleKind::Custom, "schedule.kind must be uniform or geometric");
    require(cfg.schedule.t_min > 0.0 && cfg.schedule.horizon > cfg.schedule.t_min,
            "schedule needs horizon > t_min > 0");
    require(cfg.schedule.steps >= 1, "schedule.steps must be >= 1");

    if (j.contains("sampler")) {
        Section s(j["sampler"], "sampler");
        auto& sm = cfg.sampler;
        get_enum(s, "kind", sm.kind, sampler_kind_from_string);
        s.get("n_traj", sm.n_traj);
        s.get("q0", sm.q0);
        s.get("q0_point", sm.q0_point);
        get_enum(s, "em_noise_scale", sm.em_noise, em_noise_scale_from_string);
        s.finish();
    }
    require(cfg.sampler.n_traj >= 1, "sampler.n_traj must be >= 1");
    check_choice(cfg.sampler.q0, {"normal", "dirac", "forward_marginal"}, "sampler.q0");
    require(cfg.sampler.q0 != "dirac" || !cfg.sampler.q0_point.empty(),
            "sampler.q0_point is required for a dirac q0");

    if (j.contains("pde")) {
        Section s(j["pde"], "pde");
        auto& p = cfg.pde;
        s.get("mode", p.mode);
        s.get("L", p.half_width);
        s.get("M", p.intervals);
        s.get("dt", p.dt);
        s.get("v", p.bandwidth);
        s.get("t_min", p.t_min);
        s.get("save_times", p.save_times);
        s.get("q0", p.q0);
        s.get("perturbation", p.perturbation);
        s.get("t_run", p.t_run);
        s.finish();
    }
    check_choice(cfg.pde.mode, {"forward", "reverse-stable", "reverse-unstable", "reverse-transport"},
                 "pde.mode");
    check_choice(cfg.pde.q0, {"forward", "normal"}, "pde.q0");
    require(cfg.pde.half_width > 0.0, "pde.L must be positive");
    require(cfg.pde.intervals >= 2, "pde.M must be >= 2");
    require(cfg.pde.dt >= 0.0, "pde.dt must be >= 0");
    require(cfg.pde.bandwidth >= 0.0, "pde.v must be >= 0");
    require(cfg.pde.t_min > 0.0, "pde.t_min must be positive");
    require(cfg.pde.t_run > 0.0, "pde.t_run must be positive");

    if (j.contains("analysis")) {
        Section s(j["analysis"], "analysis");
        auto& a = cfg.analysis;
        s.get("eps", a.eps);
        s.get("bins", a.bins);
        s.get("t1", a.t1);
        s.get("t2", a.t2);
        s.get("n_mc", a.n_mc);
        s.get("y_bins", a.y_bins);
        s.get("y_width", a.y_width);
        s.get("x_lo", a.x_lo);
        s.get("x_hi", a.x_hi);
        s.get("reverse_ds", a.reverse_ds);
        s.get("bandwidth", a.bandwidth);
        s.get("x_start_lo", a.x_start_lo);
        s.get("x_start_hi", a.x_start_hi);
        s.get("x_start_count", a.x_start_count);
        s.finish();
    }
    require(!cfg.analysis.eps || *cfg.analysis.eps > 0.0, "analysis.eps must be positive");
    require(cfg.analysis.bins >= 1 && cfg.analysis.y_bins >= 1, "analysis bins must be >= 1");
    require(cfg.analysis.n_mc >= 1, "analysis.n_mc must be >= 1");
    require(cfg.analysis.x_start_count >= 1, "analysis.x_start_count must be >= 1");

    if (j.contains("loss")) {
        Section s(j["loss"], "loss");
        auto& l = cfg.loss;
        s.get("predictor", l.predictor);
        s.get("shift", l.shift);
        s.get("features", l.features);
        s.get("amplitude", l.amplitude);
        s.get("sampling", l.sampling);
        s.get("grid_points", l.grid_points);
        s.get("t_min", l.t_min);
        s.get("n_mc", l.n_mc);
        s.finish();
    }
    check_choice(cfg.loss.predictor, {"kernel", "zero", "shift", "nearest", "random_feature"},
                 "loss.predictor");
    check_choice(cfg.loss.sampling, {"uniform", "geometric", "grid"}, "loss.sampling");
    require(cfg.loss.n_mc >= 1, "loss.n_mc must be >= 1");
    require(cfg.loss.t_min > 0.0 && cfg.loss.t_min < cfg.schedule.horizon,
            "loss.t_min must lie in (0, schedule.horizon)");
    require(cfg.loss.grid_points >= 1, "loss.grid_points must be >= 1");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(j);
}

nlohmann::ordered_json to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    const auto& d = cfg.data;
    j["data"] = {{"source", d.source}, {"path", d.path},         {"n", d.n},
                 {"radius", d.radius}, {"dim", d.dim},           {"per_axis", d.per_axis},
                 {"spacing", d.spacing}, {"blobs", d.blobs},     {"per_blob", d.per_blob},
                 {"spread", d.spread}, {"points", d.points},     {"weights", d.weights}};
    const auto& s = cfg.schedule;
    j["schedule"] = {{"kind", to_string(s.kind)}, {"horizon", s.horizon}, {"steps", s.steps},
                     {"t_min", s.t_min}};
    const auto& sm = cfg.sampler;
    j["sampler"] = {{"kind", to_string(sm.kind)}, {"n_traj", sm.n_traj},      {"q0", sm.q0},
                    {"q0_point", sm.q0_point},    {"em_noise_scale", to_string(sm.em_noise)}};
    const auto& p = cfg.pde;
    j["pde"] = {{"mode", p.mode},   {"L", p.half_width},         {"M", p.intervals},
                {"dt", p.dt},       {"v", p.bandwidth},          {"t_min", p.t_min},
                {"save_times", p.save_times}, {"q0", p.q0},      {"perturbation", p.perturbation},
                {"t_run", p.t_run}};
    const auto& a = cfg.analysis;
    j["analysis"] = {{"eps", a.eps ? nlohmann::ordered_json(*a.eps) : nlohmann::ordered_json(nullptr)},
                     {"bins", a.bins},       {"t1", a.t1},           {"t2", a.t2},
                     {"n_mc", a.n_mc},       {"y_bins", a.y_bins},   {"y_width", a.y_width},
                     {"x_lo", a.x_lo},       {"x_hi", a.x_hi},       {"reverse_ds", a.reverse_ds},
                     {"bandwidth", a.bandwidth}, {"x_start_lo", a.x_start_lo},
                     {"x_start_hi", a.x_start_hi}, {"x_start_count", a.x_start_count}};
    const auto& l = cfg.loss;
    j["loss"] = {{"predictor", l.predictor}, {"shift", l.shift},       {"features", l.features},
                 {"amplitude", l.amplitude}, {"sampling", l.sampling}, {"grid_points", l.grid_points},
                 {"t_min", l.t_min},         {"n_mc", l.n_mc}};
    j["seed"] = cfg.seed;
    return j;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a64(to_json(cfg).dump()); }

SampleSet build_samples(const DataConfig& d, std::uint64_t seed) {
    try {
        if (d.source == "ring") return make_ring(d.n, d.radius);
        if (d.source == "grid") return make_grid(d.per_axis, d.dim, d.spacing);
        if (d.source == "blobs") return make_blobs(d.blobs, d.per_blob, d.dim, d.spread, seed);
        if (d.source == "csv") return load_samples_csv(d.path);
        if (d.source == "points") {
            const std::size_t dim = d.points.front().size();
            std::vector<double> coords;
            for (const auto& p : d.points) {
                if (p.size() != dim || dim == 0) throw ConfigError("config: data.points rows must share one dimension");
                coords.insert(coords.end(), p.begin(), p.end());
            }
            return SampleSet(dim, std::move(coords), d.weights);
        }
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config: invalid data: ") + e.what());
    }
    throw ConfigError("config: unknown data source '" + d.source + "'");
}

InitialLaw build_initial_law(const ExperimentConfig& cfg, const SampleSet& samples) {
    const auto& sm = cfg.sampler;
    InitialLaw q0;
    if (sm.q0 == "normal") {
        q0 = InitialLaw::standard_normal(samples.dim());
    } else if (sm.q0 == "dirac") {
        if (sm.q0_point.size() != samples.dim())
            throw ConfigError("config: sampler.q0_point must have the data dimension");
        q0 = InitialLaw::dirac(sm.q0_point);
    } else {
        q0 = InitialLaw::forward_marginal(samples, cfg.schedule.horizon, 0.0);
    }
    q0.validate();
    return q0;
}

Schedule build_schedule(const ScheduleConfig& s) {
    try {
        return make_schedule(s.kind, s.horizon, s.steps, s.t_min);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config: invalid schedule: ") + e.what());
    }
}

}  // namespace revdiff
