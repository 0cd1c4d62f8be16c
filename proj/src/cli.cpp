#include "revdiff/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "revdiff/analysis.hpp"
#include "revdiff/config.hpp"
#include "revdiff/errors.hpp"
#include "revdiff/fokker_planck.hpp"
#include "revdiff/io.hpp"
#include "revdiff/loss_lab.hpp"
#include "revdiff/random_stream.hpp"
#include "revdiff/score_field.hpp"

namespace revdiff {

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t workers = 1;
    std::string sampler;
    std::string em_noise;
    std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
    cmd->add_option("--out", o.out, "output directory (default $REVDIFF_OUT or .)");
    cmd->add_option("--workers", o.workers, "worker threads; never changes results")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--sampler", o.sampler, "reverse sampler")->check(CLI::IsMember({"em", "exact", "ode"}));
    cmd->add_option("--em-noise-scale", o.em_noise, "Euler-Maruyama noise scale")
        ->check(CLI::IsMember({"paper", "sde"}));
    cmd->add_option("--format", o.format, "trajectory output format")
        ->check(CLI::IsMember({"csv", "bin", "json"}));
}

/// Collects output files and writes the run manifest.
class OutputSink {
public:
    OutputSink(const CommonOptions& o, std::string command, const ExperimentConfig& cfg)
        : command_(std::move(command)), cfg_(cfg), hash_(config_hash(cfg)) {
        std::string dir = o.out;
        if (dir.empty()) {
            const char* env = std::getenv("REVDIFF_OUT");
            dir = env && *env ? env : ".";
        }
        dir_ = dir;
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    }

    std::uint64_t hash() const { return hash_; }

    std::string comment() const {
        return "config_hash=" + hex64(hash_) + " seed=" + std::to_string(cfg_.seed) +
               " command=" + command_;
    }

    void write(const std::string& name, const std::string& content) {
        const auto path = dir_ / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ConfigError("cannot write '" + path.string() + "'");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw ConfigError("failed writing '" + path.string() + "'");
        files_.push_back({{"file", name}, {"bytes", content.size()}, {"fnv1a", hex64(fnv1a64(content))}});
    }

    void write_json(const std::string& name, nlohmann::ordered_json j) {
        nlohmann::ordered_json wrapped;
        wrapped["config_hash"] = hex64(hash_);
        for (auto& [k, v] : j.items()) wrapped[k] = v;
        write(name, wrapped.dump(2) + "\n");
    }

    void finish() {
        nlohmann::ordered_json m;
        m["tool"] = "revdiff";
        m["version"] = kVersion;
        m["command"] = command_;
        m["config_hash"] = hex64(hash_);
        m["seed"] = cfg_.seed;
        m["config"] = to_json(cfg_);
        m["outputs"] = files_;
        const std::string text = m.dump(2) + "\n";
        std::ofstream f(dir_ / "manifest.json", std::ios::binary);
        f << text;
    }

    std::filesystem::path dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::string command_;
    ExperimentConfig cfg_;
    std::uint64_t hash_;
    nlohmann::ordered_json files_ = nlohmann::ordered_json::array();
};

ExperimentConfig resolve_config(const CommonOptions& o) {
    ExperimentConfig cfg = o.config.empty() ? parse_config(nlohmann::json::object()) : load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.sampler.empty()) cfg.sampler.kind = sampler_kind_from_string(o.sampler);
    if (!o.em_noise.empty()) cfg.sampler.em_noise = em_noise_scale_from_string(o.em_noise);
    return cfg;
}

std::string indexed(const std::string& stem, std::size_t k, const std::string& ext) {
    std::ostringstream os;
    os << stem << '_' << std::setw(3) << std::setfill('0') << k << ext;
    return os.str();
}

GaussianMixtureScore pde_mixture(const ExperimentConfig& cfg, const SampleSet& samples) {
    if (samples.dim() != 1) throw ConfigError("pde: the grid solvers need 1D data");
    if (!(cfg.pde.bandwidth > 0.0)) throw ConfigError("pde: v must be positive for grid densities");
    return GaussianMixtureScore(samples, cfg.pde.bandwidth);
}

DensityGrid mixture_grid(const ExperimentConfig& cfg, const GaussianMixtureScore& mix, double t) {
    return DensityGrid::from_function(cfg.pde.half_width, cfg.pde.intervals, [&](double x) {
        const double p[1] = {x};
        return std::exp(mix.log_density(p, t));
    });
}

PdeOptions pde_options(const ExperimentConfig& cfg) {
    PdeOptions opt;
    opt.dt = cfg.pde.dt;
    opt.save_times = cfg.pde.save_times;
    return opt;
}

void write_grids(OutputSink& sink, const std::string& stem, const PdeSolution& sol, const char* clock) {
    for (std::size_t k = 0; k < sol.grids.size(); ++k)
        sink.write(indexed(stem, k, ".csv"), [&] {
            std::ostringstream os;
            write_grid_csv(os, sol.grids[k], sink.comment() + " " + clock + "=" + format_double(sol.times[k]));
            return os.str();
        }());
}

// --- forward ---------------------------------------------------------------

int cmd_forward(const CommonOptions& o, const std::string& kind, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(o);
    const SampleSet samples = build_samples(cfg.data, cfg.seed);
    OutputSink sink(o, "forward", cfg);
    if (kind == "pde") {
        const auto mix = pde_mixture(cfg, samples);
        const auto sol = solve_forward(mixture_grid(cfg, mix, 0.0), cfg.schedule.horizon, pde_options(cfg));
        write_grids(sink, "pde_forward", sol, "t");
        sink.write_json("pde_report.json", to_json(sol.report));
        sink.finish();
        out << "forward pde: " << sol.grids.size() << " density files in " << sink.dir().string() << "\n";
        return kExitOk;
    }
    const std::size_t n = cfg.sampler.n_traj, steps = cfg.schedule.steps, d = samples.dim();
    const double horizon = cfg.schedule.horizon;
    const RandomStream rng(cfg.seed);
    std::ostringstream os;
    os << "# " << sink.comment() << "\n";
    os << "traj_id,step,t";
    for (std::size_t k = 0; k < d; ++k) os << ",x_" << k;
    os << "\n";
    Point x(d), z(d), next(d);
    for (std::size_t j = 0; j < n; ++j) {
        auto atom = rng.substream(Purpose::AtomChoice, j);
        const auto p = samples.point(atom.categorical(samples.cumulative_weights()));
        x.assign(p.begin(), p.end());
        double t_prev = 0.0;
        for (std::size_t k = 0; k <= steps; ++k) {
            const double t = horizon * static_cast<double>(k) / static_cast<double>(steps);
            if (k > 0) {
                auto noise = rng.substream(Purpose::ForwardNoise, j, static_cast<std::uint32_t>(k));
                noise.fill_normal(z);
                forward_sample_into(x, t - t_prev, z, next);
                std::swap(x, next);
            }
            t_prev = t;
            os << j << ',' << k << ',' << format_double(t);
            for (double v : x) os << ',' << format_double(v);
            os << "\n";
        }
    }
    sink.write("forward_trajectories.csv", os.str());
    sink.finish();
    out << "forward: " << n * (steps + 1) << " rows in " << sink.dir().string() << "\n";
    return kExitOk;
}

// --- reverse ---------------------------------------------------------------

int cmd_reverse(const CommonOptions& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(o);
    const SampleSet samples = build_samples(cfg.data, cfg.seed);
    const Schedule schedule = build_schedule(cfg.schedule);
    const InitialLaw q0 = build_initial_law(cfg, samples);
    const KernelScore field(samples);
    ReverseOptions ro;
    ro.sampler = cfg.sampler.kind;
    ro.em_noise = cfg.sampler.em_noise;
    ro.workers = o.workers;
    OutputSink sink(o, "reverse", cfg);
    const auto batch = run_reverse(field, schedule, q0, cfg.sampler.n_traj, cfg.seed, ro);
    if (o.format == "csv") {
        std::ostringstream os;
        write_trajectory_csv(os, batch, sink.comment());
        sink.write("reverse_trajectories.csv", os.str());
    } else if (o.format == "bin") {
        std::ostringstream os(std::ios::binary);
        write_trajectory_binary(os, batch, sink.hash());
        sink.write("reverse_trajectories.bin", os.str());
    }
    const double eps = cfg.analysis.eps.value_or(default_memorization_eps(samples));
    const auto report = memorization_report(batch, samples, eps);
    auto j = to_json(report);
    j["sampler"] = to_string(cfg.sampler.kind);
    j["q0"] = q0.describe();
    sink.write_json("memorization_report.json", j);
    sink.finish();
    out << "reverse (" << to_string(cfg.sampler.kind) << "): frac_within_eps=" << report.frac_within_eps
        << " tv_gap=" << report.tv_gap << "\n";
    return kExitOk;
}

// --- pde -------------------------------------------------------------------

int cmd_pde(const CommonOptions& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(o);
    if (cfg.pde.mode == "forward") return cmd_forward(o, "pde", out);
    const SampleSet samples = build_samples(cfg.data, cfg.seed);
    const auto mix = pde_mixture(cfg, samples);
    const double horizon = cfg.schedule.horizon, t_min = cfg.pde.t_min;
    OutputSink sink(o, "pde", cfg);

    std::optional<PdeSolution> forward;
    DensityGrid q0;
    if (cfg.pde.q0 == "forward") {
        PdeOptions fo;
        fo.dt = cfg.pde.dt;
        if (t_min < horizon) fo.save_times = {t_min};
        forward = solve_forward(mixture_grid(cfg, mix, 0.0), horizon, fo);
        q0 = forward->grids.back();
    } else {
        q0 = DensityGrid::gaussian(cfg.pde.half_width, cfg.pde.intervals, 0.0, 1.0);
    }

    if (cfg.pde.mode == "reverse-unstable") {
        const double m = static_cast<double>(cfg.pde.intervals);
        for (std::size_t i = 0; i < q0.size(); ++i)
            q0.values[i] +=
                cfg.pde.perturbation * (1.0 + std::cos(std::numbers::pi * m * q0.x(i) / (2.0 * cfg.pde.half_width)));
        PdeOptions opt = pde_options(cfg);
        opt.track_spectrum = true;
        const auto rep = solve_reverse_unstable(q0, cfg.pde.t_run, opt);
        auto j = to_json(rep);
        const double growth = rep.hf_energy.size() > 1 ? rep.hf_energy.back() / rep.hf_energy.front() : 1.0;
        j["hf_growth"] = std::isfinite(growth) ? nlohmann::ordered_json(growth) : nlohmann::ordered_json(nullptr);
        sink.write_json("pde_report.json", j);
        sink.finish();
        out << "pde reverse-unstable: hf energy growth " << growth << (rep.blew_up ? " (blew up)" : "") << "\n";
        return kExitOk;
    }

    const auto score = score_table(mix);
    const bool stable = cfg.pde.mode == "reverse-stable";
    const auto sol = stable ? solve_reverse_stable(q0, score, horizon, t_min, pde_options(cfg))
                            : solve_reverse_transport(q0, score, horizon, t_min, pde_options(cfg));
    write_grids(sink, stable ? "pde_reverse_stable" : "pde_reverse_transport", sol, "s");
    auto j = to_json(sol.report);
    j["mass_drift_rate"] = sol.report.max_mass_drift_rate();
    if (forward) {
        const double l1 = l1_distance(sol.grids.back(), forward->at(t_min));
        j["round_trip_l1"] = l1;
        out << "pde " << cfg.pde.mode << ": L1 to forward solution at t_min = " << l1 << "\n";
    } else {
        out << "pde " << cfg.pde.mode << ": done\n";
    }
    sink.write_json("pde_report.json", j);
    sink.finish();
    return kExitOk;
}

// --- loss ------------------------------------------------------------------

PredictorFn build_predictor(const ExperimentConfig& cfg, const SampleSet& samples) {
    const auto& l = cfg.loss;
    if (l.predictor == "kernel") return kernel_xbar_predictor(samples);
    if (l.predictor == "zero") return zero_predictor();
    if (l.predictor == "shift")
        return shifted_predictor(kernel_xbar_predictor(samples), Point(samples.dim(), l.shift));
    if (l.predictor == "nearest") return nearest_atom_predictor(samples);
    return random_feature_predictor(kernel_xbar_predictor(samples), samples.dim(), l.features, l.amplitude,
                                    cfg.seed);
}

std::vector<double> geometric_grid(double t_min, double horizon, std::size_t n) {
    std::vector<double> g;
    for (std::size_t k = 0; k < n; ++k)
        g.push_back(n == 1 ? t_min : t_min * std::pow(horizon / t_min, static_cast<double>(k) / static_cast<double>(n - 1)));
    return g;
}

std::vector<double> uniform_grid(double t_min, double horizon, std::size_t n) {
    std::vector<double> g;
    for (std::size_t k = 0; k < n; ++k)
        g.push_back(n == 1 ? t_min : t_min + (horizon - t_min) * static_cast<double>(k) / static_cast<double>(n - 1));
    return g;
}

int cmd_loss(const CommonOptions& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(o);
    const SampleSet samples = build_samples(cfg.data, cfg.seed);
    const auto& l = cfg.loss;
    const double horizon = cfg.schedule.horizon;
    LossConfig lc;
    lc.n_mc = l.n_mc;
    lc.seed = cfg.seed;
    lc.workers = o.workers;
    if (l.sampling == "uniform")
        lc.sampling = TimeSampling::uniform(l.t_min, horizon);
    else if (l.sampling == "geometric")
        lc.sampling = TimeSampling::discrete(geometric_grid(l.t_min, horizon, l.grid_points));
    else
        lc.sampling = TimeSampling::discrete(uniform_grid(l.t_min, horizon, l.grid_points));

    OutputSink sink(o, "loss", cfg);
    const PredictorFn xbar = build_predictor(cfg, samples);
    const PredictorFn eps = eps_predictor_from_xbar(xbar);
    const KernelScore kernel(samples);
    const PredictorScore s_theta(samples.dim(), PredictorMode::Xbar, xbar);

    const auto total = total_loss(xbar, samples, lc);
    const auto eps_total = eps_total_loss(eps, samples, lc);
    const auto score = score_loss(s_theta, kernel, lc);
    const auto floor = variance_floor(samples, lc);
    const auto floor_rb = variance_floor_rao_blackwell(samples, lc);
    const auto riemann_geo = riemann_eps_loss(eps, samples, geometric_grid(l.t_min, horizon, l.grid_points),
                                              l.n_mc, cfg.seed, o.workers);
    const auto riemann_uni = riemann_eps_loss(eps, samples, uniform_grid(l.t_min, horizon, l.grid_points),
                                              l.n_mc, cfg.seed, o.workers);

    nlohmann::ordered_json j;
    j["predictor"] = l.predictor;
    j["total_loss"] = to_json(total);
    j["eps_total_loss"] = to_json(eps_total);
    j["score_loss"] = to_json(score);
    j["variance_floor"] = to_json(floor);
    j["variance_floor_rao_blackwell"] = to_json(floor_rb);
    j["riemann_eps_loss_geometric"] = to_json(riemann_geo);
    j["riemann_eps_loss_uniform"] = to_json(riemann_uni);
    j["decomposition_gap"] = total.value - floor.value - score.value;
    sink.write_json("loss_report.json", j);
    sink.finish();
    out << "loss (" << l.predictor << "): total=" << total.value << " +- " << total.std_error
        << " floor=" << floor.value << " score=" << score.value << "\n";
    return kExitOk;
}

// --- timereversal ----------------------------------------------------------

int cmd_timereversal(const CommonOptions& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(o);
    const SampleSet samples = build_samples(cfg.data, cfg.seed);
    if (samples.dim() != 1) throw ConfigError("timereversal: the check needs 1D data");
    const GaussianMixtureScore rho0(samples, cfg.analysis.bandwidth);
    const auto& a = cfg.analysis;
    TimeReversalOptions opt;
    opt.t1 = a.t1;
    opt.t2 = a.t2;
    opt.horizon = cfg.schedule.horizon;
    opt.n_mc = a.n_mc;
    opt.seed = cfg.seed;
    opt.x_bins = a.bins;
    opt.x_lo = a.x_lo;
    opt.x_hi = a.x_hi;
    opt.y_bins = a.y_bins;
    opt.y_width = a.y_width;
    opt.reverse_ds = a.reverse_ds;
    opt.workers = o.workers;
    OutputSink sink(o, "timereversal", cfg);
    const auto rep = time_reversal_check(rho0, opt);
    std::ostringstream os;
    os << "# " << sink.comment() << "\n";
    os << "y_bin,y_lo,y_hi,x_lo,x_hi,forward,reverse,oracle\n";
    for (std::size_t y = 0; y < a.y_bins; ++y)
        for (std::size_t x = 0; x < a.bins; ++x) {
            const std::size_t k = y * a.bins + x;
            os << y << ',' << format_double(rep.y_edges[y]) << ',' << format_double(rep.y_edges[y + 1]) << ','
               << format_double(rep.x_edges[x]) << ',' << format_double(rep.x_edges[x + 1]) << ','
               << format_double(rep.forward_hist[k]) << ',' << format_double(rep.reverse_hist[k]) << ','
               << format_double(rep.oracle_hist[k]) << "\n";
        }
    sink.write("timereversal.csv", os.str());
    sink.write_json("timereversal.json", to_json(rep));
    sink.finish();
    out << "timereversal: max L1 forward/reverse = " << rep.max_discrepancy
        << ", forward/oracle = " << rep.max_forward_oracle() << ", reverse/oracle = " << rep.max_reverse_oracle()
        << "\n";
    return kExitOk;
}

// --- weights ---------------------------------------------------------------

int cmd_weights(const CommonOptions& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(o);
    const SampleSet samples = build_samples(cfg.data, cfg.seed);
    const auto& a = cfg.analysis;
    OutputSink sink(o, "weights", cfg);
    std::ostringstream os;
    os << "# " << sink.comment() << " T*=" << format_double(cfg.schedule.horizon) << "\n";
    for (std::size_t k = 0; k < samples.dim(); ++k) os << (k ? "," : "") << "x_start_" << k;
    for (std::size_t i = 0; i < samples.size(); ++i) os << ",omega_" << i;
    os << "\n";
    Point x(samples.dim(), 0.0);
    for (std::size_t r = 0; r < a.x_start_count; ++r) {
        x[0] = a.x_start_count == 1 ? a.x_start_lo
                                    : a.x_start_lo + (a.x_start_hi - a.x_start_lo) * static_cast<double>(r) /
                                                         static_cast<double>(a.x_start_count - 1);
        const auto w = terminal_weights(x, samples, cfg.schedule.horizon);
        for (std::size_t k = 0; k < x.size(); ++k) os << (k ? "," : "") << format_double(x[k]);
        for (double v : w) os << ',' << format_double(v);
        os << "\n";
    }
    sink.write("terminal_weights.csv", os.str());
    sink.finish();
    out << "weights: " << a.x_start_count << " rows in " << sink.dir().string() << "\n";
    return kExitOk;
}

// --- verify ----------------------------------------------------------------

int cmd_verify(const CommonOptions& o, bool list, bool break_sinh, std::ostream& out) {
    const std::uint64_t seed = o.seed.value_or(0);
    const auto checks = verify_checks(seed, break_sinh);
    if (list) {
        for (const auto& c : checks) out << c.name << "  " << c.description << "\n";
        return kExitOk;
    }
    std::size_t failed = 0;
    for (const auto& c : checks) {
        const auto r = c.run();
        if (!r.pass) ++failed;
        out << (r.pass ? "PASS " : "FAIL ") << std::left << std::setw(30) << c.name << " measured="
            << std::setprecision(6) << r.measured << " tolerance=" << r.tolerance << "\n";
    }
    out << (failed ? "verify: " + std::to_string(failed) + " check(s) failed\n" : "verify: all checks passed\n");
    return failed ? kExitVerifyFailed : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"revdiff: forward/reverse diffusion laboratory", "revdiff"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonOptions common;
    std::string forward_kind = "sde";
    bool list = false, break_sinh = false;

    auto* forward = app.add_subcommand("forward", "forward OU trajectories or forward PDE densities");
    add_common(forward, common);
    forward->add_option("--kind", forward_kind, "sde trajectories or pde densities")
        ->check(CLI::IsMember({"sde", "pde"}));
    auto* reverse = app.add_subcommand("reverse", "reverse trajectories and memorization report");
    add_common(reverse, common);
    auto* verify = app.add_subcommand("verify", "fast invariant suite");
    add_common(verify, common);
    verify->add_flag("--list", list, "list checks without running them");
    verify->add_flag("--break-sinh", break_sinh, "sabotage the sinh-form step (negative control)");
    auto* pde = app.add_subcommand("pde", "grid solvers (mode set by pde.mode)");
    add_common(pde, common);
    auto* loss = app.add_subcommand("loss", "Monte Carlo loss ladder");
    add_common(loss, common);
    auto* tr = app.add_subcommand("timereversal", "forward/reverse conditional histogram check");
    add_common(tr, common);
    auto* weights = app.add_subcommand("weights", "terminal weight table");
    add_common(weights, common);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (forward->parsed()) return cmd_forward(common, forward_kind, out);
        if (reverse->parsed()) return cmd_reverse(common, out);
        if (verify->parsed()) return cmd_verify(common, list, break_sinh, out);
        if (pde->parsed()) return cmd_pde(common, out);
        if (loss->parsed()) return cmd_loss(common, out);
        if (tr->parsed()) return cmd_timereversal(common, out);
        if (weights->parsed()) return cmd_weights(common, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kExitNumericalError;
    } catch (const StatisticsError& e) {
        err << "statistics error: " << e.what() << "\n";
        return kExitNumericalError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumericalError;
    }
    return kExitConfigError;
}

}  // namespace revdiff
