#include "revdiff/reverse_samplers.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "revdiff/errors.hpp"
#include "revdiff/numerics.hpp"
#include "revdiff/random_stream.hpp"

namespace revdiff {

StepParams StepParams::between(double t_from, double t_to) {
    if (!(t_to > 0.0) || !(t_from > t_to) || !std::isfinite(t_from))
        throw DomainError("StepParams: require t_from > t_to > 0");
    return {t_from, t_to, t_from - t_to};
}

StepParams step_params(const Schedule& schedule, std::size_t k) {
    if (k + 1 >= schedule.nodes()) throw DomainError("step_params: step index out of range");
    return StepParams::between(schedule.t(k), schedule.t(k + 1));
}

std::string to_string(EmNoiseScale scale) {
    return scale == EmNoiseScale::Sde ? "sde" : "paper";
}

EmNoiseScale em_noise_scale_from_string(const std::string& name) {
    if (name == "sde") return EmNoiseScale::Sde;
    if (name == "paper") return EmNoiseScale::Paper;
    throw ConfigError("unknown em-noise-scale '" + name + "' (expected paper|sde)");
}

double reverse_drift(double x, double xbar, double t) {
    const auto c = coeffs(t);
    return x + 2.0 * (c.alpha * xbar - x) / c.beta_sq;
}

double reverse_drift_coth(double x, double xbar, double t) {
    return (xbar / std::cosh(t) - x) / std::tanh(t);
}

double reverse_drift_half_tanh(double x, double xbar, double t) {
    return -std::tanh(0.5 * t) * x + (xbar - x) / std::sinh(t);
}

Point em_step(std::span<const double> x, const StepParams& p, const ScoreField& field,
              std::span<const double> noise, EmNoiseScale scale) {
    const std::size_t d = x.size();
    Point s(d);
    field.score_into(x, p.t_from, s);
    const double noise_scale =
        scale == EmNoiseScale::Sde ? std::sqrt(2.0 * p.delta) : std::sqrt(p.delta);
    Point out(d);
    for (std::size_t k = 0; k < d; ++k)
        out[k] = x[k] + p.delta * (x[k] + 2.0 * s[k]) + noise_scale * noise[k];
    return out;
}

ExactStepCoeffs exact_step_coeffs(const StepParams& p) {
    // 1 - e^{-2u} evaluated as -expm1(-2u) to keep accuracy for small u.
    const double one_minus_from = -std::expm1(-2.0 * p.t_from);
    const double one_minus_to = -std::expm1(-2.0 * p.t_to);
    const double one_minus_delta = -std::expm1(-2.0 * p.delta);
    ExactStepCoeffs c;
    c.x_coeff = std::exp(-p.delta) * one_minus_to / one_minus_from;
    c.xbar_coeff = std::exp(-p.t_to) * one_minus_delta / one_minus_from;
    c.var = one_minus_to * one_minus_delta / one_minus_from;
    return c;
}

namespace {

constexpr double kSinhLogSpaceThreshold = 30.0;

double log_sinh(double a) { return a + std::log(-std::expm1(-2.0 * a)) - std::numbers::ln2; }

}  // namespace

ExactStepCoeffs sinh_step_coeffs(const StepParams& p) {
    ExactStepCoeffs c;
    if (p.t_from > kSinhLogSpaceThreshold) {
        const double lf = log_sinh(p.t_from);
        const double lt = log_sinh(p.t_to);
        const double ld = log_sinh(p.delta);
        c.x_coeff = std::exp(lt - lf);
        c.xbar_coeff = std::exp(ld - lf);
        c.var = 2.0 * std::exp(lt + ld - lf);
    } else {
        const double sf = std::sinh(p.t_from);
        c.x_coeff = std::sinh(p.t_to) / sf;
        c.xbar_coeff = std::sinh(p.delta) / sf;
        c.var = 2.0 * std::sinh(p.t_to) * std::sinh(p.delta) / sf;
    }
    return c;
}

namespace {

Point apply_step(const ExactStepCoeffs& c, std::span<const double> x, std::span<const double> xbar,
                 std::span<const double> noise) {
    if (x.size() != xbar.size() || x.size() != noise.size())
        throw DomainError("reverse step: dimension mismatch");
    const double sigma = std::sqrt(c.var);
    Point out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k)
        out[k] = c.x_coeff * x[k] + c.xbar_coeff * xbar[k] + sigma * noise[k];
    return out;
}

}  // namespace

Point exact_step(std::span<const double> x, const StepParams& p, std::span<const double> xbar,
                 std::span<const double> noise) {
    return apply_step(exact_step_coeffs(p), x, xbar, noise);
}

Point sinh_step(std::span<const double> x, const StepParams& p, std::span<const double> xbar,
                std::span<const double> noise) {
    return apply_step(sinh_step_coeffs(p), x, xbar, noise);
}

Point ode_step(std::span<const double> x, const StepParams& p, const ScoreField& field) {
    const std::size_t d = x.size();
    Point k1(d), k2(d), trial(d), out(d);
    field.score_into(x, p.t_from, k1);
    for (std::size_t k = 0; k < d; ++k) {
        k1[k] += x[k];
        trial[k] = x[k] + p.delta * k1[k];
    }
    field.score_into(trial, p.t_to, k2);
    for (std::size_t k = 0; k < d; ++k) {
        k2[k] += trial[k];
        out[k] = x[k] + 0.5 * p.delta * (k1[k] + k2[k]);
    }
    return out;
}

IsotropicGaussian dirac_exact_marginal(std::span<const double> x0, std::span<const double> cev_x0,
                                       double s, double horizon) {
    if (!(horizon > 0.0)) throw DomainError("dirac_exact_marginal: horizon must be positive");
    if (!(s >= 0.0) || !(s <= horizon))
        throw DomainError("dirac_exact_marginal: s must lie in [0, T*]");
    if (x0.size() != cev_x0.size()) throw DomainError("dirac_exact_marginal: dimension mismatch");
    const double sh = std::sinh(horizon);
    const double a = std::sinh(horizon - s) / sh;
    const double b = std::sinh(s) / sh;
    IsotropicGaussian g;
    g.mean.resize(x0.size());
    for (std::size_t k = 0; k < x0.size(); ++k) g.mean[k] = a * cev_x0[k] + b * x0[k];
    g.var = 2.0 * std::sinh(horizon - s) * std::sinh(s) / sh;
    return g;
}

IsotropicGaussian gaussian_product(std::span<const double> mu1, double var1,
                                   std::span<const double> mu2, double var2) {
    if (!(var1 > 0.0) || !(var2 > 0.0))
        throw DomainError("gaussian_product: variances must be positive");
    if (mu1.size() != mu2.size()) throw DomainError("gaussian_product: dimension mismatch");
    const double total = var1 + var2;
    IsotropicGaussian g;
    g.mean.resize(mu1.size());
    for (std::size_t k = 0; k < mu1.size(); ++k)
        g.mean[k] = (var2 * mu1[k] + var1 * mu2[k]) / total;
    g.var = var1 * var2 / total;
    return g;
}

IsotropicGaussian posterior_law(std::span<const double> x_m, std::span<const double> x0,
                                double t_prev, double t_m) {
    if (!(t_prev > 0.0) || !(t_m > t_prev))
        throw DomainError("posterior_step: require 0 < t_{m-1} < t_m");
    const double dt = t_m - t_prev;
    // rho(X_m | X_{m-1}) seen as a density in X_{m-1}: N(e^{dt} X_m, e^{2dt} - 1).
    Point mu1(x_m.size());
    const double grow = std::exp(dt);
    for (std::size_t k = 0; k < x_m.size(); ++k) mu1[k] = grow * x_m[k];
    const double var1 = std::expm1(2.0 * dt);
    // rho(X_{m-1} | x0): N(e^{-t_{m-1}} x0, 1 - e^{-2 t_{m-1}}).
    const auto c = coeffs(t_prev);
    Point mu2(x0.size());
    for (std::size_t k = 0; k < x0.size(); ++k) mu2[k] = c.alpha * x0[k];
    return gaussian_product(mu1, var1, mu2, c.beta_sq);
}

Point posterior_step(std::span<const double> x_m, std::span<const double> x0, double t_prev,
                     double t_m, std::span<const double> noise) {
    auto g = posterior_law(x_m, x0, t_prev, t_m);
    const double sigma = std::sqrt(g.var);
    for (std::size_t k = 0; k < g.mean.size(); ++k) g.mean[k] += sigma * noise[k];
    return g.mean;
}

std::string to_string(SamplerKind kind) {
    switch (kind) {
        case SamplerKind::EulerMaruyama: return "em";
        case SamplerKind::Exact: return "exact";
        case SamplerKind::Ode: return "ode";
    }
    return "unknown";
}

SamplerKind sampler_kind_from_string(const std::string& name) {
    if (name == "em") return SamplerKind::EulerMaruyama;
    if (name == "exact") return SamplerKind::Exact;
    if (name == "ode") return SamplerKind::Ode;
    throw ConfigError("unknown sampler '" + name + "' (expected em|exact|ode)");
}

// --- InitialLaw -------------------------------------------------------------

InitialLaw InitialLaw::standard_normal(std::size_t dim) {
    InitialLaw q;
    q.kind = Kind::StandardNormal;
    q.dim = dim;
    return q;
}

InitialLaw InitialLaw::dirac(Point point) {
    InitialLaw q;
    q.kind = Kind::Dirac;
    q.dim = point.size();
    q.point = std::move(point);
    return q;
}

InitialLaw InitialLaw::forward_marginal(const SampleSet& atoms, double horizon, double bandwidth) {
    InitialLaw q;
    q.kind = Kind::ForwardMarginal;
    q.dim = atoms.dim();
    q.atoms = std::make_shared<const SampleSet>(atoms);
    q.horizon = horizon;
    q.bandwidth = bandwidth;
    return q;
}

void InitialLaw::validate() const {
    if (dim == 0) throw ConfigError("q0: dimension must be positive");
    switch (kind) {
        case Kind::StandardNormal: return;
        case Kind::Dirac:
            if (point.size() != dim) throw ConfigError("q0: Dirac point has the wrong dimension");
            for (double v : point)
                if (!std::isfinite(v)) throw ConfigError("q0: Dirac point must be finite");
            return;
        case Kind::ForwardMarginal:
            if (!atoms) throw ConfigError("q0: forward marginal needs the rho_0 atoms");
            if (atoms->dim() != dim) throw ConfigError("q0: atoms have the wrong dimension");
            if (!(horizon >= 0.0) || !std::isfinite(horizon))
                throw ConfigError("q0: forward marginal horizon must be >= 0");
            if (!(bandwidth >= 0.0)) throw ConfigError("q0: bandwidth must be >= 0");
            return;
    }
}

std::string InitialLaw::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::StandardNormal: os << "normal"; break;
        case Kind::Dirac: {
            os << "dirac(";
            for (std::size_t k = 0; k < point.size(); ++k) os << (k ? "," : "") << point[k];
            os << ")";
            break;
        }
        case Kind::ForwardMarginal:
            os << "forward_marginal(T=" << horizon << ",v=" << bandwidth << ")";
            break;
    }
    return os.str();
}

void InitialLaw::draw(const RandomStream& rng, std::uint64_t index, std::span<double> out) const {
    auto sub = rng.substream(Purpose::InitialDraw, index, 0);
    switch (kind) {
        case Kind::StandardNormal: sub.fill_normal(out); return;
        case Kind::Dirac: std::copy(point.begin(), point.end(), out.begin()); return;
        case Kind::ForwardMarginal: {
            const std::size_t i = sub.categorical(atoms->cumulative_weights());
            const auto c = atoms->point(i);
            Point x0(dim), z(dim);
            const double sd = std::sqrt(bandwidth);
            for (std::size_t k = 0; k < dim; ++k) x0[k] = c[k] + sd * sub.normal();
            sub.fill_normal(z);
            forward_sample_into(x0, horizon, z, out);
            return;
        }
    }
}

// --- run_reverse ------------------------------------------------------------

std::size_t TrajectoryBatch::slot_of(std::size_t node) const {
    for (std::size_t r = 0; r < nodes.size(); ++r)
        if (nodes[r] == node) return r;
    throw DomainError("TrajectoryBatch: node " + std::to_string(node) + " was not recorded");
}

namespace {

struct StepTable {
    std::vector<StepParams> params;
    std::vector<ExactStepCoeffs> exact;
};

void simulate_range(const ScoreField& field, const StepTable& table, const InitialLaw& q0,
                    const RandomStream& rng, const ReverseOptions& opt, std::size_t steps,
                    const std::vector<std::size_t>& record_slot, TrajectoryBatch& batch,
                    std::size_t first, std::size_t last) {
    const std::size_t d = batch.dim;
    Point x(d), next(d), aux(d), noise(d), k1(d), k2(d);
    for (std::size_t j = first; j < last; ++j) {
        q0.draw(rng, j, x);
        auto record = [&](std::size_t node) {
            const std::size_t slot = record_slot[node];
            if (slot == static_cast<std::size_t>(-1)) return;
            auto dst = batch.state(j, slot);
            std::copy(x.begin(), x.end(), dst.begin());
        };
        record(0);
        for (std::size_t n = 0; n < steps; ++n) {
            const StepParams& p = table.params[n];
            switch (opt.sampler) {
                case SamplerKind::Exact: {
                    auto sub = rng.substream(Purpose::ReverseNoise, j, static_cast<std::uint32_t>(n));
                    sub.fill_normal(noise);
                    field.xbar0_into(x, p.t_from, aux);
                    const auto& c = table.exact[n];
                    const double sigma = std::sqrt(c.var);
                    for (std::size_t k = 0; k < d; ++k)
                        next[k] = c.x_coeff * x[k] + c.xbar_coeff * aux[k] + sigma * noise[k];
                    break;
                }
                case SamplerKind::EulerMaruyama: {
                    auto sub = rng.substream(Purpose::ReverseNoise, j, static_cast<std::uint32_t>(n));
                    sub.fill_normal(noise);
                    field.score_into(x, p.t_from, aux);
                    const double scale = opt.em_noise == EmNoiseScale::Sde
                                             ? std::sqrt(2.0 * p.delta)
                                             : std::sqrt(p.delta);
                    for (std::size_t k = 0; k < d; ++k)
                        next[k] = x[k] + p.delta * (x[k] + 2.0 * aux[k]) + scale * noise[k];
                    break;
                }
                case SamplerKind::Ode: {
                    field.score_into(x, p.t_from, k1);
                    for (std::size_t k = 0; k < d; ++k) {
                        k1[k] += x[k];
                        aux[k] = x[k] + p.delta * k1[k];
                    }
                    field.score_into(aux, p.t_to, k2);
                    for (std::size_t k = 0; k < d; ++k)
                        next[k] = x[k] + 0.5 * p.delta * (k1[k] + aux[k] + k2[k]);
                    break;
                }
            }
            std::swap(x, next);
            record(n + 1);
        }
        for (double v : x)
            if (!std::isfinite(v))
                throw NumericalError("run_reverse: non-finite state in trajectory " +
                                     std::to_string(j));
    }
}

}  // namespace

TrajectoryBatch run_reverse(const ScoreField& field, const Schedule& schedule, const InitialLaw& q0,
                            std::size_t n_traj, std::uint64_t seed, const ReverseOptions& options) {
    q0.validate();
    if (q0.dim != field.dim()) throw ConfigError("run_reverse: q0 and score field dimensions differ");
    if (options.workers == 0) throw ConfigError("run_reverse: workers must be >= 1");

    const std::size_t steps = std::min(options.max_steps.value_or(schedule.steps()), schedule.steps());

    TrajectoryBatch batch;
    batch.n_traj = n_traj;
    batch.dim = field.dim();
    batch.schedule = std::make_shared<const Schedule>(schedule);
    batch.sampler = options.sampler;
    batch.q0 = q0;
    batch.master_seed = seed;
    if (options.record_nodes.empty()) {
        for (std::size_t k = 0; k <= steps; ++k) batch.nodes.push_back(k);
    } else {
        for (std::size_t k : options.record_nodes) {
            if (k > steps) throw ConfigError("run_reverse: recorded node beyond the last step");
            if (!batch.nodes.empty() && k <= batch.nodes.back())
                throw ConfigError("run_reverse: recorded nodes must increase strictly");
            batch.nodes.push_back(k);
        }
    }
    std::vector<std::size_t> record_slot(steps + 1, static_cast<std::size_t>(-1));
    for (std::size_t r = 0; r < batch.nodes.size(); ++r) record_slot[batch.nodes[r]] = r;
    batch.states.assign(n_traj * batch.nodes.size() * batch.dim, 0.0);

    StepTable table;
    for (std::size_t n = 0; n < steps; ++n) {
        table.params.push_back(step_params(schedule, n));
        table.exact.push_back(exact_step_coeffs(table.params.back()));
    }

    const RandomStream rng(seed);
    parallel_for(n_traj, options.workers, [&](std::size_t first, std::size_t last) {
        simulate_range(field, table, q0, rng, options, steps, record_slot, batch, first, last);
    });
    return batch;
}

}  // namespace revdiff
