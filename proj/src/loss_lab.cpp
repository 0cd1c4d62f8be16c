#include "revdiff/loss_lab.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "revdiff/analysis.hpp"
#include "revdiff/errors.hpp"
#include "revdiff/numerics.hpp"
#include "revdiff/random_stream.hpp"

namespace revdiff {

double loss_weight(double t) {
    if (!(t > 0.0)) throw DomainError("loss_weight: c(t) is singular at t = 0");
    return std::exp(-t) / -std::expm1(-2.0 * t);
}

TimeSampling TimeSampling::uniform(double t_min, double horizon) {
    TimeSampling s;
    s.kind = Kind::Uniform;
    s.t_min = t_min;
    s.horizon = horizon;
    s.validate();
    return s;
}

TimeSampling TimeSampling::discrete(std::vector<double> grid) {
    TimeSampling s;
    s.kind = Kind::Discrete;
    s.grid = std::move(grid);
    s.validate();
    if (!s.grid.empty()) {
        s.t_min = *std::min_element(s.grid.begin(), s.grid.end());
        s.horizon = *std::max_element(s.grid.begin(), s.grid.end());
    }
    return s;
}

void TimeSampling::validate() const {
    if (kind == Kind::Uniform) {
        if (!(t_min > 0.0) || !(horizon > t_min) || !std::isfinite(horizon))
            throw DomainError("time sampling: need T* > t_min > 0");
        return;
    }
    if (grid.empty()) throw DomainError("time sampling: empty grid");
    for (double t : grid)
        if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("time sampling: grid times must be > 0");
}

std::string TimeSampling::describe() const {
    std::ostringstream os;
    if (kind == Kind::Uniform)
        os << "uniform[" << t_min << "," << horizon << "]";
    else
        os << "grid(" << grid.size() << " points)";
    return os.str();
}

namespace {

double draw_time(const TimeSampling& s, Substream& sub) {
    const double u = sub.uniform();
    if (s.kind == TimeSampling::Kind::Uniform) return s.t_min + (s.horizon - s.t_min) * u;
    const auto k = std::min(s.grid.size() - 1, static_cast<std::size_t>(u * static_cast<double>(s.grid.size())));
    return s.grid[k];
}

void check_config(const LossConfig& cfg) {
    cfg.sampling.validate();
    if (cfg.n_mc == 0) throw DomainError("loss: n_mc must be >= 1");
}

/// Evaluates per-draw values in parallel and reduces them in a fixed order.
LossEstimate estimate(const LossConfig& cfg, const std::string& weight,
                      const std::function<double(std::size_t)>& value_of) {
    LossEstimate est;
    est.n_mc = cfg.n_mc;
    est.sampling = cfg.sampling.describe();
    est.weight = weight;
    est.per_sample.assign(cfg.n_mc, 0.0);
    parallel_for(cfg.n_mc, cfg.workers, [&](std::size_t first, std::size_t last) {
        for (std::size_t j = first; j < last; ++j) est.per_sample[j] = value_of(j);
    });
    const auto m = mean_and_se(est.per_sample);
    if (!std::isfinite(m.mean)) throw NumericalError("loss estimate is not finite");
    est.value = m.mean;
    est.std_error = m.std_error;
    return est;
}

}  // namespace

LossDraw loss_draw(const SampleSet& samples, const TimeSampling& sampling, std::uint64_t seed,
                   std::size_t j) {
    const RandomStream rng(seed);
    LossDraw d;
    auto st = rng.substream(Purpose::LossTime, j);
    d.t = draw_time(sampling, st);
    auto sa = rng.substream(Purpose::LossAtom, j);
    d.atom = sa.categorical(samples.cumulative_weights());
    const auto atom = samples.point(d.atom);
    d.x0.assign(atom.begin(), atom.end());
    d.eps.resize(samples.dim());
    auto sn = rng.substream(Purpose::LossNoise, j);
    sn.fill_normal(d.eps);
    d.xt = forward_sample(d.x0, d.t, d.eps);
    return d;
}

LossEstimate score_loss(const ScoreField& s_theta, const KernelScore& ref, const LossConfig& cfg) {
    check_config(cfg);
    if (s_theta.dim() != ref.dim()) throw DomainError("score_loss: dimension mismatch");
    return estimate(cfg, "1", [&](std::size_t j) {
        const auto d = loss_draw(ref.samples(), cfg.sampling, cfg.seed, j);
        const Point a = s_theta.score(d.xt, d.t);
        const Point b = ref.score(d.xt, d.t);
        return squared_distance(a, b);
    });
}

LossEstimate total_loss(const PredictorFn& xbar_theta, const SampleSet& samples,
                        const LossConfig& cfg) {
    check_config(cfg);
    return estimate(cfg, "c(t)^2", [&](std::size_t j) {
        const auto d = loss_draw(samples, cfg.sampling, cfg.seed, j);
        Point pred(samples.dim());
        xbar_theta(d.xt, d.t, pred);
        const double c = loss_weight(d.t);
        return c * c * squared_distance(pred, d.x0);
    });
}

LossEstimate eps_total_loss(const PredictorFn& eps_theta, const SampleSet& samples,
                            const LossConfig& cfg) {
    check_config(cfg);
    return estimate(cfg, "1/(1-exp(-2t))", [&](std::size_t j) {
        const auto d = loss_draw(samples, cfg.sampling, cfg.seed, j);
        Point pred(samples.dim());
        eps_theta(d.xt, d.t, pred);
        return squared_distance(pred, d.eps) / -std::expm1(-2.0 * d.t);
    });
}

LossEstimate riemann_eps_loss(const PredictorFn& eps_theta, const SampleSet& samples,
                              const std::vector<double>& grid, std::size_t n_mc,
                              std::uint64_t seed, std::size_t workers) {
    if (grid.empty()) throw DomainError("riemann_eps_loss: empty grid");
    LossConfig cfg;
    cfg.sampling = TimeSampling::discrete(grid);
    cfg.n_mc = n_mc;
    cfg.seed = seed;
    cfg.workers = workers;
    check_config(cfg);
    return estimate(cfg, "1", [&](std::size_t j) {
        const auto d = loss_draw(samples, cfg.sampling, cfg.seed, j);
        Point pred(samples.dim());
        eps_theta(d.xt, d.t, pred);
        return squared_distance(pred, d.eps);
    });
}

LossEstimate variance_floor(const SampleSet& samples, const LossConfig& cfg) {
    check_config(cfg);
    const KernelScore kernel(samples);
    return estimate(cfg, "c(t)^2", [&](std::size_t j) {
        const auto d = loss_draw(samples, cfg.sampling, cfg.seed, j);
        const Point xbar = kernel.xbar0(d.xt, d.t);
        const double c = loss_weight(d.t);
        return c * c * squared_distance(d.x0, xbar);
    });
}

LossEstimate variance_floor_rao_blackwell(const SampleSet& samples, const LossConfig& cfg) {
    check_config(cfg);
    const KernelScore kernel(samples);
    return estimate(cfg, "c(t)^2", [&](std::size_t j) {
        const auto d = loss_draw(samples, cfg.sampling, cfg.seed, j);
        const auto lambda = kernel.weights(d.xt, d.t);
        const Point xbar = kernel.xbar0(d.xt, d.t);
        double acc = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (lambda[i] > 0.0) acc += lambda[i] * squared_distance(samples.point(i), xbar);
        const double c = loss_weight(d.t);
        return c * c * acc;
    });
}

PredictorFn kernel_xbar_predictor(const SampleSet& samples) {
    auto kernel = std::make_shared<const KernelScore>(samples);
    return [kernel](std::span<const double> x, double t, std::span<double> out) {
        kernel->xbar0_into(x, t, out);
    };
}

PredictorFn zero_predictor() {
    return [](std::span<const double>, double, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
}

PredictorFn shifted_predictor(PredictorFn base, Point shift) {
    return [base = std::move(base), shift = std::move(shift)](std::span<const double> x, double t,
                                                              std::span<double> out) {
        if (shift.size() != out.size()) throw DomainError("shifted_predictor: dimension mismatch");
        base(x, t, out);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += shift[k];
    };
}

PredictorFn nearest_atom_predictor(const SampleSet& samples) {
    auto atoms = std::make_shared<const SampleSet>(samples);
    return [atoms](std::span<const double> x, double t, std::span<double> out) {
        Point scaled(x.begin(), x.end());
        const double et = std::exp(t);
        for (double& v : scaled) v *= et;
        const auto p = atoms->point(voronoi_assign(scaled, *atoms));
        std::copy(p.begin(), p.end(), out.begin());
    };
}

PredictorFn random_feature_predictor(PredictorFn base, std::size_t dim, std::size_t features,
                                     double amplitude, std::uint64_t seed) {
    if (dim == 0 || features == 0) throw DomainError("random_feature_predictor: empty feature map");
    struct Map {
        std::vector<double> w, b, phase, a;  // w, a are features x dim
    };
    auto map = std::make_shared<Map>();
    const RandomStream rng(seed);
    auto sub = rng.substream(Purpose::Predictor, 0);
    const double a_scale = 1.0 / std::sqrt(static_cast<double>(features));
    for (std::size_t f = 0; f < features; ++f) {
        for (std::size_t k = 0; k < dim; ++k) map->w.push_back(sub.normal());
        map->b.push_back(sub.normal());
        map->phase.push_back(2.0 * std::numbers::pi * sub.uniform());
        for (std::size_t k = 0; k < dim; ++k) map->a.push_back(a_scale * sub.normal());
    }
    return [base = std::move(base), map, dim, features, amplitude](
               std::span<const double> x, double t, std::span<double> out) {
        if (x.size() != dim) throw DomainError("random_feature_predictor: dimension mismatch");
        base(x, t, out);
        for (std::size_t f = 0; f < features; ++f) {
            double arg = map->b[f] * t + map->phase[f];
            for (std::size_t k = 0; k < dim; ++k) arg += map->w[f * dim + k] * x[k];
            const double c = amplitude * std::cos(arg);
            for (std::size_t k = 0; k < dim; ++k) out[k] += c * map->a[f * dim + k];
        }
    };
}

PredictorFn time_gated_predictor(PredictorFn below, PredictorFn above, double t_cut) {
    return [below = std::move(below), above = std::move(above), t_cut](
               std::span<const double> x, double t, std::span<double> out) {
        if (t < t_cut)
            below(x, t, out);
        else
            above(x, t, out);
    };
}

PredictorFn eps_predictor_from_xbar(PredictorFn xbar) {
    return [xbar = std::move(xbar)](std::span<const double> x, double t, std::span<double> out) {
        Point pred(out.size());
        xbar(x, t, pred);
        eps_from_xbar(x, t, pred, out);
    };
}

PredictorFn xbar_predictor_from_eps(PredictorFn eps) {
    return [eps = std::move(eps)](std::span<const double> x, double t, std::span<double> out) {
        Point pred(out.size());
        eps(x, t, pred);
        xbar_from_eps(x, t, pred, out);
    };
}

}  // namespace revdiff
