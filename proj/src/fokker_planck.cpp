#include "revdiff/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "revdiff/errors.hpp"
#include "revdiff/score_field.hpp"

namespace revdiff {

DensityGrid::DensityGrid(double half_width_, std::size_t intervals_)
    : half_width(half_width_), values(intervals_ + 1, 0.0) {
    if (!(half_width_ > 0.0)) throw DomainError("DensityGrid: L must be positive");
    if (intervals_ < 2) throw DomainError("DensityGrid: need at least 2 intervals");
}

DensityGrid DensityGrid::from_function(double half_width, std::size_t intervals,
                                       const std::function<double(double)>& f) {
    DensityGrid g(half_width, intervals);
    for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = f(g.x(i));
    g.normalize();
    return g;
}

DensityGrid DensityGrid::gaussian(double half_width, std::size_t intervals, double mean,
                                  double variance) {
    if (!(variance > 0.0)) throw DomainError("DensityGrid::gaussian: variance must be positive");
    return from_function(half_width, intervals, [&](double x) {
        return std::exp(-0.5 * (x - mean) * (x - mean) / variance);
    });
}

namespace {

double cell_width(const DensityGrid& g, std::size_t i) {
    return (i == 0 || i + 1 == g.size()) ? 0.5 * g.dx() : g.dx();
}

double trapezoid(const DensityGrid& g, const std::function<double(std::size_t)>& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) acc += cell_width(g, i) * f(i);
    return acc;
}

void require_same_nodes(const DensityGrid& a, const DensityGrid& b) {
    if (a.size() != b.size() || a.half_width != b.half_width)
        throw DomainError("density grids live on different nodes");
}

}  // namespace

double DensityGrid::mass() const {
    return trapezoid(*this, [&](std::size_t i) { return values[i]; });
}

double DensityGrid::mean() const {
    return trapezoid(*this, [&](std::size_t i) { return x(i) * values[i]; }) / mass();
}

double DensityGrid::variance() const {
    const double m = mean();
    return trapezoid(*this, [&](std::size_t i) { return (x(i) - m) * (x(i) - m) * values[i]; }) /
           mass();
}

double DensityGrid::mass_below_zero() const {
    double acc = 0.0;
    const double h = dx();
    for (std::size_t i = 0; i + 1 < size(); ++i) {
        const double a = x(i), b = x(i + 1);
        if (b <= 0.0) {
            acc += 0.5 * h * (values[i] + values[i + 1]);
        } else if (a < 0.0) {
            // partial interval, linear interpolant
            const double frac = -a / h;
            const double v0 = values[i];
            const double vz = v0 + frac * (values[i + 1] - v0);
            acc += 0.5 * (-a) * (v0 + vz);
        }
    }
    return acc;
}

void DensityGrid::normalize() {
    const double m = mass();
    if (!(m > 0.0) || !std::isfinite(m)) throw NumericalError("DensityGrid: cannot normalize mass " + std::to_string(m));
    for (double& v : values) v /= m;
}

double l1_distance(const DensityGrid& a, const DensityGrid& b) {
    require_same_nodes(a, b);
    return trapezoid(a, [&](std::size_t i) { return std::abs(a.values[i] - b.values[i]); });
}

double sup_distance(const DensityGrid& a, const DensityGrid& b) {
    require_same_nodes(a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

double high_frequency_energy(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    // cos(pi k (2j+1) / (2n)) depends only on k(2j+1) mod 4n.
    const std::size_t period = 4 * n;
    std::vector<double> table(period);
    for (std::size_t m = 0; m < period; ++m)
        table[m] = std::cos(std::numbers::pi * static_cast<double>(m) / (2.0 * static_cast<double>(n)));
    const std::size_t first = (2 * n + 2) / 3;
    double energy = 0.0;
    for (std::size_t k = first; k < n; ++k) {
        double c = 0.0;
        for (std::size_t j = 0; j < n; ++j) c += values[j] * table[(k * (2 * j + 1)) % period];
        energy += c * c;
    }
    return energy;
}

ScoreTable score_table(const ScoreField& field) {
    if (field.dim() != 1) throw DomainError("score_table: PDE solvers need a 1D score field");
    return [&field](double x, double t) {
        double in[1] = {x};
        double out[1];
        field.score_into(in, t, out);
        return out[0];
    };
}

double PdeRunReport::max_mass_drift_rate() const {
    double worst = 0.0;
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double h = times[k] - times[k - 1];
        if (h > 0.0) worst = std::max(worst, mass_drift[k] / h);
    }
    return worst;
}

const DensityGrid& PdeSolution::at(double time) const {
    for (std::size_t k = 0; k < times.size(); ++k)
        if (std::abs(times[k] - time) <= 1e-9 * std::max(1.0, std::abs(time))) return grids[k];
    throw DomainError("PdeSolution: no grid saved at time " + std::to_string(time));
}

namespace {

enum class FluxRule { ChangCooper, Central, Upwind };

/// Tridiagonal operator (L rho)_i = lower_i rho_{i-1} + diag_i rho_i + upper_i rho_{i+1}
/// of the conservative form d_x(A rho + D d_x rho), divided by the cell widths.
struct Tridiagonal {
    std::vector<double> lower, diag, upper;
};

double chang_cooper_delta(double w) {
    if (std::abs(w) < 1e-5) return 0.5 - w / 12.0;
    if (w > 700.0) return 1.0 / w;
    return 1.0 / w - 1.0 / std::expm1(w);
}

/// `drift[i]` is A at the interface between nodes i and i+1.
void build_operator(const DensityGrid& g, std::span<const double> drift, double diffusion,
                    FluxRule rule, Tridiagonal& op) {
    const std::size_t n = g.size();
    const double dx = g.dx();
    op.lower.assign(n, 0.0);
    op.diag.assign(n, 0.0);
    op.upper.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double a_face = drift[i];
        double delta = 0.5;
        switch (rule) {
            case FluxRule::ChangCooper: delta = chang_cooper_delta(a_face * dx / diffusion); break;
            case FluxRule::Central: delta = 0.5; break;
            case FluxRule::Upwind: delta = a_face > 0.0 ? 0.0 : 1.0; break;
        }
        // Flux G = a rho_i + b rho_{i+1}.
        const double a = a_face * delta - diffusion / dx;
        const double b = a_face * (1.0 - delta) + diffusion / dx;
        const double ci = cell_width(g, i);
        const double cj = cell_width(g, i + 1);
        op.diag[i] += a / ci;
        op.upper[i] += b / ci;
        op.lower[i + 1] -= a / cj;
        op.diag[i + 1] -= b / cj;
    }
}

void apply_explicit(const Tridiagonal& op, double h, std::span<const double> in, std::span<double> out) {
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = in[i] + h * op.diag[i] * in[i];
        if (i > 0) v += h * op.lower[i] * in[i - 1];
        if (i + 1 < n) v += h * op.upper[i] * in[i + 1];
        out[i] = v;
    }
}

/// Solves (I - h L) x = rhs with the Thomas algorithm.
void solve_implicit(const Tridiagonal& op, double h, std::span<const double> rhs, std::span<double> x) {
    const std::size_t n = rhs.size();
    std::vector<double> c(n), d(n);
    double denom = 1.0 - h * op.diag[0];
    c[0] = -h * op.upper[0] / denom;
    d[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        const double lo = -h * op.lower[i];
        denom = (1.0 - h * op.diag[i]) - lo * c[i - 1];
        c[i] = (i + 1 < n) ? -h * op.upper[i] / denom : 0.0;
        d[i] = (rhs[i] - lo * d[i - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
}

class Recorder {
public:
    Recorder(PdeRunReport& report, bool spectrum) : report_(report), spectrum_(spectrum) {}

    void record(const DensityGrid& g, double time, double previous_mass) {
        double lo = g.values[0], hi = g.values[0];
        for (double v : g.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        report_.times.push_back(time);
        report_.mass_drift.push_back(std::isnan(previous_mass) ? 0.0 : std::abs(g.mass() - previous_mass));
        report_.min_value.push_back(lo);
        report_.max_value.push_back(hi);
        report_.l2_norm.push_back(std::sqrt(trapezoid(g, [&](std::size_t i) { return g.values[i] * g.values[i]; })));
        if (spectrum_) report_.hf_energy.push_back(high_frequency_energy(g.values));
    }

private:
    PdeRunReport& report_;
    bool spectrum_;
};

void clip_negatives(DensityGrid& g, PdeRunReport& report) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.values[i] < 0.0) {
            report.clipped_mass += -g.values[i] * cell_width(g, i);
            g.values[i] = 0.0;
        }
    }
}

/// Sorted stop times in (0, end], always ending at `end`.
std::vector<double> stop_times(const std::vector<double>& extra, double end) {
    std::vector<double> out;
    for (double t : extra) {
        if (!(t > 0.0) || t > end) throw ConfigError("PDE save time outside (0, end]");
        out.push_back(t);
    }
    out.push_back(end);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              out.end());
    return out;
}

void check_grid(const DensityGrid& g, const char* who) {
    if (g.size() < 3) throw ConfigError(std::string(who) + ": grid too small");
    for (double v : g.values)
        if (!std::isfinite(v) || v < 0.0)
            throw ConfigError(std::string(who) + ": initial density must be finite and nonnegative");
}

using DriftAt = std::function<double(double x, double time)>;

/// Crank-Nicolson (or explicit Euler) integration of d_tau rho = d_x(A rho + D d_x rho).
PdeSolution integrate_conservative(const DensityGrid& start, const DriftAt& drift, double diffusion,
                                   double end, const PdeOptions& options, bool explicit_euler) {
    PdeSolution sol;
    DensityGrid g = start;
    const double dt = options.dt > 0.0 ? options.dt : g.dx() * g.dx();
    Recorder rec(sol.report, options.track_spectrum);
    rec.record(g, 0.0, std::nan(""));
    sol.times.push_back(0.0);
    sol.grids.push_back(g);

    const std::size_t n = g.size();
    std::vector<double> faces(n - 1), rhs(n);
    auto fill_faces = [&](double time) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double xf = g.x(i) + 0.5 * g.dx();
            const double a = drift(xf, time);
            if (!std::isfinite(a)) {
                std::ostringstream os;
                os << "non-finite drift at x = " << xf << ", time = " << time;
                throw NumericalError(os.str());
            }
            faces[i] = a;
        }
    };
    Tridiagonal op_now, op_next;
    double tau = 0.0;
    fill_faces(tau);
    build_operator(g, faces, diffusion, FluxRule::ChangCooper, op_now);
    for (double stop : stop_times(options.save_times, end)) {
        const std::size_t sub = static_cast<std::size_t>(std::ceil((stop - tau) / dt - 1e-9));
        const double h = (stop - tau) / static_cast<double>(std::max<std::size_t>(sub, 1));
        for (std::size_t k = 0; k < sub; ++k) {
            const double mass_before = g.mass();
            const double next = (k + 1 == sub) ? stop : tau + h;
            fill_faces(next);
            build_operator(g, faces, diffusion, FluxRule::ChangCooper, op_next);
            if (explicit_euler) {
                apply_explicit(op_now, h, g.values, rhs);
                g.values = rhs;
            } else {
                apply_explicit(op_now, 0.5 * h, g.values, rhs);
                solve_implicit(op_next, 0.5 * h, rhs, g.values);
            }
            clip_negatives(g, sol.report);
            std::swap(op_now, op_next);
            tau = next;
            rec.record(g, tau, mass_before);
        }
        sol.times.push_back(stop);
        sol.grids.push_back(g);
    }
    return sol;
}

ScoreTable checked(const ScoreTable& score) {
    return [score](double x, double t) {
        const double v = score(x, t);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite score at x = " << x << ", t = " << t;
            throw NumericalError(os.str());
        }
        return v;
    };
}

void check_reverse_window(double horizon, double t_min) {
    if (!(t_min > 0.0) || !(horizon > t_min)) throw ConfigError("reverse PDE: need T* > t_min > 0");
}

}  // namespace

PdeSolution solve_forward(const DensityGrid& rho0, double horizon, const PdeOptions& options) {
    check_grid(rho0, "solve_forward");
    if (!(horizon > 0.0)) throw ConfigError("solve_forward: horizon must be positive");
    if (options.explicit_euler) {
        const double dt = options.dt > 0.0 ? options.dt : 0.5 * rho0.dx() * rho0.dx();
        if (dt > 0.5 * rho0.dx() * rho0.dx())
            throw ConfigError("solve_forward: explicit mode needs dt <= dx^2 / 2");
        PdeOptions opt = options;
        opt.dt = dt;
        return integrate_conservative(rho0, [](double x, double) { return x; }, 1.0, horizon, opt, true);
    }
    return integrate_conservative(rho0, [](double x, double) { return x; }, 1.0, horizon, options, false);
}

PdeSolution solve_reverse_stable(const DensityGrid& q0, const ScoreTable& score, double horizon,
                                 double t_min, const PdeOptions& options) {
    check_grid(q0, "solve_reverse_stable");
    check_reverse_window(horizon, t_min);
    const ScoreTable sc = checked(score);
    const DriftAt drift = [&](double x, double s) { return -x - 2.0 * sc(x, horizon - s); };
    return integrate_conservative(q0, drift, 1.0, horizon - t_min, options, false);
}

PdeRunReport solve_reverse_unstable(const DensityGrid& q0, double t_run, const PdeOptions& options) {
    check_grid(q0, "solve_reverse_unstable");
    if (!(t_run > 0.0)) throw ConfigError("solve_reverse_unstable: run length must be positive");
    DensityGrid g = q0;
    const double dt = options.dt > 0.0 ? options.dt : 0.5 * g.dx() * g.dx();
    const std::size_t n = g.size();
    std::vector<double> faces(n - 1), next(n);
    for (std::size_t i = 0; i + 1 < n; ++i) faces[i] = -(g.x(i) + 0.5 * g.dx());
    Tridiagonal op;
    build_operator(g, faces, -1.0, FluxRule::Central, op);

    PdeRunReport report;
    Recorder rec(report, options.track_spectrum);
    rec.record(g, 0.0, std::nan(""));
    const std::size_t steps = static_cast<std::size_t>(std::ceil(t_run / dt - 1e-9));
    const double h = t_run / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double mass_before = g.mass();
        apply_explicit(op, h, g.values, next);
        bool finite = true;
        for (double v : next)
            if (!std::isfinite(v) || std::abs(v) > 1e300) finite = false;
        if (!finite) {
            report.blew_up = true;
            report.blowup_step = k + 1;
            break;
        }
        g.values = next;
        rec.record(g, static_cast<double>(k + 1) * h, mass_before);
    }
    return report;
}

PdeSolution solve_reverse_transport(const DensityGrid& q0, const ScoreTable& score, double horizon,
                                    double t_min, const PdeOptions& options) {
    check_grid(q0, "solve_reverse_transport");
    check_reverse_window(horizon, t_min);
    if (!(options.cfl > 0.0) || options.cfl > 1.0) throw ConfigError("transport: cfl must be in (0, 1]");
    const ScoreTable sc = checked(score);
    const double end = horizon - t_min;

    PdeSolution sol;
    DensityGrid g = q0;
    const double dt_max = options.dt > 0.0 ? options.dt : g.dx();
    Recorder rec(sol.report, options.track_spectrum);
    rec.record(g, 0.0, std::nan(""));
    sol.times.push_back(0.0);
    sol.grids.push_back(g);

    const std::size_t n = g.size();
    std::vector<double> faces(n - 1), next(n);
    Tridiagonal op;
    double s = 0.0;
    for (double stop : stop_times(options.save_times, end)) {
        while (s < stop - 1e-14) {
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const double xf = g.x(i) + 0.5 * g.dx();
                faces[i] = -xf - sc(xf, horizon - s);
            }
            build_operator(g, faces, 0.0, FluxRule::Upwind, op);
            double rate = 0.0;
            for (double d : op.diag) rate = std::max(rate, -d);
            double h = std::min(dt_max, rate > 0.0 ? options.cfl / rate : dt_max);
            if (s + h > stop - 1e-14) h = stop - s;
            const double mass_before = g.mass();
            apply_explicit(op, h, g.values, next);
            g.values = next;
            clip_negatives(g, sol.report);
            s = (h == stop - s) ? stop : s + h;
            rec.record(g, s, mass_before);
        }
        sol.times.push_back(stop);
        sol.grids.push_back(g);
    }
    return sol;
}

double stabilization_identity_error(const DensityGrid& phi) {
    const std::size_t n = phi.size();
    const double dx = phi.dx();
    for (double v : phi.values)
        if (!(v > 0.0)) throw DomainError("stabilization identity: phi must be positive");
    std::vector<double> flux(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double mid = 0.5 * (phi.values[i] + phi.values[i + 1]);
        flux[i] = mid * (std::log(phi.values[i + 1]) - std::log(phi.values[i])) / dx;
    }
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double lap = (phi.values[i + 1] - 2.0 * phi.values[i] + phi.values[i - 1]) / (dx * dx);
        const double rhs = 2.0 * (flux[i] - flux[i - 1]) / dx - lap;
        worst = std::max(worst, std::abs(rhs - lap));
        scale = std::max(scale, std::abs(lap));
    }
    return worst / scale;
}

}  // namespace revdiff
