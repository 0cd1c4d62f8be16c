#include "revdiff/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "revdiff/errors.hpp"
#include "revdiff/numerics.hpp"
#include "revdiff/random_stream.hpp"
#include "revdiff/score_field.hpp"

namespace revdiff {

std::size_t voronoi_assign(std::span<const double> x, const SampleSet& samples) {
    if (samples.size() == 0) throw DomainError("voronoi_assign: empty sample set");
    if (x.size() != samples.dim()) throw DomainError("voronoi_assign: dimension mismatch");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double d = squared_distance(x, samples.point(i));
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<double> terminal_weights(std::span<const double> x_start, const SampleSet& samples,
                                     double horizon) {
    if (!(horizon > 0.0)) throw DomainError("terminal_weights: T* must be positive");
    if (x_start.size() != samples.dim()) throw DomainError("terminal_weights: dimension mismatch");
    const auto c = coeffs(horizon);
    const std::size_t d = samples.dim();
    std::vector<double> logits(samples.size());
    Point shrunk(d);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto xi = samples.point(i);
        for (std::size_t k = 0; k < d; ++k) shrunk[k] = c.alpha * xi[k];
        const double w = samples.weight(i);
        logits[i] = w > 0.0 ? std::log(w) - squared_distance(shrunk, x_start) / (2.0 * c.beta_sq)
                            : -std::numeric_limits<double>::infinity();
    }
    softmax_inplace(logits);
    return logits;
}

WeightsEstimate expected_terminal_weights(const SampleSet& samples, const InitialLaw& q0,
                                          double horizon, std::size_t n_mc, std::uint64_t seed) {
    if (n_mc == 0) throw DomainError("expected_terminal_weights: n_mc must be >= 1");
    q0.validate();
    if (q0.dim != samples.dim()) throw ConfigError("expected_terminal_weights: q0 dimension mismatch");
    const std::size_t n = samples.size();
    const RandomStream rng(seed);
    // component-major so each column is contiguous for the reduction
    std::vector<double> per_sample(n * n_mc);
    Point x(samples.dim());
    for (std::size_t j = 0; j < n_mc; ++j) {
        q0.draw(rng, j, x);
        const auto w = terminal_weights(x, samples, horizon);
        for (std::size_t i = 0; i < n; ++i) per_sample[i * n_mc + j] = w[i];
    }
    WeightsEstimate est;
    est.n_mc = n_mc;
    for (std::size_t i = 0; i < n; ++i) {
        const auto m = mean_and_se(std::span<const double>(per_sample).subspan(i * n_mc, n_mc));
        est.mean.push_back(m.mean);
        est.std_error.push_back(m.std_error);
    }
    return est;
}

double default_memorization_eps(const SampleSet& samples) {
    return 0.1 * samples.scale() / std::sqrt(static_cast<double>(samples.dim()));
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw DomainError("total_variation: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

MemorizationReport memorization_report(const TrajectoryBatch& batch, const SampleSet& samples,
                                       double eps) {
    const auto ref = expected_terminal_weights(samples, batch.q0, batch.schedule->horizon(),
                                               std::max<std::size_t>(batch.n_traj, 1),
                                               splitmix64(batch.master_seed ^ 0x5eedf00dULL));
    return memorization_report(batch, samples, eps, ref.mean);
}

MemorizationReport memorization_report(const TrajectoryBatch& batch, const SampleSet& samples,
                                       double eps, std::vector<double> omega_ref) {
    if (!(eps > 0.0)) throw DomainError("memorization_report: eps must be positive");
    if (batch.dim != samples.dim()) throw DomainError("memorization_report: dimension mismatch");
    if (omega_ref.size() != samples.size())
        throw DomainError("memorization_report: reference weights have the wrong length");
    if (batch.n_traj == 0) throw DomainError("memorization_report: empty batch");
    MemorizationReport r;
    r.n_traj = batch.n_traj;
    r.eps = eps;
    r.hits.assign(samples.size(), 0);
    std::vector<double> counts(samples.size(), 0.0);
    std::vector<double> dist(batch.n_traj);
    std::size_t within = 0;
    for (std::size_t j = 0; j < batch.n_traj; ++j) {
        const auto x = batch.terminal(j);
        for (double v : x)
            if (!std::isfinite(v)) throw NumericalError("memorization_report: non-finite terminal state");
        const std::size_t i = voronoi_assign(x, samples);
        dist[j] = std::sqrt(squared_distance(x, samples.point(i)));
        counts[i] += 1.0;
        if (dist[j] <= eps) {
            ++r.hits[i];
            ++within;
        }
    }
    std::sort(dist.begin(), dist.end());
    r.median_dist = quantile_sorted(dist, 0.5);
    r.p90_dist = quantile_sorted(dist, 0.9);
    r.frac_within_eps = static_cast<double>(within) / static_cast<double>(batch.n_traj);
    for (double& c : counts) c /= static_cast<double>(batch.n_traj);
    r.empirical_weights = std::move(counts);
    r.omega_ref = std::move(omega_ref);
    r.tv_gap = total_variation(r.empirical_weights, r.omega_ref);
    return r;
}

double wasserstein1d(std::span<const double> a, std::span<const double> b, int p) {
    if (a.empty() || b.empty()) throw DomainError("wasserstein1d: empty input");
    if (p != 1 && p != 2) throw DomainError("wasserstein1d: order must be 1 or 2");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
    // Integrate |F_a^{-1}(u) - F_b^{-1}(u)|^p over the merged quantile breakpoints.
    std::size_t i = 0, j = 0;
    double u = 0.0, acc = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double next_a = static_cast<double>(i + 1) / na;
        const double next_b = static_cast<double>(j + 1) / nb;
        const double next = std::min(next_a, next_b);
        const double gap = std::abs(sa[i] - sb[j]);
        acc += (next - u) * (p == 1 ? gap : gap * gap);
        u = next;
        if (next_a <= next) ++i;
        if (next_b <= next) ++j;
    }
    return p == 1 ? acc : std::sqrt(acc);
}

double sliced_wasserstein2(std::span<const double> a, std::span<const double> b, std::size_t dim,
                           std::uint64_t seed, std::size_t projections) {
    if (dim == 0 || a.size() % dim != 0 || b.size() % dim != 0)
        throw DomainError("sliced_wasserstein2: coordinates do not match the dimension");
    if (projections == 0) throw DomainError("sliced_wasserstein2: need at least one projection");
    const std::size_t na = a.size() / dim, nb = b.size() / dim;
    const RandomStream rng(seed);
    std::vector<double> pa(na), pb(nb), sq(projections);
    Point dir(dim);
    for (std::size_t k = 0; k < projections; ++k) {
        auto sub = rng.substream(Purpose::Projection, k);
        double norm = 0.0;
        do {
            sub.fill_normal(dir);
            norm = std::sqrt(squared_distance(dir, Point(dim, 0.0)));
        } while (norm == 0.0);
        for (double& v : dir) v /= norm;
        for (std::size_t r = 0; r < na; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < dim; ++c) acc += a[r * dim + c] * dir[c];
            pa[r] = acc;
        }
        for (std::size_t r = 0; r < nb; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < dim; ++c) acc += b[r * dim + c] * dir[c];
            pb[r] = acc;
        }
        const double w = wasserstein1d(pa, pb, 2);
        sq[k] = w * w;
    }
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(projections));
}

DistanceCurve w2_to_dirac(const TrajectoryBatch& batch, std::span<const double> x0) {
    if (x0.size() != batch.dim) throw DomainError("w2_to_dirac: dimension mismatch");
    if (batch.n_traj == 0) throw DomainError("w2_to_dirac: empty batch");
    DistanceCurve curve;
    std::vector<double> d2(batch.n_traj);
    for (std::size_t r = 0; r < batch.n_recorded(); ++r) {
        for (std::size_t j = 0; j < batch.n_traj; ++j) d2[j] = squared_distance(batch.state(j, r), x0);
        const auto m = mean_and_se(d2);
        const double w = std::sqrt(m.mean);
        curve.s.push_back(batch.s(r));
        curve.value.push_back(w);
        // delta method for the square root
        curve.std_error.push_back(w > 0.0 ? m.std_error / (2.0 * w) : 0.0);
    }
    return curve;
}

double TimeReversalReport::max_forward_oracle() const {
    return l1_forward_oracle.empty() ? 0.0 : *std::max_element(l1_forward_oracle.begin(), l1_forward_oracle.end());
}

double TimeReversalReport::max_reverse_oracle() const {
    return l1_reverse_oracle.empty() ? 0.0 : *std::max_element(l1_reverse_oracle.begin(), l1_reverse_oracle.end());
}

namespace {

struct Binning {
    double lo, width;
    std::size_t bins;

    std::size_t clamped(double v) const {
        const double r = std::floor((v - lo) / width);
        if (r < 0.0) return 0;
        if (r >= static_cast<double>(bins)) return bins - 1;
        return static_cast<std::size_t>(r);
    }
    /// -1 when outside the window
    long inside(double v) const {
        const double r = std::floor((v - lo) / width);
        if (r < 0.0 || r >= static_cast<double>(bins)) return -1;
        return static_cast<long>(r);
    }
};

/// Conditional histogram of X_{t1} given X_{t2} in each y-bin for a Gaussian mixture rho0.
std::vector<double> oracle_histogram(const GaussianMixtureScore& rho0, const TimeReversalOptions& o,
                                     const Binning& xb, const Binning& yb) {
    const auto& centers = rho0.centers();
    const double v = rho0.bandwidth();
    const auto c1 = coeffs(o.t1);
    const auto c21 = coeffs(o.t2 - o.t1);
    std::vector<double> hist(yb.bins * xb.bins, 0.0);
    constexpr int kPanels = 200;  // composite Simpson over each y-bin
    for (std::size_t yi = 0; yi < yb.bins; ++yi) {
        const double ya = yb.lo + static_cast<double>(yi) * yb.width;
        std::vector<double> row(xb.bins, 0.0);
        for (std::size_t i = 0; i < centers.size(); ++i) {
            const double m0 = centers.point(i)[0];
            const double mu1 = c1.alpha * m0;
            const double var1 = c1.alpha * c1.alpha * v + c1.beta_sq;
            const double mu2 = c21.alpha * mu1;
            const double var2 = c21.alpha * c21.alpha * var1 + c21.beta_sq;
            const double cov = c21.alpha * var1;
            const double cond_var = std::max(var1 - cov * cov / var2, 0.0);
            const double cond_sd = std::sqrt(cond_var);
            for (int q = 0; q <= kPanels; ++q) {
                const double y = ya + yb.width * q / kPanels;
                const double simpson = (q == 0 || q == kPanels) ? 1.0 : (q % 2 ? 4.0 : 2.0);
                const double dens = centers.weight(i) * std::exp(-0.5 * (y - mu2) * (y - mu2) / var2) /
                                    std::sqrt(2.0 * std::numbers::pi * var2);
                const double w = simpson * yb.width / (3.0 * kPanels) * dens;
                const double cm = mu1 + cov / var2 * (y - mu2);
                for (std::size_t xi = 0; xi < xb.bins; ++xi) {
                    const double a = xi == 0 ? -std::numeric_limits<double>::infinity()
                                             : xb.lo + static_cast<double>(xi) * xb.width;
                    const double b = xi + 1 == xb.bins ? std::numeric_limits<double>::infinity()
                                                       : xb.lo + static_cast<double>(xi + 1) * xb.width;
                    double p;
                    if (cond_sd < 1e-12) {
                        p = (cm >= a && cm < b) ? 1.0 : 0.0;
                    } else {
                        p = normal_cdf((b - cm) / cond_sd) - normal_cdf((a - cm) / cond_sd);
                    }
                    row[xi] += w * p;
                }
            }
        }
        const double total = pairwise_sum(row);
        for (std::size_t xi = 0; xi < xb.bins; ++xi) hist[yi * xb.bins + xi] = row[xi] / total;
    }
    return hist;
}

double l1_row(const std::vector<double>& a, const std::vector<double>& b, std::size_t row, std::size_t width) {
    double acc = 0.0;
    for (std::size_t k = 0; k < width; ++k) acc += std::abs(a[row * width + k] - b[row * width + k]);
    return acc;
}

void normalize_rows(std::vector<double>& hist, const std::vector<std::size_t>& counts, std::size_t width) {
    for (std::size_t r = 0; r < counts.size(); ++r)
        for (std::size_t k = 0; k < width; ++k)
            hist[r * width + k] /= static_cast<double>(counts[r]);
}

}  // namespace

TimeReversalReport time_reversal_check(const GaussianMixtureScore& rho0,
                                       const TimeReversalOptions& o) {
    if (rho0.dim() != 1) throw DomainError("time_reversal_check: only 1D is supported");
    if (!(o.t1 > 0.0) || !(o.t2 >= o.t1) || !(o.horizon >= o.t2))
        throw DomainError("time_reversal_check: need 0 < t1 <= t2 <= T*");
    if (o.x_bins == 0 || o.y_bins == 0 || !(o.x_hi > o.x_lo) || !(o.y_width > 0.0))
        throw ConfigError("time_reversal_check: invalid binning");
    if (!(o.reverse_ds > 0.0)) throw ConfigError("time_reversal_check: reverse step must be positive");
    if (o.n_mc == 0) throw ConfigError("time_reversal_check: n_mc must be positive");

    const Binning xb{o.x_lo, (o.x_hi - o.x_lo) / static_cast<double>(o.x_bins), o.x_bins};
    const Binning yb{o.y_center - 0.5 * o.y_width * static_cast<double>(o.y_bins), o.y_width, o.y_bins};

    TimeReversalReport rep;
    for (std::size_t k = 0; k <= o.x_bins; ++k) rep.x_edges.push_back(xb.lo + static_cast<double>(k) * xb.width);
    for (std::size_t k = 0; k <= o.y_bins; ++k) rep.y_edges.push_back(yb.lo + static_cast<double>(k) * yb.width);
    rep.forward_counts.assign(o.y_bins, 0);
    rep.reverse_counts.assign(o.y_bins, 0);
    rep.forward_hist.assign(o.y_bins * o.x_bins, 0.0);
    rep.reverse_hist.assign(o.y_bins * o.x_bins, 0.0);

    // Forward pairs (X_{t1}, X_{t2}), each transition sampled exactly.
    const RandomStream rng(o.seed);
    const double sd0 = std::sqrt(rho0.bandwidth());
    const auto& centers = rho0.centers();
    for (std::size_t j = 0; j < o.n_mc; ++j) {
        auto atom = rng.substream(Purpose::AtomChoice, j);
        const std::size_t i = atom.categorical(centers.cumulative_weights());
        const double x0 = centers.point(i)[0] + sd0 * atom.normal();
        auto noise = rng.substream(Purpose::ForwardNoise, j);
        const double z1 = noise.normal(), z2 = noise.normal();
        const auto c1 = coeffs(o.t1);
        const auto c21 = coeffs(o.t2 - o.t1);
        const double x1 = c1.alpha * x0 + std::sqrt(c1.beta_sq) * z1;
        const double x2 = c21.alpha * x1 + std::sqrt(c21.beta_sq) * z2;
        const long yi = yb.inside(x2);
        if (yi < 0) continue;
        ++rep.forward_counts[static_cast<std::size_t>(yi)];
        rep.forward_hist[static_cast<std::size_t>(yi) * o.x_bins + xb.clamped(x1)] += 1.0;
    }

    // Reverse pass: q0 = rho(., T*), nodes placed exactly at s2 and s1.
    const double s1 = o.horizon - o.t1, s2 = o.horizon - o.t2;
    std::vector<double> s_values{0.0};
    auto extend = [&](double target) {
        const double from = s_values.back();
        if (!(target > from)) return;
        const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround((target - from) / o.reverse_ds)));
        for (std::size_t k = 1; k <= n; ++k)
            s_values.push_back(k == n ? target : from + (target - from) * static_cast<double>(k) / static_cast<double>(n));
    };
    extend(s2);
    const std::size_t node2 = s_values.size() - 1;
    extend(s1);
    const std::size_t node1 = s_values.size() - 1;
    const Schedule schedule = Schedule::custom(o.horizon, s_values);
    const InitialLaw q0 = InitialLaw::forward_marginal(centers, o.horizon, rho0.bandwidth());
    ReverseOptions ro;
    ro.sampler = SamplerKind::Exact;
    ro.workers = o.workers;
    ro.record_nodes = node1 == node2 ? std::vector<std::size_t>{node1} : std::vector<std::size_t>{node2, node1};
    const auto batch = run_reverse(rho0, schedule, q0, o.n_mc, splitmix64(o.seed ^ 0x7e7e7e7eULL), ro);
    const std::size_t slot2 = batch.slot_of(node2), slot1 = batch.slot_of(node1);
    for (std::size_t j = 0; j < o.n_mc; ++j) {
        const long yi = yb.inside(batch.state(j, slot2)[0]);
        if (yi < 0) continue;
        ++rep.reverse_counts[static_cast<std::size_t>(yi)];
        rep.reverse_hist[static_cast<std::size_t>(yi) * o.x_bins + xb.clamped(batch.state(j, slot1)[0])] += 1.0;
    }

    for (std::size_t r = 0; r < o.y_bins; ++r) {
        if (rep.forward_counts[r] < o.min_count || rep.reverse_counts[r] < o.min_count)
            throw StatisticsError("time_reversal_check: y-bin " + std::to_string(r) + " has only " +
                                  std::to_string(std::min(rep.forward_counts[r], rep.reverse_counts[r])) +
                                  " samples; increase n_mc");
    }
    normalize_rows(rep.forward_hist, rep.forward_counts, o.x_bins);
    normalize_rows(rep.reverse_hist, rep.reverse_counts, o.x_bins);
    rep.oracle_hist = oracle_histogram(rho0, o, xb, yb);
    for (std::size_t r = 0; r < o.y_bins; ++r) {
        rep.l1_forward_reverse.push_back(l1_row(rep.forward_hist, rep.reverse_hist, r, o.x_bins));
        rep.l1_forward_oracle.push_back(l1_row(rep.forward_hist, rep.oracle_hist, r, o.x_bins));
        rep.l1_reverse_oracle.push_back(l1_row(rep.reverse_hist, rep.oracle_hist, r, o.x_bins));
    }
    rep.max_discrepancy = *std::max_element(rep.l1_forward_reverse.begin(), rep.l1_forward_reverse.end());
    return rep;
}

}  // namespace revdiff
