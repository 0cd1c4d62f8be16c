#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "revdiff/analysis.hpp"
#include "revdiff/cli.hpp"
#include "revdiff/data.hpp"
#include "revdiff/fokker_planck.hpp"
#include "revdiff/loss_lab.hpp"
#include "revdiff/numerics.hpp"
#include "revdiff/random_stream.hpp"
#include "revdiff/reverse_samplers.hpp"
#include "revdiff/score_field.hpp"

namespace revdiff {

namespace {

CheckResult at_most(double measured, double tolerance) {
    return {measured, tolerance, measured <= tolerance};
}

CheckResult at_least(double measured, double tolerance) {
    return {measured, tolerance, measured >= tolerance};
}

/// 20 x 20 grid of (t_n, delta) with t_n log-spaced in [1e-3, 10].
template <typename F>
double max_over_step_grid(F&& f) {
    constexpr double t_min = 1e-4;
    double worst = 0.0;
    for (int a = 0; a < 20; ++a) {
        const double t_n = 1e-3 * std::pow(1e4, a / 19.0);
        for (int b = 1; b <= 20; ++b) {
            const double delta = (t_n - t_min) * b / 20.0;
            worst = std::max(worst, f(StepParams::between(t_n, t_n - delta)));
        }
    }
    return worst;
}

}  // namespace

std::vector<VerifyCheck> verify_checks(std::uint64_t seed, bool break_sinh) {
    std::vector<VerifyCheck> checks;

    checks.push_back({"step.dual-form", "exponential and sinh forms of the exact step agree",
                      [break_sinh] {
                          const double err = max_over_step_grid([&](const StepParams& p) {
                              const auto e = exact_step_coeffs(p);
                              auto s = sinh_step_coeffs(p);
                              if (break_sinh) s.xbar_coeff = -s.xbar_coeff;
                              return std::max({std::abs(e.x_coeff - s.x_coeff),
                                               std::abs(e.xbar_coeff - s.xbar_coeff),
                                               std::abs(e.var - s.var)});
                          });
                          return at_most(err, 1e-12);
                      }});

    checks.push_back({"step.posterior", "Gaussian-product posterior equals the exact step with xbar = x0",
                      [] {
                          const double err = max_over_step_grid([](const StepParams& p) {
                              const double xm[1] = {0.7}, x0[1] = {-1.3}, zero[1] = {0.0};
                              const auto g = posterior_law(xm, x0, p.t_to, p.t_from);
                              const auto e = exact_step(xm, p, x0, zero);
                              const auto c = exact_step_coeffs(p);
                              return std::max(std::abs(g.mean[0] - e[0]), std::abs(g.var - c.var));
                          });
                          return at_most(err, 1e-12);
                      }});

    checks.push_back({"core.coeffs-identity", "alpha^2 + beta^2 = 1", [] {
                          double worst = 0.0;
                          for (int k = 0; k <= 200; ++k) {
                              const auto c = coeffs(60.0 * k / 200.0);
                              worst = std::max(worst, std::abs(c.alpha * c.alpha + c.beta_sq - 1.0));
                          }
                          return at_most(worst, 1e-12);
                      }});

    checks.push_back({"score.fd-gradient", "kernel score equals the gradient of log_density", [seed] {
                          const SampleSet atoms = make_blobs(2, 3, 2, 0.5, seed);
                          const KernelScore k(atoms);
                          auto sub = RandomStream(seed).substream(Purpose::Test, 1);
                          double worst = 0.0;
                          for (int n = 0; n < 50; ++n) {
                              const Point x{3.0 * sub.normal(), 3.0 * sub.normal()};
                              const double t = 0.05 + 2.0 * sub.uniform();
                              const Point s = k.score(x, t);
                              double num = 0.0, den = 0.0;
                              for (std::size_t c = 0; c < 2; ++c) {
                                  const double h = 1e-5 * (1.0 + std::abs(x[c]));
                                  Point xp = x, xm = x;
                                  xp[c] += h;
                                  xm[c] -= h;
                                  const double fd = (k.log_density(xp, t) - k.log_density(xm, t)) / (2.0 * h);
                                  num += (fd - s[c]) * (fd - s[c]);
                                  den += s[c] * s[c];
                              }
                              worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-3));
                          }
                          return at_most(worst, 1e-5);
                      }});

    checks.push_back({"score.softmax-limits", "uniform weights at t = 50, one-hot at t = 1e-8", [] {
                          const KernelScore k(SampleSet(1, {-1.0, 1.0}));
                          const double x[1] = {0.2};
                          const auto wl = k.weights(x, 50.0);
                          const auto ws = k.weights(x, 1e-8);
                          return at_most(std::max(std::abs(wl[0] - 0.5), ws[0]), 1e-10);
                      }});

    checks.push_back({"score.mixture-v0", "Gaussian mixture with v = 0 equals the kernel score", [seed] {
                          const SampleSet atoms = make_blobs(3, 2, 2, 0.3, seed);
                          const KernelScore k(atoms);
                          const GaussianMixtureScore g(atoms, 0.0);
                          auto sub = RandomStream(seed).substream(Purpose::Test, 2);
                          double worst = 0.0;
                          for (int n = 0; n < 100; ++n) {
                              const Point x{2.0 * sub.normal(), 2.0 * sub.normal()};
                              const double t = 0.01 + 3.0 * sub.uniform();
                              const Point a = k.score(x, t), b = g.score(x, t);
                              worst = std::max(worst, std::sqrt(squared_distance(a, b)) /
                                                          (1.0 + std::sqrt(squared_distance(a, Point(2, 0.0)))));
                          }
                          return at_most(worst, 1e-12);
                      }});

    checks.push_back({"sampler.large-t-drift", "at t = 20 the exact step relaxes like the forward OU", [] {
                          double worst = 0.0;
                          for (double x = -10.0; x <= 10.0; x += 0.5) {
                              const auto p = StepParams::between(20.0, 19.9);
                              const double xx[1] = {x}, zero[1] = {0.0};
                              const auto y = exact_step(xx, p, zero, zero);
                              worst = std::max(worst, std::abs(y[0] - std::exp(-p.delta) * x));
                          }
                          return at_most(worst, 1e-8);
                      }});

    checks.push_back({"sampler.hyperbolic-drift", "three closed forms of the reverse drift agree", [seed] {
                          auto sub = RandomStream(seed).substream(Purpose::Test, 3);
                          double worst = 0.0;
                          for (int n = 0; n < 100; ++n) {
                              const double x = 4.0 * sub.normal(), xb = 2.0 * sub.normal();
                              const double t = 0.01 + 5.0 * sub.uniform();
                              const double a = reverse_drift(x, xb, t);
                              const double b = reverse_drift_half_tanh(x, xb, t);
                              const double c = reverse_drift_coth(x, xb, t);
                              const double scale = 1.0 + std::abs(a);
                              worst = std::max({worst, std::abs(a - b) / scale, std::abs(a - c) / scale});
                          }
                          return at_most(worst, 1e-10);
                      }});

    checks.push_back({"sampler.single-atom", "single-atom exact sampler matches the closed-form marginal at s = 1",
                      [seed] {
                          const double atom = 1.5;
                          const KernelScore field(SampleSet(1, {atom}));
                          const auto schedule = make_schedule(ScheduleKind::Uniform, 2.0, 19, 0.1);
                          ReverseOptions opt;
                          opt.record_nodes = {0, 10};
                          const std::size_t n = 20000;
                          const auto b = run_reverse(field, schedule, InitialLaw::standard_normal(1), n, seed, opt);
                          const double s = b.s(1);
                          const double a0 = std::sinh(2.0 - s) / std::sinh(2.0), a1 = std::sinh(s) / std::sinh(2.0);
                          std::vector<double> resid(n);
                          for (std::size_t j = 0; j < n; ++j)
                              resid[j] = b.state(j, 1)[0] - (a0 * b.state(j, 0)[0] + a1 * atom);
                          const auto m = mean_and_se(resid);
                          double ss = 0.0;
                          for (double r : resid) ss += (r - m.mean) * (r - m.mean);
                          const double var = ss / static_cast<double>(n - 1);
                          const double target = 2.0 * std::sinh(2.0 - s) * std::sinh(s) / std::sinh(2.0);
                          const double z = std::abs(m.mean) / m.std_error;
                          const double rel = std::abs(var / target - 1.0);
                          // report the worse of the two normalized discrepancies
                          return at_most(std::max(z / 4.0, rel / 0.05), 1.0);
                      }});

    checks.push_back({"analysis.terminal-weights", "atoms {-1, 1}, x_start = 0.5, T* = 1", [] {
                          const double x[1] = {0.5};
                          const auto w = terminal_weights(x, SampleSet(1, {-1.0, 1.0}), 1.0);
                          return at_most(std::abs(w[0] - 0.395211184823), 1e-3);
                      }});

    checks.push_back({"analysis.support-collapse", "exact sampler terminals land on ring atoms", [seed] {
                          const SampleSet ring = make_ring(10, 1.0);
                          const KernelScore field(ring);
                          const auto schedule = make_schedule(ScheduleKind::Geometric, 4.0, 200, 1e-4);
                          ReverseOptions opt;
                          opt.record_nodes = {200};
                          const auto b = run_reverse(field, schedule, InitialLaw::standard_normal(2), 1000, seed, opt);
                          const auto r = memorization_report(b, ring, 0.1);
                          return at_least(r.frac_within_eps, 0.99);
                      }});

    checks.push_back({"analysis.wasserstein", "W1({0},{1}) = 1 and symmetry", [seed] {
                          const double a[1] = {0.0}, b[1] = {1.0};
                          auto sub = RandomStream(seed).substream(Purpose::Test, 4);
                          std::vector<double> u(100), v(100);
                          for (auto& e : u) e = sub.normal();
                          for (auto& e : v) e = sub.normal() + 0.5;
                          const double err = std::abs(wasserstein1d(a, b, 1) - 1.0) +
                                             std::abs(wasserstein1d(u, v, 2) - wasserstein1d(v, u, 2));
                          return at_most(err, 1e-15);
                      }});

    checks.push_back({"pde.stationary", "N(0,1) is invariant under the forward solver", [] {
                          const auto g = DensityGrid::gaussian(8.0, 200, 0.0, 1.0);
                          const auto sol = solve_forward(g, 2.0);
                          return at_most(sup_distance(sol.grids.back(), g), 1e-6);
                      }});

    checks.push_back({"pde.mass", "forward solver conserves mass", [] {
                          const auto g = DensityGrid::from_function(8.0, 200, [](double x) {
                              return std::exp(-8.0 * (x - 1.5) * (x - 1.5)) + std::exp(-2.0 * (x + 1.0) * (x + 1.0));
                          });
                          const auto sol = solve_forward(g, 1.0);
                          return at_most(sol.report.max_mass_drift_rate(), 1e-8);
                      }});

    checks.push_back({"pde.stabilization-identity", "discrete Laplacian identity at M = 800", [] {
                          return at_most(stabilization_identity_error(DensityGrid::gaussian(8.0, 800, 0.0, 1.0)), 1e-3);
                      }});

    checks.push_back({"pde.ill-posed", "naive reverse PDE amplifies the top mode by >= 1e3 in s = 0.2", [] {
                          auto g = DensityGrid::gaussian(8.0, 400, 0.0, 1.0);
                          for (std::size_t i = 0; i < g.size(); ++i)
                              g.values[i] += 1e-6 * (1.0 + std::cos(std::numbers::pi * 400.0 * g.x(i) / 16.0));
                          PdeOptions opt;
                          opt.track_spectrum = true;
                          const auto rep = solve_reverse_unstable(g, 0.2, opt);
                          const double growth = rep.blew_up ? std::numeric_limits<double>::infinity()
                                                            : rep.hf_energy.back() / rep.hf_energy.front();
                          return at_least(growth, 1e3);
                      }});

    checks.push_back({"loss.pathwise-floor", "total loss of the kernel predictor equals the floor draw by draw",
                      [seed] {
                          const SampleSet atoms(1, {-1.0, 1.0});
                          LossConfig cfg{TimeSampling::uniform(1e-3, 4.0), 2000, seed, 1};
                          const auto total = total_loss(kernel_xbar_predictor(atoms), atoms, cfg);
                          const auto floor = variance_floor(atoms, cfg);
                          return at_most(std::abs(total.value - floor.value), 1e-10);
                      }});

    checks.push_back({"loss.eps-equivalence", "noise and origin parameterizations give the same loss",
                      [seed] {
                          const SampleSet atoms(1, {-1.0, 1.0});
                          LossConfig cfg{TimeSampling::uniform(1e-2, 4.0), 2000, seed, 1};
                          const auto xb = random_feature_predictor(kernel_xbar_predictor(atoms), 1, 8, 0.2, seed);
                          const auto a = total_loss(xb, atoms, cfg);
                          const auto b = eps_total_loss(eps_predictor_from_xbar(xb), atoms, cfg);
                          return at_most(std::abs(a.value - b.value), 3.0 * std::hypot(a.std_error, b.std_error));
                      }});

    return checks;
}

}  // namespace revdiff
