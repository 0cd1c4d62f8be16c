#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "revdiff/errors.hpp"
#include "revdiff/random_stream.hpp"
#include "revdiff/score_field.hpp"

using namespace revdiff;

namespace {
const std::vector<oracle::real> kAtoms{-1.0L, 1.0L}, kW{0.5L, 0.5L};
}

TEST_CASE("kernel xbar0 examples") {
    const KernelScore k(SampleSet(1, {-1.0, 1.0}));
    const double x[1] = {0.5};
    // frozen from the brute-force posterior
    CHECK(k.xbar0(x, 1.0)[0] == doctest::Approx(0.209577630354).epsilon(1e-11));
    CHECK(k.xbar0(x, 1.0)[0] == doctest::Approx(static_cast<double>(oracle::xbar0(kAtoms, kW, 0.5L, 1.0L))));
    const double zero[1] = {0.0};
    CHECK(k.xbar0(zero, 0.7)[0] == 0.0);
    CHECK_THROWS_AS(k.xbar0(x, 0.0), DomainError);
    CHECK_THROWS_AS(k.xbar0(x, -1.0), DomainError);
}

TEST_CASE("kernel score agrees with the oracle and the affine identity") {
    const KernelScore k(SampleSet(1, {-1.0, 0.3, 2.0}, {0.2, 0.5, 0.3}));
    const std::vector<oracle::real> atoms{-1.0L, 0.3L, 2.0L}, w{0.2L, 0.5L, 0.3L};
    auto s = RandomStream(5).substream(Purpose::Test, 0);
    for (int i = 0; i < 50; ++i) {
        const double x = 4.0 * s.uniform() - 2.0, t = 0.05 + 3.0 * s.uniform();
        const double xv[1] = {x};
        const double xb = static_cast<double>(oracle::xbar0(atoms, w, x, t));
        CHECK(k.xbar0(xv, t)[0] == doctest::Approx(xb).epsilon(1e-12));
        const double expect = (std::exp(-t) * xb - x) / (1.0 - std::exp(-2.0 * t));
        CHECK(k.score(xv, t)[0] == doctest::Approx(expect).epsilon(1e-10));
        CHECK(k.log_density(xv, t) ==
              doctest::Approx(static_cast<double>(oracle::log_density(atoms, w, x, t))).epsilon(1e-12));
    }
}

TEST_CASE("posterior weights: limits and simplex") {
    const KernelScore k(SampleSet(1, {-1.0, 1.0, 3.0}));
    const double x[1] = {0.9};
    const auto late = k.weights(x, 50.0);
    for (double w : late) CHECK(std::abs(w - 1.0 / 3.0) < 1e-10);
    const auto early = k.weights(x, 1e-8);
    CHECK(std::abs(early[1] - 1.0) < 1e-10);
    const auto mid = k.weights(x, 0.4);
    double sum = 0.0;
    for (double w : mid) {
        CHECK(w >= 0.0);
        sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    // x far outside the atom hull: stays finite and picks the nearest atom
    const double far[1] = {1e6};
    CHECK(k.weights(far, 1e-3)[2] == 1.0);
}

TEST_CASE("finite-difference gradient of log density") {
    const SampleSet atoms(2, {0.0, 0.0, 1.0, 0.5, -0.7, 1.2});
    const KernelScore k(atoms);
    auto s = RandomStream(11).substream(Purpose::Test, 0);
    for (int i = 0; i < 100; ++i) {
        double x[2] = {3.0 * s.uniform() - 1.5, 3.0 * s.uniform() - 1.5};
        const double t = 0.1 + 2.0 * s.uniform();
        const auto g = k.score(x, t);
        for (int c = 0; c < 2; ++c) {
            const double h = 1e-5;
            double xp[2] = {x[0], x[1]}, xm[2] = {x[0], x[1]};
            xp[c] += h;
            xm[c] -= h;
            const double fd = (k.log_density(xp, t) - k.log_density(xm, t)) / (2 * h);
            CHECK(std::abs(fd - g[c]) <= 1e-5 * std::max(1.0, std::abs(g[c])));
        }
    }
}

TEST_CASE("Gaussian mixture reduces to the kernel score at v = 0") {
    const SampleSet atoms(1, {-1.0, 1.0});
    const KernelScore k(atoms);
    const GaussianMixtureScore g(atoms, 0.0);
    for (double x : {-2.0, 0.1, 0.5, 3.0})
        for (double t : {0.01, 0.5, 2.0}) {
            const double xv[1] = {x};
            CHECK(g.score(xv, t)[0] == doctest::Approx(k.score(xv, t)[0]).epsilon(1e-12));
            CHECK(g.xbar0(xv, t)[0] == doctest::Approx(k.xbar0(xv, t)[0]).epsilon(1e-12));
        }
}

TEST_CASE("Gaussian mixture score and density for positive bandwidth") {
    const double v = 0.3;
    const GaussianMixtureScore g(SampleSet(1, {-1.0, 2.0}, {0.4, 0.6}), v);
    CHECK(g.component_variance(0.0) == doctest::Approx(v));
    CHECK(g.component_variance(30.0) == doctest::Approx(1.0));
    for (double t : {0.0, 0.2, 1.5}) {
        for (double x : {-1.5, 0.0, 1.0}) {
            const double a = std::exp(-t), s2 = v * a * a + 1.0 - a * a;
            const double p1 = 0.4 * std::exp(-std::pow(x + a, 2) / (2 * s2)),
                         p2 = 0.6 * std::exp(-std::pow(x - 2 * a, 2) / (2 * s2));
            const double dens = (p1 + p2) / std::sqrt(2 * M_PI * s2);
            const double score = (p1 * (-a - x) + p2 * (2 * a - x)) / ((p1 + p2) * s2);
            const double xv[1] = {x};
            CHECK(g.log_density(xv, t) == doctest::Approx(std::log(dens)).epsilon(1e-12));
            CHECK(g.score(xv, t)[0] == doctest::Approx(score).epsilon(1e-11));
            if (t > 0) {
                // affine identity between xbar0 and the score
                const double xb = g.xbar0(xv, t)[0];
                CHECK((a * xb - x) / (1 - a * a) == doctest::Approx(score).epsilon(1e-10));
            }
        }
    }
    // posterior mean at t = 0 shrinks nothing: xbar0(x, 0) = x
}

TEST_CASE("predictor score reconstructions") {
    const SampleSet atoms(1, {-1.0, 1.0});
    const KernelScore k(atoms);
    PredictorFn xbar = [&](std::span<const double> x, double t, std::span<double> out) { k.xbar0_into(x, t, out); };
    PredictorFn eps = [&](std::span<const double> x, double t, std::span<double> out) {
        double xb[1];
        k.xbar0_into(x, t, xb);
        eps_from_xbar(x, t, xb, out);
    };
    const PredictorScore px(1, PredictorMode::Xbar, xbar), pe(1, PredictorMode::Eps, eps);
    for (double t : {0.05, 0.7, 3.0}) {
        const double x[1] = {0.4};
        const double ref = k.score(x, t)[0];
        CHECK(px.score(x, t)[0] == doctest::Approx(ref).epsilon(1e-12));
        CHECK(pe.score(x, t)[0] == doctest::Approx(ref).epsilon(1e-9));
        CHECK(score_from_eps_predictor(eps, x, t)[0] == doctest::Approx(ref).epsilon(1e-9));
        double e[1], back[1];
        eps_from_xbar(x, t, k.xbar0(x, t), e);
        xbar_from_eps(x, t, e, back);
        CHECK(back[0] == doctest::Approx(k.xbar0(x, t)[0]).epsilon(1e-12));
    }
}
