#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "revdiff/analysis.hpp"
#include "revdiff/data.hpp"
#include "revdiff/errors.hpp"
#include "revdiff/random_stream.hpp"
#include "revdiff/score_field.hpp"

using namespace revdiff;

TEST_CASE("voronoi assignment") {
    const SampleSet s(1, {-1.0, 1.0, 3.0});
    const double a[1] = {0.0}, b[1] = {1.9}, c[1] = {2.1};
    CHECK(voronoi_assign(a, s) == 0);  // tie -> lowest index
    CHECK(voronoi_assign(b, s) == 1);
    CHECK(voronoi_assign(c, s) == 2);
}

TEST_CASE("terminal weights") {
    const SampleSet s(1, {-1.0, 1.0});
    const double x[1] = {0.5};
    const auto w = terminal_weights(x, s, 1.0);
    CHECK(w[0] == doctest::Approx(0.395211184823).epsilon(1e-11));
    CHECK(w[1] == doctest::Approx(0.604788815177).epsilon(1e-11));
    const auto o = oracle::atom_posterior({-1.0L, 1.0L}, {0.5L, 0.5L}, 0.5L, 1.0L);
    CHECK(w[0] == doctest::Approx(static_cast<double>(o[0])).epsilon(1e-14));
    // large horizon forgets the start
    const auto late = terminal_weights(x, SampleSet(1, {-1.0, 1.0}, {0.3, 0.7}), 40.0);
    CHECK(late[0] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("expected terminal weights under the forward marginal equal the prior") {
    const SampleSet s(1, {-1.0, 0.5, 2.0}, {0.2, 0.3, 0.5});
    const auto q0 = InitialLaw::forward_marginal(s, 1.0);
    const auto e = expected_terminal_weights(s, q0, 1.0, 40000, 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(e.mean[i] - s.weight(i)) < 4 * e.std_error[i]);
}

TEST_CASE("memorization report on a synthetic batch") {
    const SampleSet s(1, {-1.0, 1.0});
    TrajectoryBatch b;
    b.n_traj = 4;
    b.dim = 1;
    b.nodes = {0};
    b.states = {-1.0, 1.05, 0.99, 0.3};
    b.schedule = std::make_shared<Schedule>(make_schedule(ScheduleKind::Uniform, 1.0, 1, 0.1));
    b.q0 = InitialLaw::standard_normal(1);
    const auto r = memorization_report(b, s, 0.1, {0.5, 0.5});
    CHECK(r.frac_within_eps == doctest::Approx(0.75));
    CHECK(r.hits[0] == 1);
    CHECK(r.hits[1] == 2);
    CHECK(r.empirical_weights[1] == doctest::Approx(0.75));
    CHECK(r.tv_gap == doctest::Approx(0.25));
    CHECK(r.median_dist == doctest::Approx(0.03));
}

TEST_CASE("total variation") {
    const std::vector<double> p{0.2, 0.8}, q{0.5, 0.5};
    CHECK(total_variation(p, q) == doctest::Approx(0.3));
    CHECK(total_variation(p, p) == 0.0);
}

TEST_CASE("one-dimensional Wasserstein") {
    const std::vector<double> a{3.0, 1.0, 2.0}, b{2.0, 4.0, 3.0};
    CHECK(wasserstein1d(a, b, 1) == doctest::Approx(1.0));
    CHECK(wasserstein1d(a, b, 2) == doctest::Approx(1.0));
    const std::vector<double> one{0.0}, two{0.0, 1.0};
    CHECK(wasserstein1d(one, two, 1) == doctest::Approx(0.5));
    CHECK(wasserstein1d(one, two, 2) == doctest::Approx(std::sqrt(0.5)));
    CHECK(wasserstein1d(a, a, 2) == 0.0);
    // symmetric and translation equivariant
    std::vector<double> c{0.1, 0.7, 0.2, 0.9}, d{1.5, -0.2};
    CHECK(wasserstein1d(c, d, 1) == doctest::Approx(wasserstein1d(d, c, 1)));
    std::vector<double> shifted = c;
    for (auto& v : shifted) v += 2.5;
    CHECK(wasserstein1d(c, shifted, 2) == doctest::Approx(2.5));
    CHECK_THROWS(wasserstein1d(a, b, 3));
}

TEST_CASE("sliced W2 of a translated cloud") {
    auto s = RandomStream(8).substream(Purpose::Test, 0);
    std::vector<double> a(2 * 500), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = s.normal();
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] + (i % 2 ? 0.0 : 1.0);
    CHECK(sliced_wasserstein2(a, a, 2, 1) == 0.0);
    // E (theta . c)^2 = |c|^2 / d
    CHECK(sliced_wasserstein2(a, b, 2, 1, 2000) == doctest::Approx(std::sqrt(0.5)).epsilon(0.05));
}

TEST_CASE("W2 to a single atom shrinks to zero") {
    const double x0[1] = {0.7};
    const KernelScore field(SampleSet(1, {0.7}));
    const auto sched = make_schedule(ScheduleKind::Uniform, 2.0, 20, 1e-4);
    const auto b = run_reverse(field, sched, InitialLaw::standard_normal(1), 4000, 2);
    const auto c = w2_to_dirac(b, x0);
    REQUIRE(c.value.size() == 21);
    CHECK(c.value.back() < 0.05);
    for (std::size_t k = 1; k < c.value.size(); ++k) CHECK(c.value[k] <= c.value[k - 1] + 3 * c.std_error[k - 1]);
    // E|X_s - x0|^2 = a0^2 + (a1 - 1)^2 x0^2 + 2 sinh(T - s) a1
    const std::size_t k = 10;
    const double s = b.s(k), a0 = std::sinh(2 - s) / std::sinh(2.0), a1 = std::sinh(s) / std::sinh(2.0);
    const double m = (a1 - 1.0) * 0.7, v = a0 * a0 + 2 * std::sinh(2 - s) * a1;
    CHECK(c.value[k] == doctest::Approx(std::sqrt(m * m + v)).epsilon(0.02));
}

TEST_CASE("time-reversal oracle matches the independent bridge integral") {
    const GaussianMixtureScore rho0(SampleSet(1, {0.0}), 4.0);
    TimeReversalOptions opt;
    opt.n_mc = 50000;
    opt.x_bins = 12;
    opt.y_bins = 3;
    opt.y_width = 0.5;
    opt.reverse_ds = 0.05;
    opt.min_count = 100;
    const auto r = time_reversal_check(rho0, opt);
    REQUIRE(r.oracle_hist.size() == 36);
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 12; ++x) {
            const double lo = x == 0 ? -INFINITY : r.x_edges[x];
            const double hi = x == 11 ? INFINITY : r.x_edges[x + 1];
            const double p = static_cast<double>(
                oracle::bridge_bin_probability(4.0L, 0.5L, 2.0L, lo, hi, r.y_edges[y], r.y_edges[y + 1]));
            CHECK(r.oracle_hist[y * 12 + x] == doctest::Approx(p).epsilon(1e-6).scale(1.0));
        }
    CHECK(r.max_discrepancy < 0.15);
    CHECK(r.max_forward_oracle() < 0.15);

    opt.min_count = 1000000;
    CHECK_THROWS_AS(time_reversal_check(rho0, opt), StatisticsError);
}
