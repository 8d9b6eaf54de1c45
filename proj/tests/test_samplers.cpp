#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "hm/ensemble.hpp"
#include "hm/errors.hpp"
#include "hm/samplers.hpp"
#include "hm/stats.hpp"

using namespace hm;

TEST_CASE("bridge endpoints are exact and deterministic per stream") {
    const TimeGrid g1(0.0, 1.0, 1);
    const SamplePath p = sample_bridge(RngStream::from_seed(1), g1, 0.0, 0.0);
    CHECK(p.values == std::vector<double>{0.0, 0.0});

    const TimeGrid g(0.25, 0.75, 64);
    const SamplePath a = sample_bridge(RngStream::from_seed(7, 3), g, -0.4, 1.1);
    const SamplePath b = sample_bridge(RngStream::from_seed(7, 3), g, -0.4, 1.1);
    CHECK(a.values == b.values);
    CHECK(a.front() == -0.4);
    CHECK(a.back() == 1.1);
}

TEST_CASE("bridge variance at the midpoint matches t(1-t)") {
    const TimeGrid g(0.0, 1.0, 32);
    RngStream rng = RngStream::from_seed(2);
    const int n = 100000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
        const double v = sample_bridge(rng.substream(static_cast<std::uint64_t>(i)), g, 0.0, 0.0)
                             .at_time(0.5);
        s += v;
        ss += v * v;
    }
    const double var = ss / n - (s / n) * (s / n);
    // var of the sample variance of a Gaussian: 2 var^2 / n
    const double se = std::sqrt(2.0 / n) * 0.25;
    CHECK(std::fabs(var - 0.25) <= 3.0 * se);
}

TEST_CASE("bridge covariance matches s(1-t) on a 3x3 time set") {
    const TimeGrid g(0.0, 1.0, 16);
    RngStream rng = RngStream::from_seed(3);
    const int n = 100000;
    const double times[3] = {0.25, 0.5, 0.75};
    double sums[3] = {0, 0, 0};
    double cross[3][3] = {};
    for (int i = 0; i < n; ++i) {
        const SamplePath w = sample_bridge(rng.substream(static_cast<std::uint64_t>(i)), g, 0.0, 0.0);
        double v[3];
        for (int a = 0; a < 3; ++a) v[a] = w.at_time(times[a]);
        for (int a = 0; a < 3; ++a) {
            sums[a] += v[a];
            for (int b = 0; b < 3; ++b) cross[a][b] += v[a] * v[b];
        }
    }
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
            const double cov = cross[a][b] / n - (sums[a] / n) * (sums[b] / n);
            const double expected = times[a] * (1.0 - times[b]);
            // rough se of a covariance estimate
            const double se = 1.5 / std::sqrt(static_cast<double>(n));
            CHECK(std::fabs(cov - expected) <= 4.0 * se);
        }
}

TEST_CASE("bridge scaling law: interval bridges match rescaled unit bridges") {
    const double t1 = 0.2, t2 = 0.7;
    const double scale = std::sqrt(t2 - t1);
    const TimeGrid gi(t1, t2, 64), gu(0.0, 1.0, 64);
    RngStream rng = RngStream::from_seed(4);
    const int n = 100000;
    std::vector<double> xs(n), ys(n);
    const double a = 0.3, b = -0.2;
    for (int i = 0; i < n; ++i) {
        xs[static_cast<std::size_t>(i)] =
            sample_bridge(rng.substream(2 * static_cast<std::uint64_t>(i)), gi, a, b)
                .at_time(t1 + 0.5 * (t2 - t1));
        ys[static_cast<std::size_t>(i)] =
            scale * sample_bridge(rng.substream(2 * static_cast<std::uint64_t>(i) + 1), gu,
                                  a / scale, b / scale)
                        .at_time(0.5);
    }
    CHECK(ks_two_sample(xs, ys).p_value > 0.01);
}

TEST_CASE("BES(3) bridge is nonnegative with exact endpoints") {
    const TimeGrid g(0.0, 1.0, 64);
    RngStream rng = RngStream::from_seed(5);
    CHECK_THROWS_AS(sample_bes3_bridge(rng, g, -1.0, 0.0), DomainError);
    for (int i = 0; i < 200; ++i) {
        const SamplePath w =
            sample_bes3_bridge(rng.substream(static_cast<std::uint64_t>(i)), g, 0.0, 1.3);
        CHECK(w.front() == 0.0);
        CHECK(w.back() == 1.3);
        for (double v : w.values) CHECK(v >= 0.0);
    }
    const TimeGrid g1(0.0, 1.0, 1);
    CHECK(sample_bes3_bridge(rng, g1, 0.0, 0.0).values == std::vector<double>{0.0, 0.0});
}

TEST_CASE("BES(3) bridge midpoint mean matches the Gaussian-triple oracle") {
    // Oracle: |3-d Gaussian| with variance 1/4 per coordinate (the 0->0
    // bridge at its midpoint), estimated by direct simulation.
    RngStream orng = RngStream::from_seed(6);
    const int m = 1000000;
    double osum = 0;
    for (int i = 0; i < m; ++i) {
        const double x = 0.5 * orng.normal(), y = 0.5 * orng.normal(), z = 0.5 * orng.normal();
        osum += std::sqrt(x * x + y * y + z * z);
    }
    const double oracle = osum / m; // analytic value sqrt(2/pi) ~ 0.79788
    CHECK(oracle == doctest::Approx(std::sqrt(2.0 / 3.141592653589793)).epsilon(0.005));

    const TimeGrid g(0.0, 1.0, 64);
    RngStream rng = RngStream::from_seed(7);
    const int n = 200000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
        const double v =
            sample_bes3_bridge(rng.substream(static_cast<std::uint64_t>(i)), g, 0.0, 0.0)
                .at_time(0.5);
        s += v;
        ss += v * v;
    }
    const double mean = s / n;
    const double se = std::sqrt((ss / n - mean * mean) / n);
    CHECK(std::fabs(mean - oracle) <= 3.0 * (se + 0.45 / std::sqrt(static_cast<double>(m))));
}

TEST_CASE("meander endpoint matches the conditioned-Brownian rejection oracle") {
    // Oracle: Brownian paths conditioned to stay above -eps, endpoint mean
    // extrapolated linearly in eps to 0; the limit is sqrt(pi/2).
    const TimeGrid g(0.0, 1.0, 512);
    RngStream orng = RngStream::from_seed(8);
    std::vector<double> eps_levels = {0.2, 0.1};
    std::vector<double> means;
    for (double eps : eps_levels) {
        double s = 0;
        int kept = 0;
        for (int i = 0; i < 60000; ++i) {
            RngStream r = orng.substream(static_cast<std::uint64_t>(i) +
                                         static_cast<std::uint64_t>(eps * 1e6) * 1000003ULL);
            const SamplePath w = sample_brownian(r, g, 0.0);
            bool ok = true;
            double x = w[0];
            for (int j = 0; j < g.n_steps && ok; ++j) {
                const double nx = w[j + 1];
                if (nx < -eps) ok = false;
                // crossing correction against the flat level -eps
                else if (r.uniform() >=
                         1.0 - std::exp(-2.0 * (x + eps) * (nx + eps) / g.dt()))
                    ok = false;
                x = nx;
            }
            if (ok) {
                s += w.back();
                ++kept;
            }
        }
        REQUIRE(kept > 1000);
        means.push_back(s / kept);
    }
    // linear extrapolation to eps = 0
    const double oracle =
        means[1] + (means[1] - means[0]) / (eps_levels[1] - eps_levels[0]) * (0.0 - eps_levels[1]);
    const double target = std::sqrt(3.141592653589793 / 2.0);
    CHECK(oracle == doctest::Approx(target).epsilon(0.03));

    RngStream rng = RngStream::from_seed(9);
    const int n = 200000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
        const SamplePath w = sample_meander(rng.substream(static_cast<std::uint64_t>(i)), g);
        CHECK(w.front() == 0.0);
        s += w.back();
        ss += w.back() * w.back();
    }
    const double mean = s / n;
    const double se = std::sqrt((ss / n - mean * mean) / n);
    CHECK(std::fabs(mean - target) <= 3.0 * se);
}

TEST_CASE("meander scaling law holds at the endpoint") {
    const double t1 = 0.3, t2 = 0.8;
    const TimeGrid gi(t1, t2, 64), gu(0.0, 1.0, 64);
    RngStream rng = RngStream::from_seed(10);
    const int n = 100000;
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
        xs[static_cast<std::size_t>(i)] =
            sample_meander(rng.substream(2 * static_cast<std::uint64_t>(i)), gi).back();
        ys[static_cast<std::size_t>(i)] =
            std::sqrt(t2 - t1) *
            sample_meander(rng.substream(2 * static_cast<std::uint64_t>(i) + 1), gu).back();
    }
    CHECK(ks_two_sample(xs, ys).p_value > 0.01);
}

TEST_CASE("zero-drift diffusion is Brownian motion") {
    const TimeGrid g(0.0, 1.0, 128);
    RngStream rng = RngStream::from_seed(11);
    const int n = 50000;
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
        xs[static_cast<std::size_t>(i)] =
            sample_diffusion(rng.substream(2 * static_cast<std::uint64_t>(i)), g,
                             DriftModel::zero(), 0.0)
                .back();
        ys[static_cast<std::size_t>(i)] =
            sample_brownian(rng.substream(2 * static_cast<std::uint64_t>(i) + 1), g, 0.0).back();
    }
    CHECK(ks_two_sample(xs, ys).p_value > 0.01);
}

TEST_CASE("constant-drift diffusion shifts the mean") {
    const TimeGrid g(0.0, 1.0, 128);
    RngStream rng = RngStream::from_seed(12);
    const int n = 100000;
    double s = 0;
    for (int i = 0; i < n; ++i)
        s += sample_diffusion(rng.substream(static_cast<std::uint64_t>(i)), g,
                              DriftModel::constant(0.7), 0.3)
                 .back();
    CHECK(std::fabs(s / n - 1.0) <= 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("mean-reverting diffusion variance matches the closed form") {
    const TimeGrid g(0.0, 1.0, 1024);
    RngStream rng = RngStream::from_seed(13);
    const int n = 100000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
        const double v = sample_diffusion(rng.substream(static_cast<std::uint64_t>(i)), g,
                                          DriftModel::linear(0.0, -1.0), 0.0)
                             .back();
        s += v;
        ss += v * v;
    }
    const double var = ss / n - (s / n) * (s / n);
    const double target = (1.0 - std::exp(-2.0)) / 2.0; // 0.43233
    const double se = std::sqrt(2.0 / n) * target;
    CHECK(std::fabs(var - target) <= 3.0 * se + 2.0 * g.dt());
}

TEST_CASE("diffusion-bridge weights follow the drift") {
    const TimeGrid g(0.0, 1.0, 64);
    RngStream rng = RngStream::from_seed(14);
    // zero drift: all log-weights vanish identically
    for (int i = 0; i < 16; ++i)
        CHECK(sample_diffusion_bridge(rng.substream(static_cast<std::uint64_t>(i)), g,
                                      DriftModel::zero(), 0.0, 1.0)
                  .log_weight == 0.0);
    // constant drift: log-weight is the constant -c^2 (t2-t1) / 2
    for (int i = 0; i < 16; ++i)
        CHECK(sample_diffusion_bridge(rng.substream(100 + static_cast<std::uint64_t>(i)), g,
                                      DriftModel::constant(2.0), 0.0, 1.0)
                  .log_weight == doctest::Approx(-2.0));
    // mean reversion: self-normalized mean at the midpoint stays at 0
    const int n = 40000;
    std::vector<double> lw(n), f(n);
    for (int i = 0; i < n; ++i) {
        const WeightedPath wp =
            sample_diffusion_bridge(rng.substream(1000 + static_cast<std::uint64_t>(i)), g,
                                    DriftModel::linear(0.0, -1.0), 0.0, 0.0);
        lw[static_cast<std::size_t>(i)] = wp.log_weight;
        f[static_cast<std::size_t>(i)] = wp.path.at_time(0.5);
    }
    const SnisResult r = snis(lw, f);
    CHECK(std::fabs(r.estimate) <= 3.0 * r.std_err);
}
