#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hm/corridor.hpp"
#include "hm/curve.hpp"
#include "hm/errors.hpp"
#include "hm/grid.hpp"
#include "hm/rng.hpp"

using namespace hm;

TEST_CASE("curve families evaluate with analytic derivatives") {
    const Curve c = Curve::constant(3.0);
    CHECK(c.eval(0.7, 0) == 3.0);
    CHECK(c.eval(0.7, 1) == 0.0);

    const Curve l = Curve::linear(1.0, 2.0);
    CHECK(l.eval(0.5, 0) == doctest::Approx(2.0));
    CHECK(l.eval(0.5, 1) == 2.0);
    CHECK(l.eval(0.5, 2) == 0.0);

    const Curve cos1 = Curve::cosine(1.0, 1.0, 0.0, 0.0);
    const double tp = 6.283185307179586;
    CHECK(cos1.eval(0.0, 2) == doctest::Approx(-tp * tp).epsilon(1e-12));
    // cross-check the second derivative by central differences
    const double h = 1e-5;
    for (double t : {0.0, 0.3, 0.85}) {
        const double fd2 = (cos1.eval(t + h) - 2 * cos1.eval(t) + cos1.eval(t - h)) / (h * h);
        CHECK(cos1.eval(t, 2) == doctest::Approx(fd2).epsilon(1e-4));
        const double fd1 = (cos1.eval(t + h) - cos1.eval(t - h)) / (2 * h);
        CHECK(cos1.eval(t, 1) == doctest::Approx(fd1).epsilon(1e-6));
    }

    const Curve p = Curve::polynomial({1.0, 0.0, -2.0, 0.5}); // 1 - 2t^2 + t^3/2
    for (double t : {0.1, 0.6}) {
        CHECK(p.eval(t, 0) == doctest::Approx(1.0 - 2.0 * t * t + 0.5 * t * t * t));
        CHECK(p.eval(t, 1) == doctest::Approx(-4.0 * t + 1.5 * t * t));
        CHECK(p.eval(t, 2) == doctest::Approx(-4.0 + 3.0 * t));
    }
}

TEST_CASE("tabulated curve interpolates and checks derivative consistency") {
    std::vector<double> ts, g, dg, ddg;
    for (int i = 0; i <= 64; ++i) {
        const double t = i / 64.0;
        ts.push_back(t);
        g.push_back(std::sin(t));
        dg.push_back(std::cos(t));
        ddg.push_back(-std::sin(t));
    }
    const Curve c = Curve::tabulated(ts, g, dg, ddg);
    for (double t : {0.13, 0.5, 0.77}) {
        CHECK(c.eval(t, 0) == doctest::Approx(std::sin(t)).epsilon(1e-6));
        CHECK(c.eval(t, 1) == doctest::Approx(std::cos(t)).epsilon(1e-3));
        CHECK(c.eval(t, 2) == doctest::Approx(-std::sin(t)).epsilon(1e-3));
    }
    CHECK_THROWS_AS(c.eval(1.5, 0), DomainError);

    // Inconsistent derivative table is rejected.
    std::vector<double> bad = dg;
    for (double& v : bad) v += 0.5;
    CHECK_THROWS_AS(Curve::tabulated(ts, g, bad, ddg), ConfigError);
}

TEST_CASE("corridor membership is closed and monotone in the margins") {
    const Corridor k(Curve::constant(0.0), Curve::constant(1.0));
    const TimeGrid grid(0.0, 1.0, 16);
    SamplePath w{grid, std::vector<double>(17, 0.5)};
    CHECK(corridor_contains(k, w));

    w[7] = 1.1;
    CHECK_FALSE(corridor_contains(k, w));
    CHECK(corridor_contains(k, w, 0.0, 0.2));

    // boundary inclusion: endpoint equality allowed
    SamplePath diag(grid);
    for (int i = 0; i <= 16; ++i) diag[i] = grid.node(i);
    CHECK(corridor_contains(k, diag));

    // monotone in the widening
    RngStream rng = RngStream::from_seed(11);
    for (int rep = 0; rep < 50; ++rep) {
        SamplePath p(grid);
        for (int i = 0; i <= 16; ++i) p[i] = 0.5 + rng.normal();
        const double e1 = 0.3, e2 = 0.9;
        if (corridor_contains(k, p, e1, e1)) CHECK(corridor_contains(k, p, e2, e2));
    }
}

TEST_CASE("corridor requires positive width") {
    CHECK_THROWS_AS(Corridor(Curve::constant(0.0), Curve::linear(1.0, -2.0)), ConfigError);
}

TEST_CASE("splice uses the later part at junctions and is associative") {
    const TimeGrid g1(0.0, 0.5, 8), g2(0.5, 1.0, 8);
    SamplePath a{g1, std::vector<double>(9, 0.0)};
    SamplePath b{g2, std::vector<double>(9, 1.0)};
    const SamplePath s = splice(a, b);
    CHECK(s.grid.n_steps == 16);
    CHECK(s.at_time(0.25) == 0.0);
    CHECK(s.at_time(0.5) == 1.0); // later part wins at the junction
    CHECK(s.at_time(0.75) == 1.0);

    const TimeGrid h1(0.0, 0.25, 4), h2(0.25, 0.75, 8), h3(0.75, 1.0, 4);
    RngStream rng = RngStream::from_seed(3);
    auto rnd = [&](const TimeGrid& g) {
        SamplePath p(g);
        for (auto& v : p.values) v = rng.normal();
        return p;
    };
    const SamplePath x = rnd(h1), y = rnd(h2), z = rnd(h3);
    const SamplePath left = splice(splice(x, y), z);
    const SamplePath right = splice(x, splice(y, z));
    CHECK(left.values == right.values);

    const SamplePath single[] = {x};
    CHECK(splice(std::span<const SamplePath>(single, 1)).values == x.values);

    const TimeGrid overlap(0.4, 0.9, 8);
    SamplePath bad{overlap, std::vector<double>(9, 0.0)};
    CHECK_THROWS_AS(splice(a, bad), CompositionError);
}

TEST_CASE("path reversal is an involution") {
    const TimeGrid g(0.0, 1.0, 10);
    SamplePath w(g);
    for (int i = 0; i <= 10; ++i) w[i] = g.node(i);
    const SamplePath r = reverse_path(w);
    CHECK(r.at_time(0.0) == doctest::Approx(1.0));
    CHECK(r.at_time(0.3) == doctest::Approx(0.7));
    CHECK(reverse_path(r).values == w.values);

    SamplePath c{g, std::vector<double>(11, 4.2)};
    CHECK(reverse_path(c).values == c.values);
}

TEST_CASE("reversed and combined curves evaluate consistently") {
    const Curve g = Curve::cosine(0.5, 1.0, 0.3, 1.0);
    const Curve rg = g.reversed(0.2, 0.8);
    for (double t : {0.2, 0.4, 0.65}) {
        CHECK(rg.eval(t, 0) == doctest::Approx(g.eval(1.0 - t, 0)));
        CHECK(rg.eval(t, 1) == doctest::Approx(-g.eval(1.0 - t, 1)));
        CHECK(rg.eval(t, 2) == doctest::Approx(g.eval(1.0 - t, 2)));
    }
    const Curve diff = Curve::constant(2.0) - g;
    CHECK(diff.eval(0.4, 0) == doctest::Approx(2.0 - g.eval(0.4)));
    CHECK(diff.eval(0.4, 1) == doctest::Approx(-g.eval(0.4, 1)));
}
