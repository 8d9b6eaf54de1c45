#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hm/conditioned.hpp"
#include "hm/corridor.hpp"
#include "hm/ensemble.hpp"
#include "hm/errors.hpp"
#include "hm/samplers.hpp"
#include "hm/stats.hpp"

using namespace hm;

namespace {

std::shared_ptr<const RecorderPlan> plan_probe(const TimeGrid& g, std::vector<double> probes,
                                               bool endpoint = false) {
    RecorderSpec s;
    s.probe_times = std::move(probes);
    s.endpoint = endpoint;
    return std::make_shared<const RecorderPlan>(s, g);
}

} // namespace

TEST_CASE("no-crossing probability matches the reflection formula") {
    // Frozen oracle: fine-grid Brownian-bridge crossing Monte Carlo for the
    // bridge 1 -> 1 over level 0 on dt = 1 (reduced-size rerun below).
    CHECK(nocross_prob_step(1.0, 1.0, 1.0, 0.0, 0.0, true) ==
          doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));
    CHECK(nocross_prob_step(0.0, 1.0, 1.0, 0.0, 0.0, true) == 0.0);
    CHECK(nocross_prob_step(1.0, 0.0, 1.0, 0.0, 0.0, true) == 0.0);
    // dt -> 0 with positive distances: probability -> 1, monotone in 1/dt
    double prev = 0.0;
    for (double dt : {1.0, 0.5, 0.1, 0.01}) {
        const double p = nocross_prob_step(0.5, 0.5, dt, 0.0, 0.0, true);
        CHECK(p >= prev);
        prev = p;
    }
    CHECK(prev > 0.999);
    // side below mirrors side above
    CHECK(nocross_prob_step(-1.0, -1.0, 1.0, 0.0, 0.0, false) ==
          doctest::Approx(1.0 - std::exp(-2.0)));

    // Reduced-size live oracle: simulate the inner bridge on a fine grid and
    // count node-level crossings of the zero line.
    RngStream rng = RngStream::from_seed(100);
    const TimeGrid fine(0.0, 1.0, 1000);
    const int n = 40000;
    int stayed = 0;
    for (int i = 0; i < n; ++i) {
        const SamplePath w = sample_bridge(rng.substream(static_cast<std::uint64_t>(i)), fine,
                                           1.0, 1.0);
        bool ok = true;
        for (double v : w.values)
            if (v <= 0.0) ok = false;
        stayed += ok ? 1 : 0;
    }
    const double frac = static_cast<double>(stayed) / n;
    const double se = std::sqrt(frac * (1.0 - frac) / n);
    // node-only counting over-estimates survival by O(sqrt(dt))
    const double bias = 2.0 * std::sqrt(fine.dt());
    CHECK(std::fabs(frac - (1.0 - std::exp(-2.0))) <= 3.0 * se + bias);
}

TEST_CASE("rejection acceptance is near 1 on a vacuous corridor") {
    const Corridor k(Curve::constant(-1e6), Curve::constant(1e6));
    const TimeGrid g(0.0, 1.0, 32);
    GenerateConfig cfg;
    cfg.count = 500;
    const auto plan = plan_probe(g, {0.5});
    const WeightedEnsemble e =
        rejection_ensemble(RngStream::from_seed(1), g, Proposal::bridge(0.0, 0.0),
                           CorridorConstraint::two_sided(k, g, 0.0, 0.0, true), cfg, plan);
    CHECK(e.acceptance_rate == doctest::Approx(1.0));
    CHECK(e.count() == 500);
}

TEST_CASE("crossing correction only removes paths (paired seeds)") {
    const Corridor k(Curve::constant(0.0), Curve::constant(1.0));
    const TimeGrid g(0.0, 1.0, 512);
    GenerateConfig cfg;
    cfg.count = 2000;
    const auto plan = plan_probe(g, {0.5});
    const Proposal prop = Proposal::bridge(0.5, 0.5);
    const WeightedEnsemble corrected =
        rejection_ensemble(RngStream::from_seed(2), g, prop,
                           CorridorConstraint::two_sided(k, g, 0.0, 0.0, true), cfg, plan);
    const WeightedEnsemble node_only =
        rejection_ensemble(RngStream::from_seed(2), g, prop,
                           CorridorConstraint::two_sided(k, g, 0.0, 0.0, false), cfg, plan);
    CHECK(corrected.acceptance_rate < node_only.acceptance_rate);
}

TEST_CASE("corridor survival matches a fine-grid oracle") {
    // Bridge 0.5 -> 0.5 staying inside (0, 1). Oracle: finer-grid run with
    // crossing correction; the two estimates agree within combined error.
    const Corridor k(Curve::constant(0.0), Curve::constant(1.0));
    GenerateConfig cfg;
    cfg.count = 20000;
    cfg.exec.workers = ExecPolicy::hardware_workers();
    auto accept_at = [&](int steps, std::uint64_t seed) {
        const TimeGrid g(0.0, 1.0, steps);
        const auto plan = plan_probe(g, {0.5});
        const WeightedEnsemble e =
            rejection_ensemble(RngStream::from_seed(seed), g, Proposal::bridge(0.5, 0.5),
                               CorridorConstraint::two_sided(k, g, 0.0, 0.0, true), cfg, plan);
        return e;
    };
    const WeightedEnsemble coarse = accept_at(128, 3);
    const WeightedEnsemble fine = accept_at(2048, 4);
    const double p1 = coarse.acceptance_rate, p2 = fine.acceptance_rate;
    const double se1 = p1 * coarse.log_survival_se, se2 = p2 * fine.log_survival_se;
    CHECK(std::fabs(p1 - p2) <= 3.0 * std::sqrt(se1 * se1 + se2 * se2) + 0.01);
}

TEST_CASE("widening the margins never lowers the acceptance (paired seeds)") {
    const Corridor k(Curve::constant(0.0), Curve::constant(1.0));
    const TimeGrid g(0.0, 1.0, 128);
    GenerateConfig cfg;
    cfg.count = 3000;
    const auto plan = plan_probe(g, {0.5});
    double prev = 0.0;
    for (double m : {0.0, 0.1, 0.3}) {
        const WeightedEnsemble e =
            rejection_ensemble(RngStream::from_seed(5), g, Proposal::bridge(0.4, 0.6),
                               CorridorConstraint::two_sided(k, g, m, m, true), cfg, plan);
        CHECK(e.acceptance_rate >= prev);
        prev = e.acceptance_rate;
    }
}

TEST_CASE("rejection budget error carries the acceptance rate") {
    const Corridor k(Curve::constant(0.0), Curve::constant(0.05));
    const TimeGrid g(0.0, 1.0, 256);
    GenerateConfig cfg;
    cfg.count = 50;
    cfg.max_attempts = 5;
    const auto plan = plan_probe(g, {0.5});
    CHECK_THROWS_AS(
        rejection_ensemble(RngStream::from_seed(6), g, Proposal::bridge(0.025, 0.025),
                           CorridorConstraint::two_sided(k, g, 0.0, 0.0, true), cfg, plan),
        RejectionBudgetError);
}

TEST_CASE("smc with wide corridor keeps uniform weights and full ESS") {
    const Corridor k(Curve::constant(-1e6), Curve::constant(1e6));
    const TimeGrid g(0.0, 1.0, 64);
    GenerateConfig cfg;
    cfg.count = 512;
    cfg.islands = 2;
    const auto plan = plan_probe(g, {0.5});
    const WeightedEnsemble e =
        smc_ensemble(RngStream::from_seed(7), g, Proposal::bridge(0.0, 0.0),
                     CorridorConstraint::two_sided(k, g, 0.0, 0.0, true), cfg, plan);
    CHECK(e.count() == 1024);
    CHECK(e.ess() == doctest::Approx(1024.0));
    CHECK(std::exp(e.log_survival) == doctest::Approx(1.0));
}

TEST_CASE("smc agrees with rejection on a feasible corridor") {
    const Corridor k(Curve::constant(0.0), Curve::constant(1.0));
    const TimeGrid g(0.0, 1.0, 256);
    const auto plan = plan_probe(g, {0.5});
    const Proposal prop = Proposal::bridge(0.5, 0.5);
    const CorridorConstraint cons = CorridorConstraint::two_sided(k, g, 0.0, 0.0, true);

    GenerateConfig rc;
    rc.count = 20000;
    rc.exec.workers = ExecPolicy::hardware_workers();
    const WeightedEnsemble rej = rejection_ensemble(RngStream::from_seed(8), g, prop, cons, rc, plan);

    GenerateConfig sc;
    sc.count = 4096;
    sc.islands = 8;
    sc.resample_threshold = 0.5;
    sc.exec.workers = ExecPolicy::hardware_workers();
    const WeightedEnsemble smc = smc_ensemble(RngStream::from_seed(9), g, prop, cons, sc, plan);

    // marginal mean at the midpoint
    const int col = plan->col_probe_at(0.5);
    const SnisResult a = snis(rej.log_weights, rej.column(col));
    const SnisResult b = snis(smc.log_weights, smc.column(col));
    CHECK(std::fabs(a.estimate - b.estimate) <=
          3.0 * std::sqrt(a.std_err * a.std_err + b.std_err * b.std_err) + 1e-3);

    // normalizing constant vs rejection acceptance probability
    const double pz = std::exp(smc.log_survival);
    const double pr = rej.acceptance_rate;
    const double se = std::sqrt(std::pow(pz * smc.log_survival_se, 2) +
                                std::pow(pr * rej.log_survival_se, 2));
    CHECK(std::fabs(pz - pr) <= 3.0 * se + 1e-3);
}

TEST_CASE("smc total weight collapse raises a degeneracy error") {
    const Corridor k(Curve::constant(0.0), Curve::constant(0.2));
    const TimeGrid g(0.0, 1.0, 16);
    GenerateConfig cfg;
    cfg.count = 64;
    cfg.islands = 1;
    const auto plan = plan_probe(g, {0.5});
    // proposal pinned far outside the corridor: every particle dies at once
    CHECK_THROWS_AS(smc_ensemble(RngStream::from_seed(10), g, Proposal::bridge(0.1, 5.0),
                                 CorridorConstraint::two_sided(k, g, 0.0, 0.0, true), cfg, plan),
                    DegeneracyError);
}

TEST_CASE("serial and parallel runs are bit-identical") {
    const Corridor k(Curve::constant(0.0), Curve::constant(1.0));
    const TimeGrid g(0.0, 1.0, 128);
    const auto plan = plan_probe(g, {0.25, 0.75}, true);
    const Proposal prop = Proposal::bridge(0.3, 0.8);
    const CorridorConstraint cons = CorridorConstraint::two_sided(k, g, 0.1, 0.1, true);
    for (bool use_smc : {false, true}) {
        WeightedEnsemble a, b;
        GenerateConfig c1;
        c1.count = use_smc ? 256 : 800;
        c1.islands = 4;
        c1.exec.workers = 1;
        GenerateConfig c8 = c1;
        c8.exec.workers = 8;
        if (use_smc) {
            a = smc_ensemble(RngStream::from_seed(11), g, prop, cons, c1, plan);
            b = smc_ensemble(RngStream::from_seed(11), g, prop, cons, c8, plan);
        } else {
            a = rejection_ensemble(RngStream::from_seed(11), g, prop, cons, c1, plan);
            b = rejection_ensemble(RngStream::from_seed(11), g, prop, cons, c8, plan);
        }
        CHECK(a.rows == b.rows);
        CHECK(a.log_weights == b.log_weights);
        CHECK(a.attempts == b.attempts);
    }
}

TEST_CASE("house-moving schedule: containment, endpoints, level trend") {
    const Corridor k(Curve::constant(0.0), Curve::constant(1.0));
    const TimeGrid g(0.0, 1.0, 256);
    EpsilonSchedule sched = EpsilonSchedule::defaults_for(k);
    GenerateConfig cfg;
    cfg.count = 1024;
    cfg.islands = 4;
    cfg.exec.workers = ExecPolicy::hardware_workers();
    RecorderSpec spec;
    spec.endpoint = true;
    spec.running_max = true;
    spec.running_min = true;
    const ScheduleRun run = sample_housemoving(RngStream::from_seed(12), g, k, sched,
                                               SamplerKind::Smc, cfg, spec);
    REQUIRE(run.levels.size() == 5);
    for (const LevelRun& lr : run.levels) {
        const auto& e = lr.ens;
        const int cmax = e.plan->col_running_max(), cmin = e.plan->col_running_min();
        const int cend = e.plan->col_endpoint();
        for (std::size_t i = 0; i < e.count(); ++i) {
            if (!std::isfinite(e.log_weights[i])) continue;
            CHECK(e.row(i, cmax) <= 1.0 + lr.eta_plus + 1e-12);
            CHECK(e.row(i, cmin) >= 0.0 - lr.eta_minus - 1e-12);
            CHECK(e.row(i, cend) == 1.0); // pinned at b exactly
        }
    }
    // KS distances between consecutive levels exist for every probe
    CHECK(run.diag.ks_between_levels.size() == 4);
    for (const auto& row : run.diag.ks_between_levels) CHECK(row.size() == 3);
}

TEST_CASE("interior-interior case degenerates to plain rejection") {
    const Corridor k(Curve::constant(0.0), Curve::constant(1.0));
    const TimeGrid g(0.0, 1.0, 128);
    EpsilonSchedule sched = EpsilonSchedule::defaults_for(k);
    sched.levels = 2;
    GenerateConfig cfg;
    cfg.count = 500;
    RecorderSpec spec;
    spec.endpoint = true;
    BoundaryCase c{BoundaryAnchor::interior(0.4), BoundaryAnchor::interior(0.6)};
    const ScheduleRun run = sample_boundary_case(RngStream::from_seed(13), g, k, c, sched,
                                                 SamplerKind::Rejection, cfg, spec);
    // zero margins at every level; level 0 matches a direct rejection run
    RecorderSpec spec2 = spec;
    for (double q : {0.25, 0.5, 0.75}) spec2.probe_times.push_back(q);
    auto plan = std::make_shared<const RecorderPlan>(spec2, g);
    const WeightedEnsemble direct = rejection_ensemble(
        RngStream::from_seed(13).substream(0), g, Proposal::bridge(0.4, 0.6),
        CorridorConstraint::two_sided(k, g, 0.0, 0.0, true), cfg, plan);
    CHECK(run.levels[0].eta_minus == 0.0);
    CHECK(run.levels[0].ens.rows == direct.rows);
}

TEST_CASE("corridor meander with a huge corridor looks like Brownian motion") {
    const Corridor k(Curve::constant(-1e6), Curve::constant(1e6));
    const TimeGrid g(0.0, 1.0, 128);
    EpsilonSchedule sched;
    sched.epsilon0 = 0.2;
    sched.levels = 2;
    sched.lower_only = true;
    GenerateConfig cfg;
    cfg.count = 4096;
    cfg.islands = 2;
    RecorderSpec spec;
    spec.endpoint = true;
    const ScheduleRun run =
        sample_corridor_meander(RngStream::from_seed(14), g, k, BoundaryAnchor::interior(0.0),
                                sched, SamplerKind::Smc, cfg, spec);
    const auto& e = run.finest().ens;
    std::vector<double> xs = e.column(e.plan->col_endpoint());
    RngStream rng = RngStream::from_seed(15);
    std::vector<double> ys(xs.size());
    for (auto& v : ys) v = rng.normal();
    CHECK(ks_two_sample(xs, ys).p_value > 0.01);
}

TEST_CASE("one-sided corridor meander endpoint approaches the meander law") {
    // lower curve 0, effectively no upper bound, start on the lower curve
    const Corridor k(Curve::constant(0.0), Curve::constant(1e6));
    const TimeGrid g(0.0, 1.0, 256);
    EpsilonSchedule sched;
    sched.epsilon0 = 0.2;
    sched.levels = 5;
    sched.lower_only = true;
    GenerateConfig cfg;
    cfg.count = 8192;
    cfg.islands = 4;
    cfg.exec.workers = ExecPolicy::hardware_workers();
    RecorderSpec spec;
    spec.endpoint = true;
    const ScheduleRun run = sample_corridor_meander(RngStream::from_seed(16), g, k,
                                                    BoundaryAnchor::on_lower(), sched,
                                                    SamplerKind::Smc, cfg, spec);
    const auto& e = run.finest().ens;
    std::vector<double> lw = e.log_weights;
    const SnisResult r = snis(lw, e.column(e.plan->col_endpoint()));
    const double target = std::sqrt(3.141592653589793 / 2.0);
    CHECK(std::fabs(r.estimate - target) <= 3.0 * r.std_err + 0.05);
}

TEST_CASE("bessel-type boundary case matches the BES(3) bridge marginal") {
    // one-sided flat corridor, start on the lower curve, interior end
    const Corridor k(Curve::constant(0.0), Curve::constant(1e6));
    const TimeGrid g(0.0, 1.0, 256);
    EpsilonSchedule sched;
    sched.epsilon0 = 0.2;
    sched.levels = 6;
    GenerateConfig cfg;
    cfg.count = 3000;
    cfg.max_attempts = 1000000;
    cfg.exec.workers = ExecPolicy::hardware_workers();
    RecorderSpec spec;
    BoundaryCase c{BoundaryAnchor::on_lower(), BoundaryAnchor::interior(1.0)};
    const ScheduleRun run = sample_boundary_case(RngStream::from_seed(17), g, k, c, sched,
                                                 SamplerKind::Rejection, cfg, spec);
    const auto& e = run.finest().ens;
    const int col = e.plan->col_probe_at(0.5);
    std::vector<double> xs = e.column(col);
    RngStream rng = RngStream::from_seed(18);
    std::vector<double> ys(xs.size());
    for (std::size_t i = 0; i < ys.size(); ++i)
        ys[i] = sample_bes3_bridge(rng.substream(i), g, 0.0, 1.0).at_time(0.5);
    CHECK(ks_two_sample(xs, ys).p_value > 0.01);
}
