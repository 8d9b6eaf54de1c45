#include "hm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hm/errors.hpp"
#include "hm/samplers.hpp"
#include "hm/stats.hpp"

namespace hm {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Purpose keys for stream derivation: every table consumes a fixed substream
// of the caller's stream, so adding or removing sibling builds cannot shift
// anyone else's randomness.
enum PurposeKey : std::uint64_t {
    kQUp = 1,
    kQDown,
    kPKernel,
    kCConst,
    kTableA,
    kTableB,
    kDenom,
    kMeanderWeight,
    kZtildeMass,
    kMeanderDensity,
    kMeanderPsi,
};

// Fritsch-Carlson monotone cubic slopes.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& v) {
    const std::size_t n = x.size();
    std::vector<double> h(n - 1), d(n - 1), m(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        d[i] = (v[i + 1] - v[i]) / h[i];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (d[i - 1] * d[i] <= 0.0) {
            m[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (s * d0 <= 0.0) return 0.0;
        if (std::fabs(s) > 3.0 * std::fabs(d0)) return 3.0 * d0;
        return s;
    };
    m[0] = end_slope(h[0], h[1], d[0], d[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    return m;
}

ValueSe snis_exp_islands(const WeightedEnsemble& e, const std::vector<double>& exponent) {
    if (e.n_islands <= 1) {
        const LogRatioResult r = snis_log_exp(e.log_weights, exponent);
        const double v = std::exp(r.log_value);
        return {v, v * r.rel_se};
    }
    std::vector<double> per_island;
    for (int b = 0; b < e.n_islands; ++b) {
        std::vector<double> lw, a;
        for (std::size_t i = 0; i < e.count(); ++i) {
            if (e.island_of[i] != b) continue;
            lw.push_back(e.log_weights[i]);
            a.push_back(exponent[i]);
        }
        per_island.push_back(std::exp(snis_log_exp(lw, a).log_value));
    }
    const MeanSe ms = mean_se(per_island);
    return {ms.mean, ms.se};
}

// Unconditional E[exp(exponent + log_weight)] with iid standard errors.
ValueSe mean_exp_weighted(const WeightedEnsemble& e, const std::vector<double>& exponent) {
    std::vector<double> a(e.count());
    for (std::size_t i = 0; i < e.count(); ++i) a[i] = e.log_weights[i] + exponent[i];
    const LogMeanExp r = log_mean_exp(a);
    if (!std::isfinite(r.log_mean))
        throw DegeneracyError("no surviving paths", "kernel estimate");
    const double v = std::exp(r.log_mean);
    return {v, v * r.rel_se};
}

GenerateConfig iid_config(const KernelBuildConfig& cfg, std::size_t count) {
    GenerateConfig g;
    g.count = count;
    g.islands = 1;
    g.resample_threshold = 0.0;
    g.exec = cfg.exec;
    return g;
}

GenerateConfig smc_config(const KernelBuildConfig& cfg) {
    GenerateConfig g;
    g.count = cfg.particles_per_island;
    g.islands = cfg.islands;
    g.resample_threshold = cfg.resample_threshold;
    g.exec = cfg.exec;
    return g;
}

} // namespace

bool KernelTable::in_range(double yq) const {
    return yq >= y.front() - 1e-12 && yq <= y.back() + 1e-12;
}

double KernelTable::interp(double yq) const {
    if (!in_range(yq)) throw DomainError("kernel table queried outside its y-grid");
    yq = std::clamp(yq, y.front(), y.back());
    const auto it = std::upper_bound(y.begin(), y.end(), yq);
    std::size_t i = static_cast<std::size_t>(it - y.begin());
    if (i == 0) i = 1;
    if (i >= y.size()) i = y.size() - 1;
    --i;
    static thread_local std::vector<double> cache_x, cache_v, cache_m;
    if (cache_x != y || cache_v != value) {
        cache_x = y;
        cache_v = value;
        cache_m = pchip_slopes(y, value);
    }
    const double h = y[i + 1] - y[i];
    const double s = (yq - y[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * value[i] + (s3 - 2 * s2 + s) * h * cache_m[i] +
           (-2 * s3 + 3 * s2) * value[i + 1] + (s3 - s2) * h * cache_m[i + 1];
}

double KernelTable::interp_se(double yq) const {
    if (!in_range(yq)) throw DomainError("kernel table queried outside its y-grid");
    yq = std::clamp(yq, y.front(), y.back());
    const auto it = std::upper_bound(y.begin(), y.end(), yq);
    std::size_t i = static_cast<std::size_t>(it - y.begin());
    if (i == 0) i = 1;
    if (i >= y.size()) i = y.size() - 1;
    --i;
    const double s = (yq - y[i]) / (y[i + 1] - y[i]);
    return (1.0 - s) * se[i] + s * se[i + 1];
}

KernelTable KernelTable::constant_one(std::vector<double> ygrid) {
    KernelTable t;
    t.y = std::move(ygrid);
    t.value.assign(t.y.size(), 1.0);
    t.se.assign(t.y.size(), 0.0);
    return t;
}

std::vector<double> kernel_ygrid(const Corridor& k, double t, int n_nodes, double margin_frac) {
    const double lo = k.lower.eval(t), hi = k.upper.eval(t);
    const double m = margin_frac * (hi - lo);
    std::vector<double> y(static_cast<std::size_t>(n_nodes));
    for (int j = 0; j < n_nodes; ++j)
        y[static_cast<std::size_t>(j)] = lo + m + (hi - lo - 2 * m) * j / (n_nodes - 1);
    return y;
}

TimeGrid subgrid(const TimeGrid& g, int i0, int i1) {
    if (i0 < 0 || i1 > g.n_steps || i0 >= i1) throw CompositionError("bad subgrid indices");
    return TimeGrid(g.node(i0), g.node(i1), i1 - i0);
}

namespace {

// One-sided Bessel-representation kernel: common machinery of q_up / q_down.
KernelTable q_kernel_impl(RngStream rng, const Corridor& k, double t,
                          const KernelBuildConfig& cfg, bool up) {
    const int it = cfg.grid.index_of(t);
    if (it <= 0 || it >= cfg.grid.n_steps)
        throw ConfigError("kernel.t", "t must be interior to the corridor domain");
    const TimeGrid grid =
        up ? subgrid(cfg.grid, 0, it) : subgrid(cfg.grid, it, cfg.grid.n_steps);

    // Constraint curve and Cameron-Martin curve of the Bessel representation.
    Curve constraint_curve = up ? (k.upper - k.lower)
                                : (k.upper.reversed(t, k.t2) - k.lower.reversed(t, k.t2));
    Curve zt_curve = up ? k.lower.shifted(-k.lower.eval(k.t1))
                        : (Curve::constant(k.b()) - k.upper.reversed(t, k.t2));

    const double tau = up ? t - k.t1 : k.t2 - t;
    const double base = up ? k.lower.eval(t) : k.upper.eval(t);

    RecorderSpec spec;
    spec.z_tilde_curve = zt_curve;
    auto plan = std::make_shared<const RecorderPlan>(spec, grid);
    const CorridorConstraint constraint =
        CorridorConstraint::below(constraint_curve, grid, 0.0, cfg.crossing_corrected);

    const std::vector<double> ygrid = kernel_ygrid(k, t, cfg.y_nodes);
    KernelTable table;
    table.y.push_back(k.lower.eval(t));
    table.value.push_back(0.0); // exact: the entrance/exit factor vanishes at the walls
    table.se.push_back(0.0);
    for (std::size_t j = 0; j < ygrid.size(); ++j) {
        const double y = ygrid[j];
        const double x = up ? y - base : base - y; // Bessel endpoint distance
        const WeightedEnsemble e =
            smc_ensemble(rng.substream(j + 1), grid, Proposal::bes3_bridge(0.0, x), constraint,
                         iid_config(cfg, cfg.paths_per_node), plan);
        std::vector<double> a(e.count());
        const int zc = plan->col_log_z_tilde();
        for (std::size_t i = 0; i < e.count(); ++i) a[i] = -e.row(i, zc);
        const ValueSe mean = mean_exp_weighted(e, a);
        const double factor = (x / tau) * std::exp(-x * x / (2.0 * tau));
        table.y.push_back(y);
        table.value.push_back(mean.value * factor);
        table.se.push_back(mean.se * factor);
    }
    table.y.push_back(k.upper.eval(t));
    table.value.push_back(0.0);
    table.se.push_back(0.0);
    return table;
}

} // namespace

KernelTable estimate_q_up(RngStream rng, const Corridor& k, double t,
                          const KernelBuildConfig& cfg) {
    return q_kernel_impl(rng.substream(kQUp), k, t, cfg, true);
}

KernelTable estimate_q_down(RngStream rng, const Corridor& k, double t,
                            const KernelBuildConfig& cfg) {
    return q_kernel_impl(rng.substream(kQDown), k, t, cfg, false);
}

DensityEstimate weighted_histogram_density(const std::vector<double>& values,
                                           const std::vector<double>& log_weights,
                                           const std::vector<double>& ygrid, double wall_lo,
                                           double wall_hi, bool normalize) {
    const std::size_t nb = ygrid.size();
    std::vector<double> edges(nb + 1);
    edges[0] = wall_lo;
    for (std::size_t j = 1; j < nb; ++j) edges[j] = 0.5 * (ygrid[j - 1] + ygrid[j]);
    edges[nb] = wall_hi;

    double max_lw = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights) max_lw = std::max(max_lw, lw);
    if (!std::isfinite(max_lw)) throw DegeneracyError("no surviving paths", "histogram");

    std::vector<double> sw(nb, 0.0), sw2(nb, 0.0);
    double tot = 0.0, tot2 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = std::exp(log_weights[i] - max_lw);
        tot += w;
        tot2 += w * w;
        const double v = values[i];
        if (v < edges.front() || v > edges.back()) continue;
        std::size_t j = static_cast<std::size_t>(
            std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
        j = std::min(std::max<std::size_t>(j, 1), nb) - 1;
        sw[j] += w;
        sw2[j] += w * w;
    }

    const double n = static_cast<double>(values.size());
    DensityEstimate out;
    out.y = ygrid;
    out.value.resize(nb);
    out.se.resize(nb);
    if (!normalize) {
        // Sub-density: per-path contribution w * 1_bin / (N * width).
        const double scale = std::exp(max_lw);
        double mass = 0.0, mass_var = 0.0;
        for (std::size_t j = 0; j < nb; ++j) {
            const double width = edges[j + 1] - edges[j];
            const double mean = sw[j] / n;
            const double var = std::max(0.0, sw2[j] / n - mean * mean);
            out.value[j] = scale * mean / width;
            out.se[j] = scale * std::sqrt(var / n) / width;
            mass += scale * mean;
            mass_var += scale * scale * var / n;
        }
        out.mass = mass;
        out.mass_se = std::sqrt(mass_var);
    } else {
        // Self-normalized density; mass is 1 by construction.
        for (std::size_t j = 0; j < nb; ++j) {
            const double width = edges[j + 1] - edges[j];
            const double p = sw[j] / tot;
            out.value[j] = p / width;
            // Delta-method with weighted ESS.
            const double ess = tot * tot / tot2;
            out.se[j] = std::sqrt(std::max(0.0, p * (1.0 - p) / ess)) / width;
        }
        out.mass = 1.0;
        out.mass_se = 0.0;
    }
    return out;
}

KernelTable estimate_p_kernel(RngStream rng, const Corridor& k, double tA, double tB,
                              double y_from, const KernelBuildConfig& cfg) {
    const int i0 = cfg.grid.index_of(tA), i1 = cfg.grid.index_of(tB);
    const TimeGrid grid = subgrid(cfg.grid, i0, i1);
    RecorderSpec spec;
    spec.endpoint = true;
    auto plan = std::make_shared<const RecorderPlan>(spec, grid);
    const CorridorConstraint constraint =
        CorridorConstraint::two_sided(k, grid, 0.0, 0.0, cfg.crossing_corrected);
    const std::size_t n_paths = cfg.paths_per_node * 4; // one histogram feeds a whole row
    const WeightedEnsemble e =
        smc_ensemble(rng.substream(kPKernel), grid, Proposal::brownian(y_from), constraint,
                     iid_config(cfg, n_paths), plan);
    const DensityEstimate hist = weighted_histogram_density(
        e.column(plan->col_endpoint()), e.log_weights, kernel_ygrid(k, tB, cfg.y_nodes),
        k.lower.eval(tB), k.upper.eval(tB), false);

    KernelTable t;
    t.y.push_back(k.lower.eval(tB));
    t.value.push_back(0.0);
    t.se.push_back(0.0);
    for (std::size_t j = 0; j < hist.y.size(); ++j) {
        t.y.push_back(hist.y[j]);
        t.value.push_back(hist.value[j]);
        t.se.push_back(hist.se[j]);
    }
    t.y.push_back(k.upper.eval(tB));
    t.value.push_back(0.0);
    t.se.push_back(0.0);
    return t;
}

KernelTable estimate_p_kernel_to(RngStream rng, const Corridor& k, double tA, double tB,
                                 double y_to, const KernelBuildConfig& cfg) {
    // Brownian corridor survival is reversible: p(y1, y2) on (g-, g+) equals
    // p(y2, y1) on the time-reversed curves.
    const Corridor piece = k.restricted(tA, tB).reversed();
    KernelBuildConfig sub = cfg;
    sub.grid = subgrid(cfg.grid, cfg.grid.index_of(tA), cfg.grid.index_of(tB));
    KernelTable t = estimate_p_kernel(rng, piece, tA, tB, y_to, sub);
    return t;
}

CEstimate estimate_C_constant(RngStream rng, const Corridor& k, const EpsilonSchedule& sched,
                              std::size_t paths_per_level, const KernelBuildConfig& cfg) {
    if (!k.is_housemoving())
        throw ConfigError("corridor", "C constant needs a house-moving corridor (g-(t1)=0)");
    const double b = k.b();
    const TimeGrid& grid = cfg.grid;
    RecorderSpec spec; // only survival weights are needed
    auto plan = std::make_shared<const RecorderPlan>(spec, grid);
    const Proposal prop = Proposal::bridge(k.lower.eval(k.t1), b);

    CEstimate out;
    std::vector<double> ratio, se, eps;
    GenerateConfig gen = smc_config(cfg);
    gen.count = std::max<std::size_t>(64, paths_per_level / static_cast<std::size_t>(gen.islands));
    gen.resample_threshold = 0.0; // iid weighted: islands give the spread
    for (int lev = 0; lev < sched.levels; ++lev) {
        const double em = sched.eta_minus(lev), ep = sched.eta_plus(lev);
        if (!(em > 0.0 && ep > 0.0))
            throw ConfigError("schedule", "C constant needs two-sided positive margins");
        const CorridorConstraint constraint =
            CorridorConstraint::two_sided(k, grid, em, ep, cfg.crossing_corrected);
        const WeightedEnsemble e =
            smc_ensemble(rng.substream(kCConst).substream(static_cast<std::uint64_t>(lev)), grid,
                         prop, constraint, gen, plan);
        const double p = std::exp(e.log_survival);
        if (!(p > 0.0))
            throw DegeneracyError("corridor probability vanished at the finest level",
                                  "C constant");
        eps.push_back(sched.epsilon(lev));
        ratio.push_back(p / (em * ep));
        se.push_back(p * e.log_survival_se / (em * ep));
    }
    const LineFit fit = weighted_line_fit(eps, ratio, se);
    const double scale = 0.5 * kPi * gaussian_density(1.0, b);
    out.value = scale * fit.intercept;
    out.se = scale * fit.intercept_se;
    out.eps = std::move(eps);
    out.ratio = std::move(ratio);
    out.ratio_se = std::move(se);
    if (!(out.value > 0.0)) throw NumericError("C constant extrapolated non-positive");
    return out;
}

namespace {

// Trapezoid mass with independent node SEs plus the shared-scale part.
void finish_mass(DensityEstimate& h) {
    double mass = 0.0, var = 0.0;
    for (std::size_t j = 0; j + 1 < h.y.size(); ++j) {
        const double w = 0.5 * (h.y[j + 1] - h.y[j]);
        mass += w * (h.value[j] + h.value[j + 1]);
        var += w * w * (h.se[j] * h.se[j] + h.se[j + 1] * h.se[j + 1]);
    }
    h.mass = mass;
    h.mass_se = std::sqrt(var + mass * mass * h.rel_scale * h.rel_scale);
}

} // namespace

DensityEstimate compose_h_marginal(const Corridor& k, double t, const CEstimate& C,
                                   const KernelTable& q_up, const KernelTable& q_down) {
    if (q_up.y != q_down.y) throw CompositionError("q tables live on different y-grids");
    const double f = 1.0 / (C.value * std::sqrt(t - k.t1) * std::sqrt(k.t2 - t));
    DensityEstimate h;
    h.y = q_up.y;
    h.value.resize(h.y.size());
    h.se.resize(h.y.size());
    h.rel_scale = C.se / C.value;
    for (std::size_t j = 0; j < h.y.size(); ++j) {
        h.value[j] = f * q_up.value[j] * q_down.value[j];
        const double r1 = q_up.value[j] > 0.0 ? q_up.se[j] / q_up.value[j] : 0.0;
        const double r2 = q_down.value[j] > 0.0 ? q_down.se[j] / q_down.value[j] : 0.0;
        h.se[j] = h.value[j] * std::sqrt(r1 * r1 + r2 * r2);
    }
    finish_mass(h);
    return h;
}

DensityEstimate compose_h_transition(const Corridor& k, double tA, double tB,
                                     const KernelTable& p_from, const KernelTable& q_down_tB,
                                     ValueSe q_down_at_start) {
    if (p_from.y != q_down_tB.y) throw CompositionError("p and q tables on different y-grids");
    const double f = std::sqrt((k.t2 - tA) / (k.t2 - tB)) / q_down_at_start.value;
    DensityEstimate h;
    h.y = p_from.y;
    h.value.resize(h.y.size());
    h.se.resize(h.y.size());
    h.rel_scale = q_down_at_start.se / q_down_at_start.value;
    for (std::size_t j = 0; j < h.y.size(); ++j) {
        h.value[j] = f * p_from.value[j] * q_down_tB.value[j];
        const double r1 = p_from.value[j] > 0.0 ? p_from.se[j] / p_from.value[j] : 0.0;
        const double r2 = q_down_tB.value[j] > 0.0 ? q_down_tB.se[j] / q_down_tB.value[j] : 0.0;
        h.se[j] = h.value[j] * std::sqrt(r1 * r1 + r2 * r2);
    }
    finish_mass(h);
    return h;
}

ValueSe estimate_piece_weight(RngStream rng, const DriftModel& d, const Corridor& k,
                              const TimeGrid& piece_grid, const BoundaryAnchor& start,
                              const BoundaryAnchor& end, const KernelBuildConfig& cfg) {
    if (d.is_zero()) return {1.0, 0.0};
    const Corridor piece = k.restricted(piece_grid.t_start, piece_grid.t_end);
    const BoundaryCase c{start, end};
    const Proposal prop = proposal_for(piece, c);

    RecorderSpec spec;
    spec.n_drift = d;
    auto plan = std::make_shared<const RecorderPlan>(spec, piece_grid);

    WeightedEnsemble e;
    if (c.needs_schedule()) {
        const int lev = cfg.schedule.levels - 1;
        const CorridorConstraint constraint = CorridorConstraint::two_sided(
            piece, piece_grid, cfg.schedule.eta_minus(lev), cfg.schedule.eta_plus(lev),
            cfg.crossing_corrected);
        e = smc_ensemble(rng, piece_grid, prop, constraint, smc_config(cfg), plan);
    } else {
        const CorridorConstraint constraint =
            CorridorConstraint::two_sided(piece, piece_grid, 0.0, 0.0, cfg.crossing_corrected);
        e = smc_ensemble(rng, piece_grid, prop, constraint,
                         iid_config(cfg, cfg.paths_per_node), plan);
    }
    std::vector<double> a(e.count());
    const int nc = plan->col_n_integral();
    for (std::size_t i = 0; i < e.count(); ++i) a[i] = -0.5 * e.row(i, nc);
    return snis_exp_islands(e, a);
}

KernelTable estimate_piece_weight_table(RngStream rng, const DriftModel& d, const Corridor& k,
                                        const TimeGrid& piece_grid, bool vary_start,
                                        const BoundaryAnchor& fixed,
                                        const std::vector<double>& ygrid,
                                        const KernelBuildConfig& cfg) {
    KernelTable t;
    t.y = ygrid;
    t.value.resize(ygrid.size());
    t.se.resize(ygrid.size());
    const double t_vary = vary_start ? piece_grid.t_start : piece_grid.t_end;
    const double wall_lo = k.lower.eval(t_vary), wall_hi = k.upper.eval(t_vary);
    for (std::size_t j = 0; j < ygrid.size(); ++j) {
        BoundaryAnchor a = BoundaryAnchor::interior(ygrid[j]);
        if (std::fabs(ygrid[j] - wall_lo) < 1e-12) a = BoundaryAnchor::on_lower();
        if (std::fabs(ygrid[j] - wall_hi) < 1e-12) a = BoundaryAnchor::on_upper();
        const ValueSe v = estimate_piece_weight(rng.substream(j + 1), d, k, piece_grid,
                                                vary_start ? a : fixed, vary_start ? fixed : a,
                                                cfg);
        t.value[j] = v.value;
        t.se[j] = v.se;
    }
    return t;
}

ValueSe estimate_housemoving_weight(RngStream rng, const DriftModel& d, const Corridor& k,
                                    const KernelBuildConfig& cfg) {
    if (d.is_zero()) return {1.0, 0.0};
    const BoundaryAnchor lo = BoundaryAnchor::on_lower(), hi = BoundaryAnchor::on_upper();
    return estimate_piece_weight(rng.substream(kDenom), d, k, cfg.grid, lo, hi, cfg);
}

DensityEstimate apply_zeta(const DensityEstimate& h, const KernelTable& A, const KernelTable& B,
                           ValueSe D) {
    DensityEstimate out = h;
    const double rel_D = D.se / D.value;
    out.rel_scale = std::sqrt(h.rel_scale * h.rel_scale + rel_D * rel_D);
    for (std::size_t j = 0; j < h.y.size(); ++j) {
        const double a = A.interp(h.y[j]);
        const double b = B.interp(h.y[j]);
        const double zeta = a * b / D.value;
        out.value[j] = h.value[j] * zeta;
        const double r_h = h.value[j] > 0.0 ? h.se[j] / h.value[j] : 0.0;
        const double r_a = a > 0.0 ? A.interp_se(h.y[j]) / a : 0.0;
        const double r_b = b > 0.0 ? B.interp_se(h.y[j]) / b : 0.0;
        out.se[j] = out.value[j] * std::sqrt(r_h * r_h + r_a * r_a + r_b * r_b);
    }
    finish_mass(out);
    return out;
}

HmuMarginal build_hmu_marginal(RngStream rng, const DriftModel& d, const Corridor& k, double t,
                               const KernelBuildConfig& cfg) {
    HmuMarginal m;
    m.t = t;
    m.q_up = estimate_q_up(rng, k, t, cfg);
    m.q_down = estimate_q_down(rng, k, t, cfg);
    m.C = estimate_C_constant(rng.substream(kCConst), k, cfg.schedule,
                              cfg.paths_per_node * static_cast<std::size_t>(cfg.y_nodes) / 8,
                              cfg);
    m.h = compose_h_marginal(k, t, m.C, m.q_up, m.q_down);

    if (d.is_zero()) {
        m.A = KernelTable::constant_one(m.h.y);
        m.B = KernelTable::constant_one(m.h.y);
        m.D = {1.0, 0.0};
    } else {
        const int it = cfg.grid.index_of(t);
        m.A = estimate_piece_weight_table(rng.substream(kTableA), d, k,
                                          subgrid(cfg.grid, 0, it), false,
                                          BoundaryAnchor::on_lower(), m.h.y, cfg);
        m.B = estimate_piece_weight_table(rng.substream(kTableB), d, k,
                                          subgrid(cfg.grid, it, cfg.grid.n_steps), true,
                                          BoundaryAnchor::on_upper(), m.h.y, cfg);
        m.D = estimate_housemoving_weight(rng, d, k, cfg);
    }
    m.h_mu = apply_zeta(m.h, m.A, m.B, m.D);
    return m;
}

MeanderMarginal build_meander_marginal(RngStream rng, const DriftModel& d, const Corridor& k,
                                       double t, double T, const KernelBuildConfig& cfg) {
    const int iT = cfg.grid.index_of(T);
    const int it = cfg.grid.index_of(t);
    if (!(it > 0 && it < iT)) throw ConfigError("meander.t", "need t interior to [t1, T]");
    const TimeGrid grid = subgrid(cfg.grid, 0, iT);
    const Corridor kd = k.restricted(k.t1, T);

    // Corridor meander ensemble at the finest margins (lower-only widening).
    EpsilonSchedule sched = cfg.schedule;
    sched.lower_only = true;
    const int lev = sched.levels - 1;
    RecorderSpec spec;
    spec.probe_times = {grid.node(it)};
    spec.endpoint = true;
    if (!d.is_zero()) spec.n_drift = d;
    auto plan = std::make_shared<const RecorderPlan>(spec, grid);
    const CorridorConstraint constraint = CorridorConstraint::two_sided(
        kd, grid, sched.eta_minus(lev), sched.eta_plus(lev), cfg.crossing_corrected);
    const WeightedEnsemble e =
        smc_ensemble(rng.substream(kMeanderDensity), grid, Proposal::brownian(kd.lower.eval(kd.t1)),
                     constraint, smc_config(cfg), plan);

    MeanderMarginal out;
    out.t = t;
    const int probe_col = plan->col_probe_at(grid.node(it));
    out.k_density = weighted_histogram_density(e.column(probe_col), e.log_weights,
                                               kernel_ygrid(kd, t, cfg.y_nodes),
                                               kd.lower.eval(t), kd.upper.eval(t), true);

    if (d.is_zero()) {
        out.k_mu = out.k_density;
        return out;
    }

    // psi(t,y): pinned piece weight [t1,t] times the meander-from-y factor
    // e^{G(w(T))} e^{-N/2} over [t,T], divided by the full-meander factor.
    KernelTable A = estimate_piece_weight_table(rng.substream(kTableA), d, kd,
                                                subgrid(cfg.grid, 0, it), false,
                                                BoundaryAnchor::on_lower(), out.k_density.y, cfg);

    const TimeGrid tail = subgrid(cfg.grid, it, iT);
    RecorderSpec tail_spec;
    tail_spec.endpoint = true;
    tail_spec.n_drift = d;
    auto tail_plan = std::make_shared<const RecorderPlan>(tail_spec, tail);
    const CorridorConstraint tail_free =
        CorridorConstraint::two_sided(kd.restricted(t, T), tail, 0.0, 0.0,
                                      cfg.crossing_corrected);
    KernelTable Bm;
    Bm.y = out.k_density.y;
    Bm.value.resize(Bm.y.size());
    Bm.se.resize(Bm.y.size());
    RngStream psi_rng = rng.substream(kMeanderPsi);
    for (std::size_t j = 0; j < Bm.y.size(); ++j) {
        const WeightedEnsemble te =
            smc_ensemble(psi_rng.substream(j + 1), tail, Proposal::brownian(Bm.y[j]), tail_free,
                         iid_config(cfg, cfg.paths_per_node), tail_plan);
        std::vector<double> a(te.count());
        for (std::size_t i = 0; i < te.count(); ++i)
            a[i] = d.G(te.row(i, tail_plan->col_endpoint())) -
                   0.5 * te.row(i, tail_plan->col_n_integral());
        const ValueSe v = snis_exp_islands(te, a);
        Bm.value[j] = v.value;
        Bm.se[j] = v.se;
    }

    // Full-meander denominator over the same conditioned ensemble.
    std::vector<double> a_full(e.count());
    for (std::size_t i = 0; i < e.count(); ++i)
        a_full[i] = d.G(e.row(i, plan->col_endpoint())) - 0.5 * e.row(i, plan->col_n_integral());
    const ValueSe Dm = snis_exp_islands(e, a_full);

    out.k_mu = apply_zeta(out.k_density, A, Bm, Dm);
    return out;
}

RnTables build_rn_tables(RngStream rng, const DriftModel& d, const Corridor& k, double t,
                         const KernelBuildConfig& cfg) {
    RnTables tb;
    tb.t = t;
    tb.q_down_t = estimate_q_down(rng, k, t, cfg);
    tb.C = estimate_C_constant(rng.substream(kCConst), k, cfg.schedule,
                               cfg.paths_per_node * static_cast<std::size_t>(cfg.y_nodes) / 8,
                               cfg);
    const int it = cfg.grid.index_of(t);
    if (d.is_zero()) {
        tb.B_t = KernelTable::constant_one(tb.q_down_t.y);
        tb.D = {1.0, 0.0};
    } else {
        tb.B_t = estimate_piece_weight_table(rng.substream(kTableB), d, k,
                                             subgrid(cfg.grid, it, cfg.grid.n_steps), true,
                                             BoundaryAnchor::on_upper(), tb.q_down_t.y, cfg);
        tb.D = estimate_housemoving_weight(rng, d, k, cfg);
    }

    // Meander-route factors on [t1, t].
    const TimeGrid head = subgrid(cfg.grid, 0, it);
    const Corridor kh = k.restricted(k.t1, t);
    {
        EpsilonSchedule sched = cfg.schedule;
        sched.lower_only = true;
        const int lev = sched.levels - 1;
        RecorderSpec spec;
        spec.endpoint = true;
        if (!d.is_zero()) spec.n_drift = d;
        auto plan = std::make_shared<const RecorderPlan>(spec, head);
        const CorridorConstraint constraint = CorridorConstraint::two_sided(
            kh, head, sched.eta_minus(lev), sched.eta_plus(lev), cfg.crossing_corrected);
        const WeightedEnsemble e = smc_ensemble(rng.substream(kMeanderWeight), head,
                                                Proposal::brownian(kh.lower.eval(kh.t1)),
                                                constraint, smc_config(cfg), plan);
        std::vector<double> a(e.count());
        for (std::size_t i = 0; i < e.count(); ++i) {
            const double end = e.row(i, plan->col_endpoint());
            a[i] = (d.is_zero() ? 0.0 : d.G(end)) -
                   (d.is_zero() ? 0.0 : 0.5 * e.row(i, plan->col_n_integral()));
        }
        tb.meander_weight = d.is_zero() ? ValueSe{1.0, 0.0} : snis_exp_islands(e, a);
    }
    {
        // Plain meander against the width curve: E[Ztilde^{-1} 1] and P(1).
        RecorderSpec spec;
        spec.z_tilde_curve = k.lower;
        auto plan = std::make_shared<const RecorderPlan>(spec, head);
        const CorridorConstraint constraint = CorridorConstraint::below(
            k.upper - k.lower, head, 0.0, cfg.crossing_corrected);
        const WeightedEnsemble e =
            smc_ensemble(rng.substream(kZtildeMass), head, Proposal::meander(), constraint,
                         iid_config(cfg, cfg.paths_per_node * 4), plan);
        std::vector<double> a(e.count()), zero(e.count(), 0.0);
        const int zc = plan->col_log_z_tilde();
        for (std::size_t i = 0; i < e.count(); ++i) a[i] = -e.row(i, zc);
        tb.ztilde_inv_mass = mean_exp_weighted(e, a);
        tb.meander_surv = mean_exp_weighted(e, zero);
    }
    return tb;
}

namespace {

double rel_or_zero(double se, double v) { return v > 0.0 ? se / v : 0.0; }

} // namespace

RnValue rn_cor3(const DriftModel& d, const Corridor& k, const RnTables& tb, const SamplePath& w) {
    RnValue out;
    const double t = w.grid.t_end;
    if (std::fabs(t - tb.t) > 1e-9) throw CompositionError("path horizon does not match tables");
    const double dist = w.back() - k.lower.eval(t);
    if (dist <= 0.0) {
        out.singular = true;
        out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    // Indicator of staying below the upper curve on [0,t].
    for (int i = 0; i < w.grid.n_nodes(); ++i)
        if (w[i] > k.upper.eval(w.grid.node(i))) {
            out.zero = true;
            return out;
        }
    if (!tb.q_down_t.in_range(w.back())) {
        out.singular = true;
        return out;
    }
    const double qd = tb.q_down_t.interp(w.back());
    const double B = tb.B_t.interp(w.back());
    if (!(qd > 0.0) || !(B > 0.0)) {
        out.zero = true;
        return out;
    }
    const double logv = 0.5 * std::log(kPi / 2.0) + std::log(qd) - std::log(tb.C.value) -
                        0.5 * std::log(k.t2 - t) - std::log(dist) -
                        log_cameron_martin_Z(k.lower, w) + std::log(B) -
                        std::log(tb.D.value) - 0.5 * eval_N(d, w);
    out.log_value = logv;
    out.value = std::exp(logv);
    const double r1 = rel_or_zero(tb.q_down_t.interp_se(w.back()), qd);
    const double r2 = tb.C.se / tb.C.value;
    const double r3 = rel_or_zero(tb.B_t.interp_se(w.back()), B);
    const double r4 = tb.D.se / std::max(tb.D.value, 1e-300);
    out.rel_se = std::sqrt(r1 * r1 + r2 * r2 + r3 * r3 + r4 * r4);
    return out;
}

RnValue rn_hm_mea(const DriftModel& d, const Corridor& k, const RnTables& tb,
                  const SamplePath& w) {
    RnValue out;
    const double t = w.grid.t_end;
    if (std::fabs(t - tb.t) > 1e-9) throw CompositionError("path horizon does not match tables");
    if (!tb.q_down_t.in_range(w.back())) {
        out.singular = true;
        return out;
    }
    const double qd = tb.q_down_t.interp(w.back());
    const double B = tb.B_t.interp(w.back());
    if (!(qd > 0.0) || !(B > 0.0)) {
        out.zero = true;
        return out;
    }
    const double logv = -d.G(w.back()) + std::log(tb.meander_weight.value) + std::log(B) -
                        std::log(tb.D.value) + std::log(tb.ztilde_inv_mass.value) +
                        std::log(qd) - std::log(tb.C.value) - 0.5 * std::log(t - k.t1) -
                        0.5 * std::log(k.t2 - t);
    out.log_value = logv;
    out.value = std::exp(logv);
    const double rs[] = {rel_or_zero(tb.q_down_t.interp_se(w.back()), qd),
                         tb.C.se / tb.C.value, rel_or_zero(tb.B_t.interp_se(w.back()), B),
                         tb.D.se / std::max(tb.D.value, 1e-300),
                         tb.meander_weight.se / std::max(tb.meander_weight.value, 1e-300),
                         tb.ztilde_inv_mass.se / std::max(tb.ztilde_inv_mass.value, 1e-300)};
    double s = 0.0;
    for (double r : rs) s += r * r;
    out.rel_se = std::sqrt(s);
    return out;
}

RnValue rn_chain(const DriftModel& d, const Corridor& k, const RnTables& tb,
                 const SamplePath& w) {
    RnValue out = rn_hm_mea(d, k, tb, w);
    if (out.singular || out.zero) return out;
    const double t = w.grid.t_end;
    const double dist = w.back() - k.lower.eval(t);
    if (dist <= 0.0) {
        out.singular = true;
        out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    for (int i = 0; i < w.grid.n_nodes(); ++i)
        if (w[i] > k.upper.eval(w.grid.node(i))) {
            out.zero = true;
            out.value = 0.0;
            return out;
        }
    // Meander-against-Bessel factor; the Imhof term sqrt(pi t / 2)/(w(t)-g-).
    const double log_factor = d.G(w.back()) - 0.5 * eval_N(d, w) -
                              log_cameron_martin_Z(k.lower, w) +
                              0.5 * std::log(0.5 * kPi * (t - k.t1)) - std::log(dist) -
                              std::log(tb.meander_weight.value) -
                              std::log(tb.ztilde_inv_mass.value);
    out.log_value += log_factor;
    out.value = std::exp(out.log_value);
    // The meander factors cancel between the two links of the chain; the
    // residual uncertainty matches the direct Bessel-route evaluator.
    const double rs[] = {rel_or_zero(tb.q_down_t.interp_se(w.back()), tb.q_down_t.interp(w.back())),
                         tb.C.se / tb.C.value,
                         rel_or_zero(tb.B_t.interp_se(w.back()), tb.B_t.interp(w.back())),
                         tb.D.se / std::max(tb.D.value, 1e-300)};
    double s = 0.0;
    for (double r : rs) s += r * r;
    out.rel_se = std::sqrt(s);
    return out;
}

} // namespace hm
