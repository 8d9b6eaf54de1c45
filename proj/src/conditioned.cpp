#include "hm/conditioned.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "hm/errors.hpp"
#include "hm/stats.hpp"

namespace hm {

double nocross_prob_step(double x, double y, double dt, double level_start, double level_end,
                         bool side_above) {
    const double d0 = side_above ? x - level_start : level_start - x;
    const double d1 = side_above ? y - level_end : level_end - y;
    if (d0 <= 0.0 || d1 <= 0.0) return 0.0;
    return 1.0 - std::exp(-2.0 * d0 * d1 / dt);
}

CorridorConstraint CorridorConstraint::two_sided(const Corridor& k, const TimeGrid& grid,
                                                 double margin_lower, double margin_upper,
                                                 bool crossing_corrected) {
    CorridorConstraint c;
    c.dt_ = grid.dt();
    c.crossing_corrected_ = crossing_corrected;
    c.lo_ = k.lower.sample(grid, 0);
    for (double& v : c.lo_) v -= margin_lower;
    c.hi_ = k.upper.sample(grid, 0);
    for (double& v : c.hi_) v += margin_upper;
    return c;
}

CorridorConstraint CorridorConstraint::below(const Curve& upper, const TimeGrid& grid,
                                             double margin, bool crossing_corrected) {
    CorridorConstraint c;
    c.dt_ = grid.dt();
    c.crossing_corrected_ = crossing_corrected;
    c.hi_ = upper.sample(grid, 0);
    for (double& v : c.hi_) v += margin;
    return c;
}

CorridorConstraint CorridorConstraint::above(const Curve& lower, const TimeGrid& grid,
                                             double margin, bool crossing_corrected) {
    CorridorConstraint c;
    c.dt_ = grid.dt();
    c.crossing_corrected_ = crossing_corrected;
    c.lo_ = lower.sample(grid, 0);
    for (double& v : c.lo_) v -= margin;
    return c;
}

CorridorConstraint CorridorConstraint::none(const TimeGrid& grid) {
    CorridorConstraint c;
    c.dt_ = grid.dt();
    return c;
}

bool CorridorConstraint::node_ok(int i, double x) const {
    const std::size_t u = static_cast<std::size_t>(i);
    if (!lo_.empty() && x < lo_[u]) return false;
    if (!hi_.empty() && x > hi_[u]) return false;
    return true;
}

double CorridorConstraint::step_survival(int i, double x_from, double x_to) const {
    if (!node_ok(i + 1, x_to)) return 0.0;
    if (!crossing_corrected_) return 1.0;
    const std::size_t u = static_cast<std::size_t>(i);
    double p = 1.0;
    if (!lo_.empty()) p *= nocross_prob_step(x_from, x_to, dt_, lo_[u], lo_[u + 1], true);
    if (!hi_.empty()) p *= nocross_prob_step(x_from, x_to, dt_, hi_[u], hi_[u + 1], false);
    return p;
}

// ---------------------------------------------------------------------------
// Proposals
// ---------------------------------------------------------------------------

Proposal Proposal::bridge(double a, double b) {
    Proposal p;
    p.kind_ = Kind::Bridge;
    p.a_ = a;
    p.b_ = b;
    return p;
}
Proposal Proposal::brownian(double a) {
    Proposal p;
    p.kind_ = Kind::Brownian;
    p.a_ = a;
    return p;
}
Proposal Proposal::bes3_bridge(double c, double d) {
    if (c < 0.0 || d < 0.0) throw DomainError("BES(3) bridge endpoints must be >= 0");
    Proposal p;
    p.kind_ = Kind::Bes3Bridge;
    p.a_ = c;
    p.b_ = d;
    return p;
}
Proposal Proposal::meander() {
    Proposal p;
    p.kind_ = Kind::Meander;
    return p;
}
Proposal Proposal::diffusion(DriftModel d, double a) {
    Proposal p;
    p.kind_ = Kind::Diffusion;
    p.a_ = a;
    p.drift_ = std::move(d);
    return p;
}

int Proposal::state_size() const {
    switch (kind_) {
        case Kind::Bridge:
        case Kind::Brownian:
        case Kind::Diffusion: return 1;
        case Kind::Bes3Bridge: return 3;
        case Kind::Meander: return 4; // 3 coordinates + drawn endpoint
    }
    return 1;
}

double Proposal::start(const TimeGrid& grid, RngStream& rng, double* st) const {
    switch (kind_) {
        case Kind::Bridge:
        case Kind::Brownian:
        case Kind::Diffusion: st[0] = a_; return a_;
        case Kind::Bes3Bridge:
            st[0] = a_;
            st[1] = 0.0;
            st[2] = 0.0;
            return a_;
        case Kind::Meander:
            st[0] = st[1] = st[2] = 0.0;
            st[3] = std::sqrt(grid.t_end - grid.t_start) * rng.rayleigh();
            return 0.0;
    }
    return 0.0;
}

namespace {
inline double bridge_step(double x, double target, double dt, double tau, RngStream& rng) {
    if (tau <= dt * (1.0 + 1e-12)) return target; // final step pins the endpoint
    const double mean = x + (target - x) * dt / tau;
    const double var = dt * (tau - dt) / tau;
    return mean + std::sqrt(var) * rng.normal();
}
} // namespace

double Proposal::step(const TimeGrid& grid, int i, RngStream& rng, double* st) const {
    const double dt = grid.dt();
    switch (kind_) {
        case Kind::Brownian: st[0] += std::sqrt(dt) * rng.normal(); return st[0];
        case Kind::Diffusion:
            st[0] += drift_.mu(st[0]) * dt + std::sqrt(dt) * rng.normal();
            if (!std::isfinite(st[0]))
                throw NumericError("diffusion state became non-finite at step " +
                                   std::to_string(i + 1));
            return st[0];
        case Kind::Bridge: {
            const double tau = grid.t_end - grid.node(i);
            st[0] = bridge_step(st[0], b_, dt, tau, rng);
            return st[0];
        }
        case Kind::Bes3Bridge:
        case Kind::Meander: {
            const double tau = grid.t_end - grid.node(i);
            const double target = kind_ == Kind::Bes3Bridge ? b_ : st[3];
            st[0] = bridge_step(st[0], target, dt, tau, rng);
            st[1] = bridge_step(st[1], 0.0, dt, tau, rng);
            st[2] = bridge_step(st[2], 0.0, dt, tau, rng);
            return std::sqrt(st[0] * st[0] + st[1] * st[1] + st[2] * st[2]);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Rejection
// ---------------------------------------------------------------------------

namespace {
constexpr std::uint64_t kStartKey = 0x53544152ULL;    // per-slot start stream tag
constexpr std::uint64_t kResampleKey = 0x52534D504CULL; // island resample stream tag
}

WeightedEnsemble rejection_ensemble(RngStream rng, const TimeGrid& grid, const Proposal& prop,
                                    const CorridorConstraint& constraint,
                                    const GenerateConfig& cfg,
                                    std::shared_ptr<const RecorderPlan> plan) {
    const std::size_t n = cfg.count;
    const int ncol = plan->n_columns();
    WeightedEnsemble out;
    out.plan = plan;
    out.rows.resize(n * static_cast<std::size_t>(ncol));
    out.log_weights.assign(n, 0.0);
    const bool store = plan->spec().store_path;
    const std::size_t n_nodes = static_cast<std::size_t>(grid.n_nodes());
    if (store) {
        out.path_matrix.resize(n * n_nodes);
        out.has_paths = true;
    }

    std::vector<std::uint64_t> attempts_used(n, 0);
    std::vector<char> failed(n, 0);

    parallel_for(n, cfg.exec, [&](std::size_t slot) {
        RngStream slot_rng = rng.substream(slot);
        PathRecorder rec(plan.get());
        double st[4];
        for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
            RngStream arng = slot_rng.substream(static_cast<std::uint64_t>(attempt));
            RngStream srng = arng.substream(kStartKey);
            double x = prop.start(grid, srng, st);
            if (!constraint.node_ok(0, x)) continue;
            rec.restart(x);
            bool ok = true;
            for (int i = 0; i < grid.n_steps; ++i) {
                RngStream step_rng = arng.substream(static_cast<std::uint64_t>(i) + 1);
                const double next = prop.step(grid, i, step_rng, st);
                const double p = constraint.step_survival(i, x, next);
                if (p <= 0.0 || (constraint.crossing_corrected() && p < 1.0 &&
                                 step_rng.uniform() >= p)) {
                    ok = false;
                    break;
                }
                rec.step(next);
                x = next;
            }
            if (ok) {
                attempts_used[slot] = static_cast<std::uint64_t>(attempt) + 1;
                rec.finish(&out.rows[slot * static_cast<std::size_t>(ncol)]);
                if (store)
                    std::copy(rec.path().begin(), rec.path().end(),
                              out.path_matrix.begin() + static_cast<std::ptrdiff_t>(slot * n_nodes));
                return;
            }
        }
        failed[slot] = 1;
        attempts_used[slot] = static_cast<std::uint64_t>(cfg.max_attempts);
    });

    std::uint64_t total_attempts = 0;
    std::size_t n_failed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total_attempts += attempts_used[i];
        n_failed += failed[i] ? 1u : 0u;
    }
    out.attempts = total_attempts;
    out.acceptance_rate =
        static_cast<double>(n - n_failed) / static_cast<double>(std::max<std::uint64_t>(1, total_attempts));
    if (n_failed > 0)
        throw RejectionBudgetError("rejection sampler exhausted its attempt budget",
                                   out.acceptance_rate);
    // Acceptance probability and its binomial standard error.
    out.log_survival = std::log(out.acceptance_rate);
    const double p = out.acceptance_rate;
    out.log_survival_se =
        std::sqrt((1.0 - p) / (p * static_cast<double>(std::max<std::uint64_t>(1, total_attempts))));
    return out;
}

// ---------------------------------------------------------------------------
// SMC
// ---------------------------------------------------------------------------

namespace {

// Systematic resampling: one uniform spawns M ordered positions.
void systematic_resample(std::span<const double> w_norm, double u0, std::vector<int>& ancestor) {
    const std::size_t m = w_norm.size();
    ancestor.resize(m);
    double cum = w_norm[0];
    std::size_t j = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double u = (static_cast<double>(i) + u0) / static_cast<double>(m);
        while (u > cum && j + 1 < m) cum += w_norm[++j];
        ancestor[i] = static_cast<int>(j);
    }
}

} // namespace

WeightedEnsemble smc_ensemble(RngStream rng, const TimeGrid& grid, const Proposal& prop,
                              const CorridorConstraint& constraint, const GenerateConfig& cfg,
                              std::shared_ptr<const RecorderPlan> plan) {
    const int islands = std::max(1, cfg.islands);
    const std::size_t m = cfg.count; // particles per island
    if (m < 2) throw ConfigError("smc.particles", "need at least 2 particles");
    const int ncol = plan->n_columns();
    const bool store = plan->spec().store_path;
    const std::size_t n_nodes = static_cast<std::size_t>(grid.n_nodes());

    WeightedEnsemble out;
    out.plan = plan;
    out.n_islands = islands;
    out.rows.resize(static_cast<std::size_t>(islands) * m * static_cast<std::size_t>(ncol));
    out.log_weights.assign(static_cast<std::size_t>(islands) * m, 0.0);
    out.island_of.resize(static_cast<std::size_t>(islands) * m);
    if (store) {
        out.path_matrix.resize(static_cast<std::size_t>(islands) * m * n_nodes);
        out.has_paths = true;
    }

    std::vector<double> island_logz(static_cast<std::size_t>(islands), 0.0);
    const int sdim = prop.state_size();

    for (int b = 0; b < islands; ++b) {
        RngStream island_rng = rng.substream(static_cast<std::uint64_t>(b) + 1);
        std::vector<double> x(m), lw(m, 0.0);
        std::vector<double> st(m * static_cast<std::size_t>(sdim));
        std::vector<PathRecorder> recs(m, PathRecorder(plan.get()));
        std::vector<PathRecorder> recs_tmp;
        // Full value history + genealogy, only when paths are requested.
        std::vector<double> hist;
        std::vector<std::vector<int>> genealogy; // ancestor indices per resample
        std::vector<int> genealogy_step;
        if (store) hist.reserve(m * n_nodes);

        double logz = 0.0;
        RngStream start_base = island_rng.substream(0);
        parallel_for(m, cfg.exec, [&](std::size_t p) {
            RngStream srng = start_base.substream(p);
            x[p] = prop.start(grid, srng, &st[p * static_cast<std::size_t>(sdim)]);
            recs[p].restart(x[p]);
            lw[p] = constraint.node_ok(0, x[p]) ? 0.0 : -std::numeric_limits<double>::infinity();
        });
        if (store) hist.insert(hist.end(), x.begin(), x.end());

        std::vector<double> wn(m);
        std::vector<int> ancestor;
        for (int i = 0; i < grid.n_steps; ++i) {
            RngStream step_base = island_rng.substream(static_cast<std::uint64_t>(i) + 1);
            parallel_for(m, cfg.exec, [&](std::size_t p) {
                if (!std::isfinite(lw[p])) return; // dead particle
                RngStream prng = step_base.substream(p);
                const double next =
                    prop.step(grid, i, prng, &st[p * static_cast<std::size_t>(sdim)]);
                const double surv = constraint.step_survival(i, x[p], next);
                lw[p] += surv > 0.0 ? std::log(surv) : -std::numeric_limits<double>::infinity();
                x[p] = next;
                recs[p].step(next);
            });
            if (store) hist.insert(hist.end(), x.begin(), x.end());

            // Serial reduction keeps results identical for any worker count.
            double mx = -std::numeric_limits<double>::infinity();
            for (double v : lw) mx = std::max(mx, v);
            if (!std::isfinite(mx)) throw DegeneracyError("all particles dead", "smc");
            double sw = 0.0, sw2 = 0.0;
            for (std::size_t p = 0; p < m; ++p) {
                wn[p] = std::exp(lw[p] - mx);
                sw += wn[p];
                sw2 += wn[p] * wn[p];
            }
            const double ess = sw * sw / sw2;
            const bool last = (i == grid.n_steps - 1);
            if (!last && ess < cfg.resample_threshold * static_cast<double>(m)) {
                logz += mx + std::log(sw / static_cast<double>(m));
                for (std::size_t p = 0; p < m; ++p) wn[p] /= sw;
                RngStream rs = island_rng.substream(kResampleKey);
                systematic_resample(wn, rs.substream(static_cast<std::uint64_t>(i)).uniform(),
                                    ancestor);
                // Permute particle state by ancestry.
                std::vector<double> x2(m), st2(st.size());
                recs_tmp = recs;
                for (std::size_t p = 0; p < m; ++p) {
                    const std::size_t a = static_cast<std::size_t>(ancestor[p]);
                    x2[p] = x[a];
                    for (int d = 0; d < sdim; ++d)
                        st2[p * static_cast<std::size_t>(sdim) + static_cast<std::size_t>(d)] =
                            st[a * static_cast<std::size_t>(sdim) + static_cast<std::size_t>(d)];
                    recs[p] = recs_tmp[a];
                }
                x.swap(x2);
                st.swap(st2);
                std::fill(lw.begin(), lw.end(), 0.0);
                if (store) {
                    genealogy.push_back(ancestor);
                    genealogy_step.push_back(i + 1);
                }
            }
        }

        island_logz[static_cast<std::size_t>(b)] = logz;
        const std::size_t base = static_cast<std::size_t>(b) * m;
        for (std::size_t p = 0; p < m; ++p) {
            const std::size_t row = base + p;
            out.island_of[row] = b;
            // Absolute-scale importance weight: exp of this averages (not
            // sums) to the survival probability over the island.
            out.log_weights[row] = logz + lw[p];
            recs[p].finish(&out.rows[row * static_cast<std::size_t>(ncol)]);
        }
        if (store) {
            // Reconstruct each surviving lineage backwards through the genealogy.
            for (std::size_t p = 0; p < m; ++p) {
                std::size_t idx = p;
                int gen = static_cast<int>(genealogy.size()) - 1;
                double* dst = &out.path_matrix[(base + p) * n_nodes];
                for (int node = static_cast<int>(n_nodes) - 1; node >= 0; --node) {
                    // A resample recorded at marker s permuted slots after the
                    // value at node s was written, so remap before reading it.
                    if (gen >= 0 && genealogy_step[static_cast<std::size_t>(gen)] == node) {
                        idx = static_cast<std::size_t>(
                            genealogy[static_cast<std::size_t>(gen)][idx]);
                        --gen;
                    }
                    dst[node] = hist[static_cast<std::size_t>(node) * m + idx];
                }
            }
        }
    }

    // Survival estimate: mean of island normalizing constants.
    std::vector<double> island_z_contrib(static_cast<std::size_t>(islands));
    for (int b = 0; b < islands; ++b) {
        const std::size_t base = static_cast<std::size_t>(b) * m;
        std::vector<double> lws(out.log_weights.begin() + static_cast<std::ptrdiff_t>(base),
                                out.log_weights.begin() + static_cast<std::ptrdiff_t>(base + m));
        island_z_contrib[static_cast<std::size_t>(b)] =
            std::exp(log_sum_exp(lws) - std::log(static_cast<double>(m)));
    }
    const MeanSe z = mean_se(island_z_contrib);
    if (!(z.mean > 0.0)) throw DegeneracyError("all islands produced zero mass", "smc");
    out.log_survival = std::log(z.mean);
    out.log_survival_se = z.se / z.mean;
    out.acceptance_rate = z.mean;
    return out;
}

// ---------------------------------------------------------------------------
// Schedules and boundary cases
// ---------------------------------------------------------------------------

double EpsilonSchedule::epsilon(int k) const { return epsilon0 * std::pow(rho, k); }

EpsilonSchedule EpsilonSchedule::defaults_for(const Corridor& k, double frac) {
    EpsilonSchedule s;
    s.epsilon0 = frac * k.min_width();
    return s;
}

bool BoundaryCase::needs_schedule() const {
    if (start.kind != BoundaryAnchor::Kind::Interior) return true;
    return end && end->kind != BoundaryAnchor::Kind::Interior;
}

double anchor_value(const Corridor& k, const BoundaryAnchor& a, double t) {
    switch (a.kind) {
        case BoundaryAnchor::Kind::Interior: return a.value;
        case BoundaryAnchor::Kind::OnLower: return k.lower.eval(t);
        case BoundaryAnchor::Kind::OnUpper: return k.upper.eval(t);
    }
    return a.value;
}

Proposal proposal_for(const Corridor& k, const BoundaryCase& c) {
    const double alpha = anchor_value(k, c.start, k.t1);
    if (!c.end) return Proposal::brownian(alpha);
    return Proposal::bridge(alpha, anchor_value(k, *c.end, k.t2));
}

std::string ScheduleDiagnostics::to_string() const {
    std::ostringstream os;
    for (std::size_t k = 0; k + 1 < ks_between_levels.size() + 1 && k < ks_between_levels.size();
         ++k) {
        os << "ks level " << k << "->" << k + 1 << ":";
        for (std::size_t j = 0; j < ks_between_levels[k].size(); ++j)
            os << " t=" << probe_times[j] << " d=" << ks_between_levels[k][j];
        os << "\n";
    }
    if (monotone_warning) os << "warning: level-to-level KS distances are not decreasing\n";
    return os.str();
}

ScheduleRun sample_boundary_case(RngStream rng, const TimeGrid& grid, const Corridor& k,
                                 const BoundaryCase& c, const EpsilonSchedule& sched,
                                 SamplerKind sampler, const GenerateConfig& cfg,
                                 const RecorderSpec& what, bool crossing_corrected) {
    // Merge diagnostic probes (quartile times of the interval) into the spec.
    RecorderSpec spec = what;
    std::vector<double> diag_probes;
    for (double q : {0.25, 0.5, 0.75}) {
        double t = k.t1 + q * (k.t2 - k.t1);
        t = grid.node(grid.index_of(t)); // snap (throws if grid cannot express it)
        diag_probes.push_back(t);
        spec.probe_times.push_back(t);
    }
    auto plan = std::make_shared<const RecorderPlan>(std::move(spec), grid);

    const Proposal prop = proposal_for(k, c);
    const bool scheduled = c.needs_schedule();

    ScheduleRun run;
    run.diag.probe_times = diag_probes;
    for (int lev = 0; lev < sched.levels; ++lev) {
        LevelRun lr;
        lr.epsilon = scheduled ? sched.epsilon(lev) : 0.0;
        lr.eta_minus = scheduled ? sched.eta_minus(lev) : 0.0;
        lr.eta_plus = scheduled ? sched.eta_plus(lev) : 0.0;
        const CorridorConstraint constraint =
            CorridorConstraint::two_sided(k, grid, lr.eta_minus, lr.eta_plus, crossing_corrected);
        RngStream level_rng = rng.substream(static_cast<std::uint64_t>(lev));
        lr.ens = sampler == SamplerKind::Rejection
                     ? rejection_ensemble(level_rng, grid, prop, constraint, cfg, plan)
                     : smc_ensemble(level_rng, grid, prop, constraint, cfg, plan);
        run.levels.push_back(std::move(lr));
    }

    // Level-to-level KS at the probe times.
    for (std::size_t lev = 0; lev + 1 < run.levels.size(); ++lev) {
        std::vector<double> row;
        for (double t : diag_probes) {
            const int col = plan->col_probe_at(t);
            const auto& a = run.levels[lev].ens;
            const auto& b = run.levels[lev + 1].ens;
            std::vector<double> wa(a.count()), wb(b.count());
            for (std::size_t i = 0; i < a.count(); ++i) wa[i] = std::exp(a.log_weights[i]);
            for (std::size_t i = 0; i < b.count(); ++i) wb[i] = std::exp(b.log_weights[i]);
            row.push_back(
                ks_two_sample_weighted(a.column(col), wa, b.column(col), wb).statistic);
        }
        run.diag.ks_between_levels.push_back(std::move(row));
    }
    for (std::size_t kk = 0; kk + 1 < run.diag.ks_between_levels.size(); ++kk) {
        double prev = 0.0, next = 0.0;
        for (double v : run.diag.ks_between_levels[kk]) prev = std::max(prev, v);
        for (double v : run.diag.ks_between_levels[kk + 1]) next = std::max(next, v);
        const double noise = 3.0 / std::sqrt(static_cast<double>(run.levels[kk].ens.ess()) + 1.0);
        if (next > prev + noise) run.diag.monotone_warning = true;
    }
    return run;
}

ScheduleRun sample_housemoving(RngStream rng, const TimeGrid& grid, const Corridor& k,
                               const EpsilonSchedule& sched, SamplerKind sampler,
                               const GenerateConfig& cfg, const RecorderSpec& what) {
    if (!k.is_housemoving())
        throw ConfigError("corridor", "house-moving needs lower(t1) = 0");
    BoundaryCase c{BoundaryAnchor::on_lower(), BoundaryAnchor::on_upper()};
    return sample_boundary_case(rng, grid, k, c, sched, sampler, cfg, what);
}

ScheduleRun sample_corridor_meander(RngStream rng, const TimeGrid& grid, const Corridor& k,
                                    const BoundaryAnchor& start, EpsilonSchedule sched,
                                    SamplerKind sampler, const GenerateConfig& cfg,
                                    const RecorderSpec& what) {
    BoundaryCase c{start, std::nullopt};
    return sample_boundary_case(rng, grid, k, c, sched, sampler, cfg, what);
}

} // namespace hm
