#include "hm/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "hm/csvio.hpp"
#include "hm/errors.hpp"

namespace hm {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir);
}

WeightedEnsemble finest_level_ensemble(const RunConfig& cfg, const RecorderSpec& spec) {
    const Corridor& k = cfg.corridor;
    const BoundaryCase c = cfg.boundary_case;
    EpsilonSchedule sched = cfg.schedule;
    const Proposal prop = proposal_for(k, c);
    const int lev = sched.levels - 1;
    const double em = c.needs_schedule() ? sched.eta_minus(lev) : 0.0;
    const double ep = c.needs_schedule() ? sched.eta_plus(lev) : 0.0;
    const CorridorConstraint constraint =
        CorridorConstraint::two_sided(k, cfg.grid, em, ep, true);
    auto plan = std::make_shared<const RecorderPlan>(spec, cfg.grid);
    RngStream rng = RngStream::from_seed(cfg.seed).substream(static_cast<std::uint64_t>(lev));
    return cfg.sampler == SamplerKind::Rejection
               ? rejection_ensemble(rng, cfg.grid, prop, constraint, cfg.generate_config(), plan)
               : smc_ensemble(rng, cfg.grid, prop, constraint, cfg.generate_config(), plan);
}

} // namespace

int run_sample(const RunConfig& cfg) {
    ensure_dir(cfg.output_dir);
    const std::size_t est_values = cfg.generate_config().count *
                                   static_cast<std::size_t>(std::max(1, cfg.islands)) *
                                   static_cast<std::size_t>(cfg.grid.n_nodes());
    if (cfg.sampler == SamplerKind::Smc && est_values > (1ULL << 27))
        throw ConfigError("run", "requested path storage too large; reduce particles or n_steps");

    RecorderSpec spec;
    spec.probe_times = cfg.probe_times;
    const ScheduleRun run =
        cfg.meander
            ? sample_corridor_meander(RngStream::from_seed(cfg.seed), cfg.grid, cfg.corridor,
                                      cfg.boundary_case.start, cfg.schedule, cfg.sampler,
                                      cfg.generate_config(), spec)
            : sample_boundary_case(RngStream::from_seed(cfg.seed), cfg.grid, cfg.corridor,
                                   cfg.boundary_case, cfg.schedule, cfg.sampler,
                                   cfg.generate_config(), spec);

    // Re-run the finest level with path storage; identical streams give the
    // identical ensemble, now materialized.
    RecorderSpec store_spec;
    store_spec.store_path = true;
    const WeightedEnsemble ens = finest_level_ensemble(cfg, store_spec);

    write_ensemble_paths(cfg.output_dir + "/paths.csv", ens, cfg.config_hash, cfg.seed);
    write_ensemble_weights(cfg.output_dir + "/weights.csv", ens, cfg.config_hash, cfg.seed);

    std::ofstream diag(cfg.output_dir + "/diagnostics.txt");
    diag << "# config_hash=" << std::hex << cfg.config_hash << std::dec << " seed=" << cfg.seed
         << "\n";
    for (std::size_t lev = 0; lev < run.levels.size(); ++lev) {
        const LevelRun& lr = run.levels[lev];
        diag << "level " << lev << ": epsilon=" << format_double(lr.epsilon)
             << " eta_minus=" << format_double(lr.eta_minus)
             << " eta_plus=" << format_double(lr.eta_plus)
             << " ess=" << format_double(lr.ens.ess())
             << " acceptance=" << format_double(lr.ens.acceptance_rate)
             << " log_survival=" << format_double(lr.ens.log_survival) << "\n";
    }
    diag << run.diag.to_string();
    return 0;
}

int run_density(const RunConfig& cfg, const std::string& target) {
    ensure_dir(cfg.output_dir);
    RngStream rng = RngStream::from_seed(cfg.seed);
    const KernelBuildConfig kc = cfg.kernel_config();
    const std::string base = cfg.output_dir + "/density_" + target;

    auto sidecar = [&](const std::string& extra) {
        std::ofstream meta(base + ".meta.txt");
        meta << "target=" << target << "\nseed=" << cfg.seed << "\nconfig_hash=" << std::hex
             << cfg.config_hash << std::dec << "\nt=" << cfg.density_t
             << "\npaths_per_node=" << cfg.paths_per_node << "\ny_nodes=" << cfg.y_nodes << "\n"
             << extra;
    };

    if (target == "h" || target == "h_mu") {
        const DriftModel d = target == "h" ? DriftModel::zero() : cfg.drift;
        const HmuMarginal m = build_hmu_marginal(rng, d, cfg.corridor, cfg.density_t, kc);
        write_density(base + ".csv", target == "h" ? m.h : m.h_mu, cfg.config_hash, cfg.seed);
        sidecar("C=" + format_double(m.C.value) + "\nC_se=" + format_double(m.C.se) + "\n");
        return 0;
    }
    if (target == "q_up" || target == "q_down") {
        const KernelTable t = target == "q_up"
                                  ? estimate_q_up(rng, cfg.corridor, cfg.density_t, kc)
                                  : estimate_q_down(rng, cfg.corridor, cfg.density_t, kc);
        write_kernel_table(base + ".csv", t, cfg.config_hash, cfg.seed);
        sidecar("");
        return 0;
    }
    if (target == "p") {
        const KernelTable t = estimate_p_kernel(rng, cfg.corridor, cfg.density_t1, cfg.density_t2,
                                                cfg.density_y1, kc);
        double mass = 0.0;
        for (std::size_t j = 0; j + 1 < t.y.size(); ++j)
            mass += 0.5 * (t.y[j + 1] - t.y[j]) * (t.value[j] + t.value[j + 1]);
        write_kernel_table(base + ".csv", t, cfg.config_hash, cfg.seed);
        sidecar("mass=" + format_double(mass) + "\nt1=" + format_double(cfg.density_t1) +
                "\ny1=" + format_double(cfg.density_y1) + "\nt2=" +
                format_double(cfg.density_t2) + "\n");
        return 0;
    }
    if (target == "k" || target == "k_mu") {
        const DriftModel d = target == "k" ? DriftModel::zero() : cfg.drift;
        const MeanderMarginal m =
            build_meander_marginal(rng, d, cfg.corridor, cfg.density_t, cfg.meander_T, kc);
        write_density(base + ".csv", target == "k" ? m.k_density : m.k_mu, cfg.config_hash,
                      cfg.seed);
        sidecar("T=" + format_double(cfg.meander_T) + "\n");
        return 0;
    }
    throw ConfigError("density.target", "unknown target '" + target + "'");
}

VerifyConfig verify_config_from(const RunConfig& cfg) {
    VerifyConfig v;
    v.corridor = cfg.corridor;
    v.drift = cfg.drift;
    v.grid = cfg.grid;
    v.schedule = cfg.schedule;
    v.paths = cfg.paths;
    v.particles_per_island = cfg.particles;
    v.islands = cfg.islands;
    v.resample_threshold = cfg.resample_threshold;
    v.y_nodes = cfg.y_nodes;
    v.paths_per_node = cfg.paths_per_node;
    v.seed = cfg.seed;
    v.exec = cfg.exec();
    return v;
}

std::vector<std::string> verify_suite_names() {
    return {"girsanov",   "chapman_kolmogorov", "decomposition", "reversal",
            "boundary_avoidance", "moments",    "hoelder",       "degeneration",
            "rn_chain",   "determinism"};
}

int run_verify(const RunConfig& cfg, const std::vector<std::string>& suites) {
    std::vector<std::string> wanted = suites;
    const auto known = verify_suite_names();
    if (wanted.size() == 1 && wanted[0] == "all") wanted = known;
    for (const auto& s : wanted)
        if (std::find(known.begin(), known.end(), s) == known.end())
            throw ConfigError("verify.suite", "unknown suite '" + s + "'");

    const VerifyConfig v = verify_config_from(cfg);
    const Corridor& k = cfg.corridor;
    const double mid_t = k.t1 + 0.5 * (k.t2 - k.t1);

    std::vector<TestReport> reports;
    for (const auto& s : wanted) {
        if (s == "girsanov") {
            reports.push_back(girsanov_consistency(v, k.lower.eval(k.t1), k.b(),
                                                   cfg.grid.node(cfg.grid.n_steps / 2), true));
        } else if (s == "chapman_kolmogorov") {
            const double q1 = cfg.grid.node(cfg.grid.n_steps / 4);
            const double q3 = cfg.grid.node(3 * (cfg.grid.n_steps / 4));
            const double x = k.lower.eval(q1) + 0.4 * (k.upper.eval(q1) - k.lower.eval(q1));
            const double z = k.lower.eval(q3) + 0.6 * (k.upper.eval(q3) - k.lower.eval(q3));
            reports.push_back(check_chapman_kolmogorov(v, q1, mid_t, q3, x, z));
        } else if (s == "decomposition") {
            reports.push_back(
                check_decomposition(v, mid_t, PathFunctional::ValueAtTime, mid_t));
        } else if (s == "reversal") {
            bool constant_mu = true;
            for (int i = 0; i <= 16; ++i) {
                const double xq = k.min_lower() + (k.max_upper() - k.min_lower()) * i / 16.0;
                if (std::fabs(cfg.drift.mu_prime(xq)) > 1e-12) constant_mu = false;
            }
            reports.push_back(
                check_reversal(v, cfg.grid.node(cfg.grid.n_steps / 4), constant_mu));
        } else if (s == "boundary_avoidance") {
            const Curve mid = (k.lower + k.upper).scaled(0.5);
            reports.push_back(check_boundary_avoidance(v, mid, false, mid_t, k.t2));
        } else if (s == "moments") {
            VerifyConfig vm = v;
            vm.drift = DriftModel::zero();
            for (int m0 : {1, 2, 3}) reports.push_back(check_moment_bounds(vm, 2 * m0));
        } else if (s == "hoelder") {
            reports.push_back(estimate_holder_exponent(v));
        } else if (s == "degeneration") {
            reports.push_back(check_degeneration(v));
        } else if (s == "rn_chain") {
            reports.push_back(check_rn_chain(v, mid_t, 100));
        } else if (s == "determinism") {
            reports.push_back(check_determinism(v));
        }
    }

    ensure_dir(cfg.output_dir);
    // report.csv in long form: one row per statistic.
    {
        std::ofstream out(cfg.output_dir + "/report.csv");
        out << "# config_hash=" << std::hex << cfg.config_hash << std::dec
            << " seed=" << cfg.seed << "\n";
        out << "test,pass,gated,seed,runtime_sec,stat,value\n";
        for (const auto& r : reports)
            for (const auto& [key, val] : r.stats)
                out << r.name << "," << (r.pass ? 1 : 0) << "," << (r.gated ? 1 : 0) << ","
                    << r.seed << "," << format_double(r.runtime_sec) << "," << key << ","
                    << format_double(val) << "\n";
    }

    bool all_pass = true;
    for (const auto& r : reports) {
        std::cout << r.summary() << "\n";
        if (r.gated && !r.pass) all_pass = false;
    }
    return all_pass ? 0 : 1;
}

int run_transform(const RunConfig& cfg) {
    if (!cfg.sde) throw ConfigError("sde", "transform needs an [sde] section");
    ensure_dir(cfg.output_dir);
    const LampertiResult lam =
        lamperti_transform(*cfg.sde, cfg.sde_range_lo, cfg.sde_range_hi);

    CsvWriter w(cfg.output_dir + "/lamperti.csv", cfg.config_hash, cfg.seed);
    w.header({"y", "L", "mu_at_L"});
    const int n = 100;
    for (int i = 0; i <= n; ++i) {
        const double y = cfg.sde_range_lo + (cfg.sde_range_hi - cfg.sde_range_lo) * i / n;
        const double L = lam.L(y);
        w.row({y, L, lam.drift.mu(L)});
    }
    std::cout << "unit-diffusion drift mu(x) on the transformed range:\n";
    for (int i = 0; i <= 8; ++i) {
        const double y = cfg.sde_range_lo + (cfg.sde_range_hi - cfg.sde_range_lo) * i / 8;
        const double L = lam.L(y);
        std::cout << "  y=" << y << "  L(y)=" << L << "  mu(L(y))=" << lam.drift.mu(L) << "\n";
    }
    std::cout << "transformed corridor curves L(g-), L(g+):\n";
    for (int i = 0; i <= 8; ++i) {
        const double t = cfg.corridor.t1 + (cfg.corridor.t2 - cfg.corridor.t1) * i / 8;
        std::cout << "  t=" << t << "  L(lower)=" << lam.L(cfg.corridor.lower.eval(t))
                  << "  L(upper)=" << lam.L(cfg.corridor.upper.eval(t)) << "\n";
    }
    return 0;
}

int run_report(const RunConfig& cfg) {
    bool found = false;
    for (const char* name : {"diagnostics.txt", "report.csv"}) {
        std::ifstream in(cfg.output_dir + "/" + name);
        if (!in) continue;
        found = true;
        std::cout << "== " << name << " ==\n" << in.rdbuf() << "\n";
    }
    if (!found) {
        std::cout << "no artifacts under " << cfg.output_dir << "\n";
        return 0;
    }
    return 0;
}

} // namespace hm
