#include "hm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "hm/errors.hpp"
#include "hm/kernels.hpp"

namespace hm {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> tokens(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

double to_double(const std::string& s, const std::string& field) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(field, "not a number: '" + s + "'");
    }
}

long long to_int(const std::string& s, const std::string& field) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(field, "not an integer: '" + s + "'");
    }
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::vector<double>> read_csv_columns(const std::string& path, std::size_t n_cols,
                                                  const std::string& field) {
    std::ifstream in(path);
    if (!in) throw ConfigError(field, "cannot open table file " + path);
    std::vector<std::vector<double>> cols(n_cols);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        for (char& c : line)
            if (c == ',') c = ' ';
        const auto tok = tokens(line);
        if (tok.size() != n_cols)
            throw ConfigError(field, "table row needs " + std::to_string(n_cols) + " columns");
        bool header = false;
        for (const auto& t : tok)
            if (!t.empty() && std::isalpha(static_cast<unsigned char>(t[0]))) header = true;
        if (header) continue;
        for (std::size_t c = 0; c < n_cols; ++c) cols[c].push_back(to_double(tok[c], field));
    }
    if (cols[0].empty()) throw ConfigError(field, "table file has no rows");
    return cols;
}

} // namespace

Curve parse_curve_spec(const std::string& spec, const std::string& field) {
    const auto tok = tokens(spec);
    if (tok.empty()) throw ConfigError(field, "empty curve spec");
    const std::string& kind = tok[0];
    auto need = [&](std::size_t n) {
        if (tok.size() != n + 1)
            throw ConfigError(field, kind + " needs " + std::to_string(n) + " parameters");
    };
    if (kind == "constant") {
        need(1);
        return Curve::constant(to_double(tok[1], field));
    }
    if (kind == "linear") {
        need(2);
        return Curve::linear(to_double(tok[1], field), to_double(tok[2], field));
    }
    if (kind == "poly" || kind == "polynomial") {
        if (tok.size() < 2) throw ConfigError(field, "poly needs coefficients");
        std::vector<double> c;
        for (std::size_t i = 1; i < tok.size(); ++i) c.push_back(to_double(tok[i], field));
        return Curve::polynomial(std::move(c));
    }
    if (kind == "cosine") {
        need(4);
        return Curve::cosine(to_double(tok[1], field), to_double(tok[2], field),
                             to_double(tok[3], field), to_double(tok[4], field));
    }
    if (kind == "tabulated") {
        need(1);
        auto cols = read_csv_columns(tok[1], 4, field);
        return Curve::tabulated(std::move(cols[0]), std::move(cols[1]), std::move(cols[2]),
                                std::move(cols[3]));
    }
    throw ConfigError(field, "unknown curve kind '" + kind + "'");
}

ScalarField parse_field_spec(const std::string& spec, const std::string& field) {
    const auto tok = tokens(spec);
    if (tok.empty()) throw ConfigError(field, "empty spec");
    const std::string& kind = tok[0];
    auto need = [&](std::size_t n) {
        if (tok.size() != n + 1)
            throw ConfigError(field, kind + " needs " + std::to_string(n) + " parameters");
    };
    if (kind == "zero") {
        need(0);
        return ScalarField::zero();
    }
    if (kind == "constant") {
        need(1);
        return ScalarField::constant(to_double(tok[1], field));
    }
    if (kind == "linear") {
        need(2);
        return ScalarField::linear(to_double(tok[1], field), to_double(tok[2], field));
    }
    if (kind == "poly" || kind == "polynomial") {
        if (tok.size() < 2) throw ConfigError(field, "poly needs coefficients");
        std::vector<double> c;
        for (std::size_t i = 1; i < tok.size(); ++i) c.push_back(to_double(tok[i], field));
        return ScalarField::polynomial(std::move(c));
    }
    if (kind == "tabulated") {
        need(1);
        auto cols = read_csv_columns(tok[1], 3, field);
        return ScalarField::tabulated(std::move(cols[0]), std::move(cols[1]),
                                      std::move(cols[2]));
    }
    throw ConfigError(field, "unknown kind '" + kind + "'");
}

namespace {

BoundaryAnchor parse_anchor(const std::string& s, const std::string& field) {
    if (s == "lower") return BoundaryAnchor::on_lower();
    if (s == "upper") return BoundaryAnchor::on_upper();
    return BoundaryAnchor::interior(to_double(s, field));
}

} // namespace

ExecPolicy RunConfig::exec() const {
    ExecPolicy e;
    e.workers = workers > 0 ? workers : ExecPolicy::hardware_workers();
    return e;
}

KernelBuildConfig RunConfig::kernel_config() const {
    KernelBuildConfig k;
    k.grid = grid;
    k.y_nodes = y_nodes;
    k.paths_per_node = paths_per_node;
    k.particles_per_island = particles;
    k.islands = islands;
    k.resample_threshold = resample_threshold;
    k.schedule = schedule;
    k.exec = exec();
    return k;
}

GenerateConfig RunConfig::generate_config() const {
    GenerateConfig g;
    g.count = sampler == SamplerKind::Rejection ? paths : particles;
    g.max_attempts = max_attempts;
    g.islands = islands;
    g.resample_threshold = resample_threshold;
    g.exec = exec();
    return g;
}

RunConfig parse_config(const std::string& text) {
    std::map<std::string, std::map<std::string, std::string>> sections;
    std::string current;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno), "malformed section header");
            current = trim(line.substr(1, line.size() - 2));
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        if (current.empty())
            throw ConfigError("line " + std::to_string(lineno), "key outside a section");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (sections[current].count(key))
            throw ConfigError(current + "." + key, "duplicate key");
        sections[current][key] = val;
    }

    static const std::map<std::string, std::set<std::string>> schema = {
        {"corridor", {"lower", "upper", "t1", "t2"}},
        {"drift", {"kind"}},
        {"sde", {"nu", "sigma", "range"}},
        {"grid", {"n_steps"}},
        {"schedule",
         {"epsilon0", "epsilon0_frac", "rho", "levels", "lower_only", "eta_minus_scale",
          "eta_plus_scale"}},
        {"run",
         {"paths", "particles", "islands", "resample_threshold", "sampler", "seed", "workers",
          "max_attempts", "start", "end", "probe_times"}},
        {"density", {"y_nodes", "paths_per_node", "t", "t1", "y1", "t2", "T"}},
        {"output", {"dir"}},
    };
    for (const auto& [sec, kv] : sections) {
        const auto it = schema.find(sec);
        if (it == schema.end()) throw ConfigError(sec, "unknown section");
        for (const auto& [key, _] : kv)
            if (!it->second.count(key)) throw ConfigError(sec + "." + key, "unknown key");
    }

    auto get = [&](const std::string& sec, const std::string& key,
                   const std::string& dflt) -> std::string {
        const auto s = sections.find(sec);
        if (s == sections.end()) return dflt;
        const auto k = s->second.find(key);
        return k == s->second.end() ? dflt : k->second;
    };
    auto has = [&](const std::string& sec, const std::string& key) {
        const auto s = sections.find(sec);
        return s != sections.end() && s->second.count(key) > 0;
    };

    RunConfig cfg;
    cfg.config_hash = fnv1a(text);

    const double t1 = to_double(get("corridor", "t1", "0"), "corridor.t1");
    const double t2 = to_double(get("corridor", "t2", "1"), "corridor.t2");
    cfg.corridor = Corridor(parse_curve_spec(get("corridor", "lower", "constant 0"),
                                             "corridor.lower"),
                            parse_curve_spec(get("corridor", "upper", "constant 1"),
                                             "corridor.upper"),
                            t1, t2);

    cfg.drift = DriftModel(parse_field_spec(get("drift", "kind", "zero"), "drift.kind"));
    if (sections.count("sde")) {
        SdeModel m;
        m.nu = parse_field_spec(get("sde", "nu", "zero"), "sde.nu");
        m.sigma = parse_field_spec(get("sde", "sigma", "constant 1"), "sde.sigma");
        cfg.sde = m;
        const auto r = tokens(get("sde", "range", "-10 10"));
        if (r.size() != 2) throw ConfigError("sde.range", "needs two numbers");
        cfg.sde_range_lo = to_double(r[0], "sde.range");
        cfg.sde_range_hi = to_double(r[1], "sde.range");
    }

    const long long n_steps = to_int(get("grid", "n_steps", "512"), "grid.n_steps");
    if (n_steps < 1 || n_steps > (1 << 22)) throw ConfigError("grid.n_steps", "out of range");
    cfg.grid = TimeGrid(t1, t2, static_cast<int>(n_steps));

    cfg.schedule = EpsilonSchedule::defaults_for(cfg.corridor);
    if (has("schedule", "epsilon0"))
        cfg.schedule.epsilon0 = to_double(get("schedule", "epsilon0", ""), "schedule.epsilon0");
    else if (has("schedule", "epsilon0_frac"))
        cfg.schedule.epsilon0 = to_double(get("schedule", "epsilon0_frac", ""),
                                          "schedule.epsilon0_frac") *
                                cfg.corridor.min_width();
    cfg.schedule.rho = to_double(get("schedule", "rho", "0.5"), "schedule.rho");
    cfg.schedule.levels =
        static_cast<int>(to_int(get("schedule", "levels", "5"), "schedule.levels"));
    cfg.schedule.lower_only = get("schedule", "lower_only", "false") == "true";
    cfg.schedule.eta_minus_scale =
        to_double(get("schedule", "eta_minus_scale", "1"), "schedule.eta_minus_scale");
    cfg.schedule.eta_plus_scale =
        to_double(get("schedule", "eta_plus_scale", "1"), "schedule.eta_plus_scale");
    if (!(cfg.schedule.epsilon0 > 0.0) || cfg.schedule.levels < 1 ||
        !(cfg.schedule.rho > 0.0 && cfg.schedule.rho < 1.0))
        throw ConfigError("schedule", "need epsilon0 > 0, levels >= 1, rho in (0,1)");

    cfg.paths = static_cast<std::size_t>(to_int(get("run", "paths", "10000"), "run.paths"));
    cfg.particles =
        static_cast<std::size_t>(to_int(get("run", "particles", "2048"), "run.particles"));
    cfg.islands = static_cast<int>(to_int(get("run", "islands", "8"), "run.islands"));
    cfg.resample_threshold =
        to_double(get("run", "resample_threshold", "0.5"), "run.resample_threshold");
    const std::string sampler = get("run", "sampler", "smc");
    if (sampler == "smc")
        cfg.sampler = SamplerKind::Smc;
    else if (sampler == "rejection")
        cfg.sampler = SamplerKind::Rejection;
    else
        throw ConfigError("run.sampler", "must be smc or rejection");
    cfg.seed = static_cast<std::uint64_t>(to_int(get("run", "seed", "12345"), "run.seed"));
    cfg.workers = static_cast<int>(to_int(get("run", "workers", "0"), "run.workers"));
    cfg.max_attempts =
        static_cast<int>(to_int(get("run", "max_attempts", "100000"), "run.max_attempts"));

    const std::string start = get("run", "start", "lower");
    const std::string end = get("run", "end", "upper");
    cfg.boundary_case.start = parse_anchor(start, "run.start");
    if (end == "free") {
        cfg.boundary_case.end.reset();
        cfg.meander = true;
    } else {
        cfg.boundary_case.end = parse_anchor(end, "run.end");
    }
    if (has("run", "probe_times")) {
        cfg.probe_times.clear();
        for (const auto& t : tokens(get("run", "probe_times", "")))
            cfg.probe_times.push_back(to_double(t, "run.probe_times"));
    }

    cfg.y_nodes = static_cast<int>(to_int(get("density", "y_nodes", "64"), "density.y_nodes"));
    cfg.paths_per_node = static_cast<std::size_t>(
        to_int(get("density", "paths_per_node", "8192"), "density.paths_per_node"));
    cfg.density_t = to_double(get("density", "t", "0.5"), "density.t");
    cfg.density_t1 = to_double(get("density", "t1", "0.25"), "density.t1");
    cfg.density_y1 = to_double(get("density", "y1", "0.5"), "density.y1");
    cfg.density_t2 = to_double(get("density", "t2", "0.75"), "density.t2");
    cfg.meander_T = to_double(get("density", "T", std::to_string(t2)), "density.T");
    cfg.output_dir = get("output", "dir", "out");

    // Cross-field validation against module preconditions.
    if (cfg.paths < 1 || cfg.particles < 2) throw ConfigError("run", "need paths and particles");
    if (cfg.islands < 1) throw ConfigError("run.islands", "need at least one island");
    if (!(cfg.resample_threshold >= 0.0 && cfg.resample_threshold <= 1.0))
        throw ConfigError("run.resample_threshold", "must lie in [0,1]");
    for (double t : cfg.probe_times) cfg.grid.index_of(t); // throws if off-grid

    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace hm
