#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hm/conditioned.hpp"
#include "hm/corridor.hpp"
#include "hm/drift.hpp"
#include "hm/kernels.hpp"

namespace hm {

/// Parsed, validated run configuration. Unknown sections or keys reject the
/// whole file so that typos cannot silently fall back to defaults.
struct RunConfig {
    Corridor corridor;
    DriftModel drift;
    std::optional<SdeModel> sde;
    double sde_range_lo = -10.0, sde_range_hi = 10.0;

    TimeGrid grid{0.0, 1.0, 512};
    EpsilonSchedule schedule;

    // [run]
    std::size_t paths = 10000;
    std::size_t particles = 2048;
    int islands = 8;
    double resample_threshold = 0.5;
    SamplerKind sampler = SamplerKind::Smc;
    std::uint64_t seed = 12345;
    int workers = 0; // 0 = all hardware workers
    int max_attempts = 100000;
    BoundaryCase boundary_case{BoundaryAnchor::on_lower(), BoundaryAnchor::on_upper()};
    bool meander = false; // free right endpoint
    std::vector<double> probe_times{0.25, 0.5, 0.75};

    // [density]
    int y_nodes = 64;
    std::size_t paths_per_node = 8192;
    double density_t = 0.5;
    double density_t1 = 0.25;
    double density_y1 = 0.5;
    double density_t2 = 0.75;
    double meander_T = 1.0;

    std::string output_dir = "out";
    std::uint64_t config_hash = 0;

    ExecPolicy exec() const;
    KernelBuildConfig kernel_config() const;
    GenerateConfig generate_config() const;
};

/// Parse the sectioned key = value format. Throws ConfigError with the
/// offending field on any violation.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

Curve parse_curve_spec(const std::string& spec, const std::string& field);
ScalarField parse_field_spec(const std::string& spec, const std::string& field);

} // namespace hm
