#pragma once

#include <optional>
#include <vector>

#include "hm/corridor.hpp"
#include "hm/drift.hpp"
#include "hm/ensemble.hpp"
#include "hm/parallel.hpp"
#include "hm/rng.hpp"

namespace hm {

/// Probability that a Brownian bridge from x to y over dt stays on the
/// admissible side of a linearly interpolated level (exact for a straight
/// boundary): 1 - exp(-2 d0 d1 / dt) with the signed distances d0, d1.
/// Returns 0 when either endpoint is on or beyond the level.
double nocross_prob_step(double x, double y, double dt, double level_start, double level_end,
                         bool side_above);

/// Per-node corridor bounds, possibly one-sided, with the crossing-correction
/// switch. Boundaries are widened by the margins and linearized per step.
class CorridorConstraint {
public:
    CorridorConstraint() = default;
    /// Two-sided constraint from a corridor.
    static CorridorConstraint two_sided(const Corridor& k, const TimeGrid& grid,
                                        double margin_lower, double margin_upper,
                                        bool crossing_corrected);
    /// One-sided: stay below the curve (+margin).
    static CorridorConstraint below(const Curve& upper, const TimeGrid& grid, double margin,
                                    bool crossing_corrected);
    /// One-sided: stay above the curve (-margin).
    static CorridorConstraint above(const Curve& lower, const TimeGrid& grid, double margin,
                                    bool crossing_corrected);
    /// No constraint at all (weights identically 1).
    static CorridorConstraint none(const TimeGrid& grid);

    bool node_ok(int i, double x) const;
    /// Survival probability of one step [i, i+1]; 0 if the new node violates
    /// containment. Without crossing correction this is just the indicator.
    double step_survival(int i, double x_from, double x_to) const;
    bool crossing_corrected() const { return crossing_corrected_; }
    double dt() const { return dt_; }

private:
    std::vector<double> lo_, hi_; // empty when that side is unconstrained
    double dt_ = 0.0;
    bool crossing_corrected_ = true;
};

/// Proposal processes the conditioned samplers build on. A proposal owns no
/// RNG; steppers draw from the stream they are handed, which keeps ensembles
/// reproducible under any parallel schedule.
class Proposal {
public:
    enum class Kind { Bridge, Brownian, Bes3Bridge, Meander, Diffusion };

    static Proposal bridge(double a, double b);
    static Proposal brownian(double a);
    static Proposal bes3_bridge(double c, double d);
    static Proposal meander();
    /// Euler-Maruyama steps of dX = mu(X) dt + dW from a.
    static Proposal diffusion(DriftModel d, double a);

    Kind kind() const { return kind_; }
    bool pinned() const { return kind_ == Kind::Bridge || kind_ == Kind::Bes3Bridge; }
    int state_size() const;

    /// Initialize state, return the start value.
    double start(const TimeGrid& grid, RngStream& rng, double* st) const;
    /// Advance from node i to i+1, return the new value.
    double step(const TimeGrid& grid, int i, RngStream& rng, double* st) const;

private:
    Kind kind_ = Kind::Brownian;
    double a_ = 0.0, b_ = 0.0;
    DriftModel drift_;
};

struct GenerateConfig {
    std::size_t count = 10000;       // paths (rejection) or particles per island (SMC)
    int max_attempts = 100000;       // rejection budget per slot
    int islands = 8;                 // SMC islands; SEs come from island spread
    double resample_threshold = 0.5; // resample when ESS < threshold * particles
    ExecPolicy exec;
};

/// Rejection sampler: propose, test node containment, then one Bernoulli per
/// step with the product of the two one-sided no-crossing probabilities.
WeightedEnsemble rejection_ensemble(RngStream rng, const TimeGrid& grid, const Proposal& prop,
                                    const CorridorConstraint& constraint,
                                    const GenerateConfig& cfg,
                                    std::shared_ptr<const RecorderPlan> plan);

/// Importance sampling / sequential Monte Carlo: particles carry the product
/// of per-step survival probabilities as weights; systematic resampling kicks
/// in below the ESS threshold (set the threshold to 0 for plain iid weighted
/// sampling). Normalizing-constant SEs come from the spread across islands.
WeightedEnsemble smc_ensemble(RngStream rng, const TimeGrid& grid, const Proposal& prop,
                              const CorridorConstraint& constraint, const GenerateConfig& cfg,
                              std::shared_ptr<const RecorderPlan> plan);

/// Margin schedule eps_k = eps0 * rho^k with eta±(eps) = scale± * eps.
struct EpsilonSchedule {
    double epsilon0 = 0.2;
    double rho = 0.5;
    int levels = 5;
    double eta_minus_scale = 1.0;
    double eta_plus_scale = 1.0;
    bool lower_only = false; // meander-style margins (eta-, 0)

    double epsilon(int k) const;
    double eta_minus(int k) const { return eta_minus_scale * epsilon(k); }
    double eta_plus(int k) const { return lower_only ? 0.0 : eta_plus_scale * epsilon(k); }
    static EpsilonSchedule defaults_for(const Corridor& k, double frac = 0.2);
};

struct BoundaryAnchor {
    enum class Kind { Interior, OnLower, OnUpper };
    Kind kind = Kind::Interior;
    double value = 0.0; // used when Interior

    static BoundaryAnchor interior(double v) { return {Kind::Interior, v}; }
    static BoundaryAnchor on_lower() { return {Kind::OnLower, 0.0}; }
    static BoundaryAnchor on_upper() { return {Kind::OnUpper, 0.0}; }
};

/// Start/end anchoring of a corridor-conditioned process. A missing end means
/// a free right endpoint (meander type).
struct BoundaryCase {
    BoundaryAnchor start;
    std::optional<BoundaryAnchor> end;

    bool needs_schedule() const;
};

enum class SamplerKind { Rejection, Smc };

struct LevelRun {
    double epsilon = 0.0, eta_minus = 0.0, eta_plus = 0.0;
    WeightedEnsemble ens;
};

struct ScheduleDiagnostics {
    std::vector<double> probe_times;
    std::vector<std::vector<double>> ks_between_levels; // [pair k->k+1][probe]
    bool monotone_warning = false;
    std::string to_string() const;
};

struct ScheduleRun {
    std::vector<LevelRun> levels;
    ScheduleDiagnostics diag;
    const LevelRun& finest() const { return levels.back(); }
};

double anchor_value(const Corridor& k, const BoundaryAnchor& a, double t);
Proposal proposal_for(const Corridor& k, const BoundaryCase& c);

/// Epsilon-schedule ensembles for any anchor combination. Interior-interior
/// cases run every level at zero margins (the schedule is degenerate there).
ScheduleRun sample_boundary_case(RngStream rng, const TimeGrid& grid, const Corridor& k,
                                 const BoundaryCase& c, const EpsilonSchedule& sched,
                                 SamplerKind sampler, const GenerateConfig& cfg,
                                 const RecorderSpec& what, bool crossing_corrected = true);

/// Brownian house-moving: bridge from g-(t1)=0 to b=g+(t2), both endpoints on
/// their curves (the start-lower / end-upper boundary case).
ScheduleRun sample_housemoving(RngStream rng, const TimeGrid& grid, const Corridor& k,
                               const EpsilonSchedule& sched, SamplerKind sampler,
                               const GenerateConfig& cfg, const RecorderSpec& what);

/// Corridor meander: free right endpoint; margins follow the schedule's
/// lower_only flag (asymmetric (eta-, 0) by default).
ScheduleRun sample_corridor_meander(RngStream rng, const TimeGrid& grid, const Corridor& k,
                                    const BoundaryAnchor& start, EpsilonSchedule sched,
                                    SamplerKind sampler, const GenerateConfig& cfg,
                                    const RecorderSpec& what);

} // namespace hm
