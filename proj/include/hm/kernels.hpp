#pragma once

#include <vector>

#include "hm/conditioned.hpp"
#include "hm/corridor.hpp"
#include "hm/drift.hpp"
#include "hm/ensemble.hpp"

namespace hm {

/// Estimated kernel on a y-grid with per-node standard errors. Interpolation
/// is monotone cubic (Fritsch-Carlson), which stays within the range of the
/// neighboring nodes; queries outside the grid are refused.
struct KernelTable {
    std::vector<double> y;
    std::vector<double> value;
    std::vector<double> se;

    bool in_range(double yq) const;
    double interp(double yq) const;
    double interp_se(double yq) const;
    static KernelTable constant_one(std::vector<double> ygrid);
};

/// 1-d density estimate with propagated errors and recorded mass. Node SEs
/// are independent across nodes; rel_scale is the shared relative
/// uncertainty of scalar factors (normalizing constants) that moves every
/// node together. Total per-node error: rss(se_j, value_j * rel_scale).
struct DensityEstimate {
    std::vector<double> y;
    std::vector<double> value;
    std::vector<double> se;
    double rel_scale = 0.0;
    double mass = 0.0;
    double mass_se = 0.0; // includes the shared-scale part

    double total_se(std::size_t j) const {
        return std::sqrt(se[j] * se[j] + value[j] * value[j] * rel_scale * rel_scale);
    }
};

struct ValueSe {
    double value = 0.0;
    double se = 0.0;
};

/// Interior y-grid at time t: n nodes spanning (g-(t)+m, g+(t)-m) with
/// m = margin_frac of the local width.
std::vector<double> kernel_ygrid(const Corridor& k, double t, int n_nodes = 64,
                                 double margin_frac = 0.01);

TimeGrid subgrid(const TimeGrid& g, int i0, int i1);

struct KernelBuildConfig {
    TimeGrid grid{0.0, 1.0, 512};  // master grid; pieces inherit its step
    int y_nodes = 64;
    std::size_t paths_per_node = 16384;
    std::size_t particles_per_island = 4096; // boundary-anchored pieces (SMC)
    int islands = 8;
    double resample_threshold = 0.5;
    EpsilonSchedule schedule; // margins for boundary-anchored pieces
    bool crossing_corrected = true;
    ExecPolicy exec;
};

/// Entrance kernel: for y between the curves at time t,
///   q_up(y) = E[ Ztilde^{-1} 1{stays below g+ - g-} ] over BES(3) bridges
///             from 0 to y - g-(t), times the meander endpoint density
///             (y-g-(t))/tau * exp(-(y-g-(t))^2 / (2 tau)).
/// Wall nodes carry the exact zero values.
KernelTable estimate_q_up(RngStream rng, const Corridor& k, double t,
                          const KernelBuildConfig& cfg);

/// Exit kernel: the same construction on reversed curves, with distances
/// measured from the upper curve.
KernelTable estimate_q_down(RngStream rng, const Corridor& k, double t,
                            const KernelBuildConfig& cfg);

/// Corridor-survival sub-density of Brownian motion started at y_from at tA:
/// boundary-clipped histogram of crossing-corrected survivor endpoints at tB.
KernelTable estimate_p_kernel(RngStream rng, const Corridor& k, double tA, double tB,
                              double y_from, const KernelBuildConfig& cfg);

/// p(. , y_to): same kernel read as a function of the start point, computed
/// on the reversed corridor (Brownian corridor survival is time-reversible).
KernelTable estimate_p_kernel_to(RngStream rng, const Corridor& k, double tA, double tB,
                                 double y_to, const KernelBuildConfig& cfg);

/// The normalizing constant C = pi n_1(b)/2 * lim P(bridge in widened
/// corridor)/(eta- eta+), estimated per level and extrapolated to zero margin
/// by a weighted linear fit in epsilon.
struct CEstimate {
    double value = 0.0;
    double se = 0.0;
    std::vector<double> eps, ratio, ratio_se;
};
CEstimate estimate_C_constant(RngStream rng, const Corridor& k, const EpsilonSchedule& sched,
                              std::size_t paths_per_level, const KernelBuildConfig& cfg);

/// h(t,y) = C^{-1} q_up(y)/sqrt(t-t1) * q_down(y)/sqrt(t2-t) on the q grid.
DensityEstimate compose_h_marginal(const Corridor& k, double t, const CEstimate& C,
                                   const KernelTable& q_up, const KernelTable& q_down);

/// h(tA,y_from,tB,y) = p(y_from,y) q_down_tB(y)/sqrt(t2-tB)
///                     / ( q_down_tA(y_from)/sqrt(t2-tA) ).
DensityEstimate compose_h_transition(const Corridor& k, double tA, double tB,
                                     const KernelTable& p_from, const KernelTable& q_down_tB,
                                     ValueSe q_down_at_start);

/// E[exp(-N/2)] over a conditioned bridge piece on [ta,tb]. Boundary-anchored
/// pieces run the particle sampler at the schedule's finest margins; interior
/// pieces use iid survival-weighted bridges at zero margins.
ValueSe estimate_piece_weight(RngStream rng, const DriftModel& d, const Corridor& k,
                              const TimeGrid& piece_grid, const BoundaryAnchor& start,
                              const BoundaryAnchor& end, const KernelBuildConfig& cfg);

/// Table of estimate_piece_weight over a y-grid. vary_start selects which
/// endpoint runs over the grid; the other anchor stays fixed.
KernelTable estimate_piece_weight_table(RngStream rng, const DriftModel& d, const Corridor& k,
                                        const TimeGrid& piece_grid, bool vary_start,
                                        const BoundaryAnchor& fixed,
                                        const std::vector<double>& ygrid,
                                        const KernelBuildConfig& cfg);

/// E[exp(-N/2)] over the Brownian house-moving ensemble (the denominator of
/// every zeta factor).
ValueSe estimate_housemoving_weight(RngStream rng, const DriftModel& d, const Corridor& k,
                                    const KernelBuildConfig& cfg);

/// h_mu = zeta * h with zeta = A(y) B(y) / D node-wise; errors in quadrature.
DensityEstimate apply_zeta(const DensityEstimate& h, const KernelTable& A, const KernelTable& B,
                           ValueSe D);

/// One shared build of the marginal tables at time t (Chapman-Kolmogorov and
/// the decomposition tests reuse it).
struct HmuMarginal {
    double t = 0.5;
    KernelTable q_up, q_down;
    CEstimate C;
    DensityEstimate h;
    KernelTable A, B; // E[e^{-N/2}] of [t1,t] 0->y and [t,t2] y->b pieces
    ValueSe D;        // E[e^{-N/2}(H)]
    DensityEstimate h_mu;
};
HmuMarginal build_hmu_marginal(RngStream rng, const DriftModel& d, const Corridor& k, double t,
                               const KernelBuildConfig& cfg);

/// Meander marginal k(t,y): histogram of the corridor-meander ensemble, and
/// k_mu via the unpinned-weight ratio (the e^{G(w(T))} factor included).
struct MeanderMarginal {
    double t = 0.5;
    DensityEstimate k_density;
    DensityEstimate k_mu;
};
MeanderMarginal build_meander_marginal(RngStream rng, const DriftModel& d, const Corridor& k,
                                       double t, double T, const KernelBuildConfig& cfg);

// ---------------------------------------------------------------------------
// Radon-Nikodym evaluators
// ---------------------------------------------------------------------------

/// Tables shared by the RN evaluators of house-moving restricted to [0,t]:
/// everything is estimated once and reused per path.
struct RnTables {
    double t = 0.5;
    CEstimate C;
    KernelTable q_down_t; // exit kernel at t
    KernelTable B_t;      // E[e^{-N/2}(bridge piece [t,t2] y->b)]
    ValueSe D;            // E[e^{-N/2}(H)]
    // Meander-route factors on [t1,t]:
    ValueSe meander_weight;    // E[e^{G(w(t))} e^{-N/2}] over the corridor meander
    ValueSe ztilde_inv_mass;   // E[Ztilde^{-1} 1{meander stays below g+ - g-}]
    ValueSe meander_surv;      // P(meander stays below g+ - g-)
};
RnTables build_rn_tables(RngStream rng, const DriftModel& d, const Corridor& k, double t,
                         const KernelBuildConfig& cfg);

struct RnValue {
    double value = 0.0;
    double log_value = 0.0;
    double rel_se = 0.0;  // from the estimated tables
    bool singular = false; // w(t) on the lower curve or outside the tables
    bool zero = false;     // indicator failed: exact zero
};

/// Density of house-moving on [0,t] against the shifted Bessel process
/// R + g-: sqrt(pi/2) q_down(w(t)) / (C sqrt(t2-t) (w(t)-g-(t)) Z_{g-}(w))
/// * 1{w <= g+} * B(w(t))/D * e^{-N(w)/2}.
RnValue rn_cor3(const DriftModel& d, const Corridor& k, const RnTables& tb, const SamplePath& w);

/// Density of house-moving on [0,t] against the corridor meander.
RnValue rn_hm_mea(const DriftModel& d, const Corridor& k, const RnTables& tb, const SamplePath& w);

/// Chain rule: rn_hm_mea times the meander-against-Bessel density; equals
/// rn_cor3 in law and is computed from the same table set, so comparing the
/// two across independently seeded tables cross-checks the composition.
RnValue rn_chain(const DriftModel& d, const Corridor& k, const RnTables& tb, const SamplePath& w);

/// Weighted histogram density on boundary-clipped bins centered on ygrid.
DensityEstimate weighted_histogram_density(const std::vector<double>& values,
                                           const std::vector<double>& log_weights,
                                           const std::vector<double>& ygrid, double wall_lo,
                                           double wall_hi, bool normalize);

} // namespace hm
