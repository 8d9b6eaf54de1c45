// Throughput comparison of the serial reference loop against the OpenMP
// kernels for the two hot ensemble generators.

#include <chrono>
#include <cstdio>

#include "hm/conditioned.hpp"
#include "hm/corridor.hpp"

using namespace hm;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

int main() {
    const Corridor corridor(Curve::constant(0.0), Curve::constant(1.0));
    const TimeGrid grid(0.0, 1.0, 512);
    const Proposal prop = Proposal::bridge(0.0, 1.0);
    const CorridorConstraint constraint =
        CorridorConstraint::two_sided(corridor, grid, 0.1, 0.1, true);
    RecorderSpec spec;
    spec.probe_times = {0.5};
    auto plan = std::make_shared<const RecorderPlan>(spec, grid);

    const int hw = ExecPolicy::hardware_workers();
    std::printf("hardware workers: %d\n", hw);

    for (int workers : {1, hw}) {
        GenerateConfig gen;
        gen.count = 20000;
        gen.exec.workers = workers;
        auto t0 = std::chrono::steady_clock::now();
        const WeightedEnsemble e = rejection_ensemble(RngStream::from_seed(7), grid, prop,
                                                      constraint, gen, plan);
        const double dt = seconds_since(t0);
        std::printf("rejection  workers=%d  paths/s=%10.0f  acceptance=%.3f\n", workers,
                    static_cast<double>(e.count()) / dt, e.acceptance_rate);
    }
    for (int workers : {1, hw}) {
        GenerateConfig gen;
        gen.count = 8192;
        gen.islands = 4;
        gen.resample_threshold = 0.5;
        gen.exec.workers = workers;
        auto t0 = std::chrono::steady_clock::now();
        const WeightedEnsemble e =
            smc_ensemble(RngStream::from_seed(7), grid, prop, constraint, gen, plan);
        const double dt = seconds_since(t0);
        std::printf("smc        workers=%d  particles/s=%10.0f  ess=%.0f\n", workers,
                    static_cast<double>(e.count()) / dt, e.ess());
    }
    return 0;
}
