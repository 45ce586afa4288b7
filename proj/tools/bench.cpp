// Replica-throughput benchmark: the same batch of coupled-chain replicas run
// through the serial path (jobs=1) and the OpenMP fan-out, timing both and
// insisting on bitwise-identical reductions.  Not a registered test; build
// and run it by hand when touching the scheduler or the simulators.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <omp.h>
#include <vector>

#include "sbd/coupling.hpp"
#include "sbd/dynamics.hpp"
#include "sbd/replicas.hpp"
#include "sbd/rng.hpp"

using namespace sbd;

namespace {

struct Workload {
    GibbsModel m;
    PointPattern start2;
    double t_end = 12.0;
    long replicas = 2000;
    uint64_t seed = 909;
};

// One replica's reduced output: disagreement count at t_end plus event totals.
std::vector<double> run_batch(const Workload& w, int jobs, double& seconds) {
    std::vector<double> out(static_cast<std::size_t>(w.replicas) * 3);
    const auto t0 = std::chrono::steady_clock::now();
    for_each_replica(w.replicas, jobs, [&](long rep) {
        CounterRng rng = replica_stream(w.seed, static_cast<uint64_t>(rep));
        CoupledTrajectory traj = simulate_coupled(w.m, w.m, PointPattern{}, w.start2, w.t_end, rng);
        const std::size_t base = static_cast<std::size_t>(rep) * 3;
        out[base] = static_cast<double>(disagreement_count(traj.states.back()));
        out[base + 1] = static_cast<double>(traj.counters.candidates);
        out[base + 2] = traj.coalescence_time;
    });
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace

int main(int argc, char** argv) {
    Workload w;
    if (argc > 1) w.replicas = std::atol(argv[1]);
    w.m.lambda = 1.0;
    w.m.phi = make_strauss(2, 0.5, 1.0);
    w.m.region = Box({0.0, 0.0}, {3.0, 3.0});
    w.start2.add({1.0, 1.0});
    w.start2.add({2.0, 2.0});

    const int hw = omp_get_max_threads();
    const int threads = hw > 4 ? hw : 4; // oversubscribe small boxes so the pool path runs
    std::printf("coupled strauss batch: %ld replicas, t_end=%.1f, %d threads available, using %d\n",
                w.replicas, w.t_end, hw, threads);

    double serial_s = 0.0, parallel_s = 0.0;
    const std::vector<double> serial = run_batch(w, 1, serial_s);
    const std::vector<double> parallel = run_batch(w, threads, parallel_s);

    if (serial != parallel) {
        std::printf("FAIL: serial and parallel reductions differ\n");
        return 1;
    }
    std::printf("serial   %8.3f s  (%.1f replicas/s)\n", serial_s,
                static_cast<double>(w.replicas) / serial_s);
    std::printf("parallel %8.3f s  (%.1f replicas/s)\n", parallel_s,
                static_cast<double>(w.replicas) / parallel_s);
    std::printf("speedup  %.2fx on %d threads; outputs identical\n", serial_s / parallel_s,
                threads);
    return 0;
}
