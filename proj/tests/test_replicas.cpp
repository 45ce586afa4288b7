#include <atomic>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sbd/coupling.hpp"
#include "sbd/replicas.hpp"
#include "sbd/rng.hpp"

using namespace sbd;

TEST_CASE("replica loop visits every index exactly once") {
    for (int jobs : {1, 4}) {
        CAPTURE(jobs);
        std::vector<int> visits(1000, 0);
        for_each_replica(1000, jobs, [&](long r) { ++visits[static_cast<std::size_t>(r)]; });
        for (int v : visits) CHECK(v == 1);
    }
    // empty and negative counts
    for_each_replica(0, 4, [&](long) { CHECK(false); });
    CHECK_THROWS_AS(for_each_replica(-1, 1, [](long) {}), std::invalid_argument);
}

TEST_CASE("serial and parallel replica runs are bitwise identical") {
    // Real workload: short coupled simulations, one independent stream per
    // replica, results written to per-replica slots only.
    GibbsModel m;
    m.lambda = 0.8;
    m.phi = make_strauss(1, 0.6, 1.2);
    m.region = Box({0.0}, {2.0});

    PointPattern start2;
    start2.add({0.4});

    auto run = [&](int jobs) {
        std::vector<double> out(200 * 3);
        for_each_replica(200, jobs, [&](long r) {
            CounterRng rng = replica_stream(3131, static_cast<uint64_t>(r));
            CoupledTrajectory traj = simulate_coupled(m, m, PointPattern{}, start2, 2.5, rng);
            out[static_cast<std::size_t>(3 * r)] = static_cast<double>(traj.states.back().eta1().total());
            out[static_cast<std::size_t>(3 * r + 1)] = traj.jump_times.empty() ? -1.0 : traj.jump_times.back();
            out[static_cast<std::size_t>(3 * r + 2)] = traj.coalescence_time;
        });
        return out;
    };

    std::vector<double> serial = run(1);
    std::vector<double> parallel = run(4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CAPTURE(i);
        CHECK(serial[i] == parallel[i]); // exact equality, not approx
    }
}

TEST_CASE("replica exceptions surface after the loop drains") {
    for (int jobs : {1, 4}) {
        CAPTURE(jobs);
        std::atomic<long> completed{0};
        try {
            for_each_replica(64, jobs, [&](long r) {
                if (r == 17) throw std::runtime_error("replica 17 went wrong");
                ++completed;
            });
            CHECK(false);
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "replica 17 went wrong");
        }
        // serial stops at the throw; parallel drains the remaining replicas
        CHECK(completed.load() == (jobs <= 1 ? 17 : 63));
    }
}
