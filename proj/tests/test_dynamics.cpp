#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sbd/dynamics.hpp"
#include "sbd/stats.hpp"

using namespace sbd;

namespace {

Box interval(double a, double b) { return Box({a}, {b}); }

double poisson_pmf(double mean, long k) {
    return std::exp(static_cast<double>(k) * std::log(mean) - mean -
                    std::lgamma(static_cast<double>(k) + 1.0));
}

} // namespace

TEST_CASE("total rate: zero potential and empty state give the bare birth rate") {
    GibbsModel m(0.7, make_zero(1), interval(0.0, 2.0));
    CounterRng rng = replica_stream(31, 0);
    auto r = total_rate(m, {}, 2000, rng);
    CHECK(r.value == doctest::Approx(1.4)); // lambda * vol, zero variance
    CHECK(r.error == doctest::Approx(0.0));
}

TEST_CASE("total rate: death part counts points exactly") {
    GibbsModel m(0.0, make_zero(1), interval(0.0, 2.0));
    PointPattern eta;
    eta.add({0.3});
    eta.add({1.2});
    eta.add({1.7});
    CounterRng rng = replica_stream(32, 0);
    auto r = total_rate(m, eta, 100, rng);
    CHECK(r.value == 3.0);
}

TEST_CASE("total rate: a single rod in the unit interval blocks every birth") {
    // Every birth location within distance 0.5 of 0.5 is forbidden; the
    // admissible set {0, 1} has measure zero, so kappa = deaths alone = 1.
    GibbsModel m(1.0, make_hard_sphere(1, 0.5), interval(0.0, 1.0));
    CounterRng rng = replica_stream(33, 0);
    auto r = total_rate(m, PointPattern::single({0.5}), 5000, rng);
    CHECK(r.value == 1.0);
    CHECK(r.error == 0.0);

    // And the envelope bound holds.
    CHECK(r.value <= 1.0 + m.lambda * std::exp(m.phi.stability) * 1.0);
}

TEST_CASE("simulate rejects bad initial states") {
    GibbsModel m(1.0, make_hard_sphere(1, 0.5), interval(0.0, 1.0));
    CounterRng rng = replica_stream(34, 0);

    PointPattern outside;
    outside.add({1.5});
    CHECK_THROWS_AS(simulate(m, outside, 1.0, rng), std::invalid_argument);

    PointPattern clash;
    clash.add({0.2});
    clash.add({0.4});
    CHECK_THROWS_AS(simulate(m, clash, 1.0, rng), std::invalid_argument);
}

TEST_CASE("trajectory bookkeeping invariants") {
    GibbsModel m(1.0, make_strauss(1, 1.0, 0.6), interval(0.0, 3.0));
    CounterRng rng = replica_stream(35, 0);
    Trajectory traj = simulate(m, {}, 30.0, rng);

    REQUIRE(traj.jump_times.size() == traj.states.size());
    REQUIRE(!traj.jump_times.empty());
    CHECK(traj.jump_times.front() == 0.0);
    CHECK(traj.states.front().empty());
    for (size_t i = 1; i < traj.jump_times.size(); ++i) {
        CHECK(traj.jump_times[i] > traj.jump_times[i - 1]);
        CHECK(traj.jump_times[i] <= traj.end_time);
        // Consecutive states differ by exactly one point.
        CHECK(sym_diff(traj.states[i], traj.states[i - 1]).total() == 1);
        CHECK(std::abs(traj.states[i].total() - traj.states[i - 1].total()) == 1);
        CHECK(is_feasible(traj.states[i], m.phi));
        for (const auto& a : traj.states[i].atoms())
            CHECK(m.region.contains(a.loc));
    }
    CHECK(traj.counters.births + traj.counters.deaths ==
          static_cast<long>(traj.states.size()) - 1);
    CHECK(traj.counters.candidates ==
          traj.counters.births + traj.counters.deaths + traj.counters.rejected);
    CHECK(traj.counters.ties == 0);
}

TEST_CASE("state lookup is right-continuous") {
    GibbsModel m(2.0, make_zero(1), interval(0.0, 1.0));
    CounterRng rng = replica_stream(36, 0);
    Trajectory traj = simulate(m, {}, 5.0, rng);
    REQUIRE(traj.jump_times.size() >= 3);

    CHECK(state_at(traj, 0.0) == traj.states[0]);
    const double t1 = traj.jump_times[1], t2 = traj.jump_times[2];
    CHECK(state_at(traj, t1) == traj.states[1]);             // at the jump: new state
    CHECK(state_at(traj, 0.5 * (t1 + t2)) == traj.states[1]); // between jumps
    CHECK(state_at(traj, traj.end_time) == traj.states.back());
    CHECK_THROWS_AS(state_at(traj, -0.1), std::out_of_range);
    CHECK_THROWS_AS(state_at(traj, 5.1), std::out_of_range);
}

TEST_CASE("hard-sphere trajectories never hold an overlapping pair") {
    GibbsModel m(0.8, make_hard_sphere(2, 0.4), Box({0, 0}, {2, 2}));
    CounterRng rng = replica_stream(37, 0);
    Trajectory traj = simulate(m, {}, 20.0, rng);
    for (const auto& s : traj.states)
        CHECK(is_feasible(s, m.phi));
    CHECK(traj.states.size() > 3); // the run actually did something
}

TEST_CASE("zero activity: pure death, extinction of a single point at mean time 1") {
    GibbsModel m(0.0, make_zero(1), interval(0.0, 1.0));
    RunningStat extinction;
    for (uint64_t rep = 0; rep < 4000; ++rep) {
        CounterRng rng = replica_stream(38, rep);
        Trajectory traj = simulate(m, PointPattern::single({0.5}), 50.0, rng);
        REQUIRE(traj.states.size() == 2); // one death, then nothing
        CHECK(traj.states.back().empty());
        CHECK(traj.counters.deaths == 1);
        CHECK(traj.counters.births == 0);
        extinction.add(traj.jump_times[1]);
    }
    CHECK(std::abs(extinction.mean() - 1.0) < 3.0 * extinction.se());
}

TEST_CASE("zero potential: stationary count is Poisson (classical immigration-death chain)") {
    const double mean = 2.5; // lambda * vol
    GibbsModel m(1.25, make_zero(1), interval(0.0, 2.0));
    const double t_end = 12.0; // many relaxation times (rate-1 deaths)
    const long replicas = 4000;

    std::vector<double> counts(12, 0.0);
    for (long rep = 0; rep < replicas; ++rep) {
        CounterRng rng = replica_stream(39, static_cast<uint64_t>(rep));
        long n = 0;
        simulate_visit(m, {}, t_end, rng,
                       [&](double, const PointPattern& s) { n = s.total(); });
        counts[static_cast<size_t>(std::min<long>(n, 11))] += 1.0;
    }
    std::vector<double> probs(12, 0.0);
    double head = 0.0;
    for (long k = 0; k < 11; ++k) {
        probs[static_cast<size_t>(k)] = poisson_pmf(mean, k);
        head += probs[static_cast<size_t>(k)];
    }
    probs[11] = 1.0 - head;
    auto chi2 = chi2_gof(counts, probs, static_cast<double>(replicas));
    CHECK(chi2.p > 0.01);
}

TEST_CASE("simulation is replayable from its seed") {
    GibbsModel m(1.0, make_square_well(1, 0.5, 1.0, 0.2, 0.4), interval(0.0, 3.0));
    CounterRng a = replica_stream(40, 7);
    CounterRng b = replica_stream(40, 7);
    Trajectory ta = simulate(m, {}, 15.0, a);
    Trajectory tb = simulate(m, {}, 15.0, b);
    REQUIRE(ta.jump_times.size() == tb.jump_times.size());
    for (size_t i = 0; i < ta.jump_times.size(); ++i) {
        CHECK(ta.jump_times[i] == tb.jump_times[i]);
        CHECK(ta.states[i] == tb.states[i]);
    }

    CounterRng c = replica_stream(40, 8); // different replica: different path
    Trajectory tc = simulate(m, {}, 15.0, c);
    CHECK(ta.jump_times != tc.jump_times);
}

TEST_CASE("boundary influence slows births near the edge") {
    // A rod fixed just outside [0,1] suppresses births in the adjacent strip.
    auto hs = make_hard_sphere(1, 0.5);
    PointPattern xi;
    xi.add({1.2});
    GibbsModel blocked(1.0, hs, interval(0.0, 1.0), xi);
    CounterRng rng = replica_stream(41, 0);
    Trajectory traj = simulate(blocked, {}, 200.0, rng);
    for (const auto& s : traj.states)
        CHECK(s.count_in(interval(0.75, 1.0)) == 0);
    CHECK(traj.counters.births > 0);
}
