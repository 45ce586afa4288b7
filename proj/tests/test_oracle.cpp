#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sbd/dynamics.hpp"
#include "sbd/oracle.hpp"
#include "sbd/rng.hpp"
#include "sbd/stats.hpp"

using namespace sbd;

namespace {

GibbsModel rod_model(double lambda, double r, double a, double b) {
    GibbsModel m;
    m.lambda = lambda;
    m.phi = make_hard_sphere(1, r);
    m.region = Box({a}, {b});
    return m;
}

GibbsModel free_model(double lambda, double a, double b) {
    GibbsModel m;
    m.lambda = lambda;
    m.phi = make_zero(1);
    m.region = Box({a}, {b});
    return m;
}

} // namespace

TEST_CASE("discretize geometry and state enumeration") {
    DiscretizedInstance inst = discretize(free_model(1.0, 0.0, 1.0), 4);
    CHECK(inst.cell_count() == 4);
    CHECK(inst.states.size() == 16); // 2^4, nothing is infeasible
    CHECK(inst.full_state_count() == 16.0);
    CHECK(!inst.restricted());

    double vol = 0.0;
    for (const Box& c : inst.cells) vol += c.volume();
    CHECK(vol == doctest::Approx(1.0).epsilon(1e-15));
    for (long i = 0; i < 4; ++i) {
        CHECK(inst.centers[i][0] == doctest::Approx((2.0 * i + 1.0) / 8.0).epsilon(1e-15));
        CHECK(inst.cell_index(inst.centers[i]) == i);
    }
    // occupancy capping and face attribution
    PointPattern eta;
    eta.add({0.1});
    eta.add({0.15});
    eta.add({0.9});
    std::vector<long> occ = inst.occupancy_of(eta);
    CHECK(occ == std::vector<long>{1, 0, 0, 1}); // two points in cell 0 cap at 1
    CHECK(inst.state_index(occ) >= 0);
    CHECK(inst.state_index({2, 0, 0, 0}) == -1);
    CHECK(inst.states.front() == std::vector<long>(4, 0)); // lexicographic order

    SUBCASE("higher occupancy cap") {
        DiscretizedInstance deep = discretize(free_model(1.0, 0.0, 1.0), 2, 3);
        CHECK(deep.states.size() == 16); // 4^2
        CHECK(deep.occupancy_of(eta) == std::vector<long>{2, 1});
    }

    SUBCASE("exclusion radius beyond the region diameter") {
        DiscretizedInstance hard = discretize(rod_model(1.0, 2.0, 0.0, 1.0), 6);
        CHECK(hard.states.size() == 7); // empty plus six singletons
        CHECK(hard.restricted());
        for (const auto& s : hard.states) {
            long tot = 0;
            for (long v : s) tot += v;
            CHECK(tot <= 1);
        }
    }

    SUBCASE("two dimensions") {
        GibbsModel m;
        m.lambda = 0.5;
        m.phi = make_zero(2);
        m.region = Box({0.0, 0.0}, {3.0, 3.0});
        DiscretizedInstance sq = discretize(m, 3);
        CHECK(sq.cell_count() == 9);
        CHECK(sq.states.size() == 512);
        double v2 = 0.0;
        for (const Box& c : sq.cells) v2 += c.volume();
        CHECK(v2 == doctest::Approx(9.0).epsilon(1e-14));
        for (long i = 0; i < 9; ++i) CHECK(sq.cell_index(sq.centers[i]) == i);
    }

    SUBCASE("state cap and argument validation") {
        CHECK_THROWS_WITH_AS(discretize(free_model(1.0, 0.0, 1.0), 21),
                             doctest::Contains("1000000"), std::runtime_error);
        CHECK_THROWS_AS(discretize(free_model(1.0, 0.0, 1.0), 0), std::invalid_argument);
        CHECK_THROWS_AS(discretize(free_model(1.0, 0.0, 1.0), 4, 0), std::invalid_argument);
    }
}

TEST_CASE("exact stationary law matches closed forms") {
    SUBCASE("single cell, occupancy up to 3: truncated Poisson") {
        DiscretizedInstance inst = discretize(free_model(1.0, 0.0, 1.0), 1, 3);
        REQUIRE(inst.states.size() == 4);
        DiscreteChain chain = exact_stationary(inst);
        // weights 1, 1, 1/2, 1/6 normalized by 8/3
        CHECK(chain.pi(0) == doctest::Approx(0.375).epsilon(1e-12));
        CHECK(chain.pi(1) == doctest::Approx(0.375).epsilon(1e-12));
        CHECK(chain.pi(2) == doctest::Approx(0.1875).epsilon(1e-12));
        CHECK(chain.pi(3) == doctest::Approx(0.0625).epsilon(1e-12));
        CHECK(chain.pq_residual <= 1e-10);
        CHECK(chain.closed_form_rel_error <= 1e-12);
    }

    SUBCASE("single cell with cap 1: two-state chain") {
        DiscretizedInstance inst = discretize(free_model(2.0, 0.0, 0.5), 1);
        DiscreteChain chain = exact_stationary(inst);
        // birth rate lambda * vol = 1 vs unit death rate
        CHECK(chain.pi(0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(chain.pi(1) == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("two mutually exclusive cells") {
        // centers 0.25 and 0.75 conflict at range 0.75; joint occupancy has
        // zero weight and is dropped from the enumeration
        DiscretizedInstance inst = discretize(rod_model(1.0, 0.75, 0.0, 1.0), 2);
        REQUIRE(inst.states.size() == 3);
        CHECK(inst.restricted());
        DiscreteChain chain = exact_stationary(inst);
        CHECK(chain.pi(0) == doctest::Approx(0.5).epsilon(1e-12));   // empty
        CHECK(chain.pi(1) == doctest::Approx(0.25).epsilon(1e-12));  // (0,1)
        CHECK(chain.pi(2) == doctest::Approx(0.25).epsilon(1e-12));  // (1,0)
    }

    SUBCASE("boundary point blocks a cell") {
        GibbsModel m = rod_model(1.0, 0.75, 0.0, 1.0);
        m.boundary.add({1.2}); // within 0.75 of the right cell's center only
        DiscretizedInstance inst = discretize(m, 2);
        REQUIRE(inst.states.size() == 2);
        DiscreteChain chain = exact_stationary(inst);
        CHECK(chain.pi(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(chain.pi(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    SUBCASE("zero potential is product form") {
        DiscretizedInstance inst = discretize(free_model(1.3, 0.0, 1.0), 2, 2);
        DiscreteChain chain = exact_stationary(inst);
        const double a = 1.3 * 0.5; // per-cell activity
        double z1 = 1.0 + a + a * a / 2.0;
        for (std::size_t s = 0; s < inst.states.size(); ++s) {
            double w = 1.0;
            for (long v : inst.states[s])
                w *= std::pow(a, static_cast<double>(v)) / std::tgamma(static_cast<double>(v) + 1.0);
            CHECK(chain.pi(static_cast<long>(s)) == doctest::Approx(w / (z1 * z1)).epsilon(1e-12));
        }
    }

    SUBCASE("zero activity parks all mass on the empty state") {
        DiscretizedInstance inst = discretize(free_model(0.0, 0.0, 1.0), 3);
        DiscreteChain chain = exact_stationary(inst);
        CHECK(chain.pi(0) == doctest::Approx(1.0).epsilon(1e-12));
        for (long s = 1; s < static_cast<long>(inst.states.size()); ++s)
            CHECK(std::abs(chain.pi(s)) <= 1e-12);
        CHECK(chain.pq_residual <= 1e-10);
    }

    SUBCASE("generator shape and reversibility") {
        DiscretizedInstance inst = discretize(rod_model(1.0, 0.5, 0.0, 1.0), 6);
        DiscreteChain chain = exact_stationary(inst);
        const long n = static_cast<long>(inst.states.size());
        for (long a = 0; a < n; ++a) {
            double row = 0.0;
            for (long b = 0; b < n; ++b) {
                if (a != b) CHECK(chain.Q(a, b) >= 0.0);
                row += chain.Q(a, b);
            }
            CHECK(std::abs(row) <= 1e-12);
        }
        // detailed balance holds edge by edge, not just in aggregate
        for (long a = 0; a < n; ++a)
            for (long b = 0; b < n; ++b)
                if (a != b)
                    CHECK(chain.pi(a) * chain.Q(a, b) ==
                          doctest::Approx(chain.pi(b) * chain.Q(b, a)).epsilon(1e-10));
    }
}

TEST_CASE("refinement tightens the oracle at first order") {
    // Hard rods at unit activity: the continuous empty-region probability is
    // 8/17 and the k-cell oracles give ratios of small integers, so the
    // center-rule bias is visible exactly.
    const double p_cont = 8.0 / 17.0;
    const double frozen_empty[3] = {6.0 / 13.0, 48.0 / 103.0, 96.0 / 205.0};
    const long frozen_states[3] = {13, 34, 103};
    double err[3];
    int at = 0;
    for (int k : {6, 12, 24}) {
        DiscretizedInstance inst = discretize(rod_model(1.0, 0.5, 0.0, 1.0), k);
        CHECK(static_cast<long>(inst.states.size()) == frozen_states[at]);
        DiscreteChain chain = exact_stationary(inst);
        CHECK(chain.pi(0) == doctest::Approx(frozen_empty[at]).epsilon(1e-10));
        CHECK(chain.pq_residual <= 1e-10);
        CHECK(chain.closed_form_rel_error <= 1e-12);
        err[at++] = std::abs(chain.pi(0) - p_cont);
    }
    CHECK(std::log2(err[0] / err[1]) >= 0.8); // measured about 0.99
    CHECK(std::log2(err[1] / err[2]) >= 0.8);
}

TEST_CASE("simulation comparison validation") {
    DiscretizedInstance inst = discretize(free_model(1.0, 0.0, 1.0), 2);
    DiscreteChain chain = exact_stationary(inst);
    CHECK_THROWS_AS(compare_to_simulation(inst, chain, 100, 1.0, 0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(compare_to_simulation(inst, chain, 500, 0.0, 0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(compare_to_simulation(inst, chain, 500, 1.0, -0.1, 1), std::invalid_argument);
}

TEST_CASE("zero activity: all sampled mass on the empty state") {
    DiscretizedInstance inst = discretize(free_model(0.0, 0.0, 1.0), 4);
    DiscreteChain chain = exact_stationary(inst);
    OracleComparison cmp = compare_to_simulation(inst, chain, 300, 1.5, 0.0, 991);
    CHECK(cmp.tv == 0.0);
    CHECK(cmp.off_support_mass == 0.0);
    CHECK(cmp.pass);
    CHECK(cmp.chi2_p == 1.0); // degenerate law, only the TV verdict applies
}

TEST_CASE("free birth-death occupancy marginals are Bernoulli") {
    GibbsModel m = free_model(0.8, 0.0, 2.0);
    DiscretizedInstance inst = discretize(m, 4);

    // With no interaction the time-t law is exactly Poisson once the initial
    // transient decays, so each cell is occupied with probability
    // 1 - e^{-lambda vol}, independently.
    const long reps = 20000;
    const double t_end = 8.0;
    std::vector<long> hits(4, 0);
    for (long rep = 0; rep < reps; ++rep) {
        CounterRng rng = replica_stream(404, static_cast<uint64_t>(rep));
        PointPattern last;
        simulate_visit(m, PointPattern{}, t_end, rng,
                       [&](double, const PointPattern& s) { last = s; });
        std::vector<long> occ = inst.occupancy_of(last);
        for (int i = 0; i < 4; ++i) hits[i] += occ[i];
    }
    const double p = 1.0 - std::exp(-0.8 * 0.5);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(reps));
    for (int i = 0; i < 4; ++i) {
        CAPTURE(i);
        CHECK(std::abs(static_cast<double>(hits[i]) / static_cast<double>(reps) - p) <= 3.0 * se);
    }

    // The full comparison sees the occupancy-cap bias of the oracle chain
    // (occupied probability 2/7 instead): TV detects it, and one halving
    // prices it at 0.0698.
    DiscreteChain chain = exact_stationary(inst);
    OracleComparison cmp = compare_to_simulation(inst, chain, 20000, t_end, 0.1, 405, 4);
    CHECK(cmp.discretization_term == doctest::Approx(0.06982708828121266).epsilon(1e-10));
    CHECK(cmp.off_support_mass == 0.0);
    CHECK(cmp.tv >= 0.05); // the real bias is about 0.078
    CHECK(cmp.tv <= 0.11);
    CHECK(cmp.pass);
}

TEST_CASE("hard rods against the six-cell oracle") {
    DiscretizedInstance inst = discretize(rod_model(1.0, 0.5, 0.0, 1.0), 6);
    DiscreteChain chain = exact_stationary(inst);
    OracleComparison cmp = compare_to_simulation(inst, chain, 100000, 50.0, 0.02, 71, 4);
    CHECK(cmp.discretization_term == doctest::Approx(0.018670649738610903).epsilon(1e-10));
    CHECK(cmp.off_support_mass == 0.0);
    CHECK(cmp.pass); // tv <= 0.02 + term; the bias alone contributes about 0.019
    CHECK(cmp.tv < 0.05);
    CHECK(cmp.samples == 100000);
}

TEST_CASE("empirical flux between occupancy classes balances") {
    // Reversibility of the continuous dynamics, witnessed through the
    // discretization: jumps empty -> {cell 3 occupied} must occur as often
    // as the reverse once the chain is warm.
    GibbsModel m = rod_model(1.0, 0.5, 0.0, 1.0);
    DiscretizedInstance inst = discretize(m, 6);
    const std::vector<long> state_a(6, 0);
    std::vector<long> state_b(6, 0);
    state_b[3] = 1;

    const long reps = 400;
    const double burn = 10.0, t_end = 60.0;
    RunningStat diff;
    double total = 0.0;
    for (long rep = 0; rep < reps; ++rep) {
        CounterRng rng = replica_stream(8120, static_cast<uint64_t>(rep));
        long ab = 0, ba = 0;
        bool have_prev = false;
        std::vector<long> prev;
        simulate_visit(m, PointPattern{}, t_end, rng, [&](double t, const PointPattern& s) {
            std::vector<long> occ = inst.occupancy_of(s);
            if (have_prev && t > burn) {
                if (prev == state_a && occ == state_b) ++ab;
                if (prev == state_b && occ == state_a) ++ba;
            }
            prev = std::move(occ);
            have_prev = true;
        });
        diff.add(static_cast<double>(ab - ba));
        total += static_cast<double>(ab + ba);
    }
    REQUIRE(total > 1000.0); // the edge is actually exercised
    CHECK(std::abs(diff.mean()) <= 4.0 * diff.se());
}
