#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sbd/percolation.hpp"
#include "sbd/stats.hpp"

using namespace sbd;

TEST_CASE("poisson tail closed forms and brute force") {
    CHECK(poisson_tail(2.0, 3.0, 1) == doctest::Approx(1.0 - std::exp(-6.0)).epsilon(1e-13));
    CHECK(poisson_tail(0.0, 5.0, 1) == 0.0);
    CHECK(poisson_tail(3.0, 0.0, 7) == 0.0);
    // rho t = 1, k = 3: 1 - e^{-1} (1 + 1 + 1/2).
    CHECK(poisson_tail(0.5, 2.0, 3) == doctest::Approx(0.08030139707139416).epsilon(1e-13));

    CHECK_THROWS_AS(poisson_tail(-1.0, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(poisson_tail(1.0, 1.0, 0), std::invalid_argument);

    for (double mean : {0.3, 1.0, 7.0, 50.0}) {
        CAPTURE(mean);
        for (int k = 1; k <= 100; k += 7) {
            double head = 0.0, term = std::exp(-mean);
            for (int j = 0; j < k; ++j) {
                head += term;
                term *= mean / (j + 1);
            }
            CHECK(std::abs(poisson_tail(mean, 1.0, k) - (1.0 - head)) < 1e-12);
        }
    }
}

TEST_CASE("equal boundaries or zero horizon mean zero spread probability") {
    auto phi = make_hard_sphere(1, 1.0);
    PointPattern xi;
    xi.add({7.0});

    auto same = run_percolation(6, 0, phi, 0.25, xi, xi, 0.5, 200, 71);
    CHECK(same.probability == 0.0);
    CHECK(same.locality_violations == 0);
    for (double p : same.profile)
        CHECK(p == 0.0);

    auto frozen = run_percolation(6, 0, phi, 0.25, xi, {}, 0.0, 100, 72);
    CHECK(frozen.probability == 0.0);

    CHECK_THROWS_AS(run_percolation(3, 3, phi, 0.25, xi, {}, 0.5, 10, 73),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_percolation(3, -1, phi, 0.25, xi, {}, 0.5, 10, 73),
                    std::invalid_argument);
}

TEST_CASE("disagreement spread from a single differing boundary point stays under the ceiling") {
    // Rods of diameter 1 at activity 0.25 on the 13-cell line; the
    // boundaries differ by one point half a cell beyond the right edge.
    auto phi = make_hard_sphere(1, 1.0);
    PointPattern xi;
    xi.add({7.0});
    const double t = 0.5413411329464508; // half the bound-validity horizon
    auto report = run_percolation(6, 0, phi, 0.25, xi, {}, t, 20000, 74, /*jobs=*/1);

    CHECK(report.rho == doctest::Approx(0.25));
    CHECK(report.window_max == doctest::Approx(1.0826822658929016).epsilon(1e-12));
    CHECK(report.in_window);
    CHECK(report.ceiling == doctest::Approx(0.0024787521766663585).epsilon(1e-12));
    CHECK(report.locality_violations == 0);

    // The disagreement has to cross six cells against a tiny time budget:
    // the reaching probability must sit below the theoretical ceiling.
    CHECK(report.probability <= report.ceiling + 3.0 * report.se + 1e-12);

    // Profile sanity: reaching a nearer shell implies reaching every
    // farther one, and the source shell is hit routinely.
    REQUIRE(report.profile.size() == 7);
    for (size_t s = 1; s < report.profile.size(); ++s)
        CHECK(report.profile[s - 1] <= report.profile[s]);
    CHECK(report.profile[6] > 0.02);
    CHECK(report.probability == report.profile[0]);
    CHECK(static_cast<long>(report.records.size()) == report.replicas);
}

TEST_CASE("ordered hitting frequencies respect the Poisson-tail bound") {
    auto phi = make_hard_sphere(1, 1.0);
    PointPattern xi;
    xi.add({7.0});
    const double t = 0.5413411329464508;
    auto report = run_percolation(6, 0, phi, 0.25, xi, {}, t, 20000, 75);
    const Grid grid(1, 1.0, 6);

    auto one = ordered_hitting_check(report.records, grid, {{6}}, t, report.rho);
    CHECK(one.bound == doctest::Approx(1.0 - std::exp(-report.rho * t)).epsilon(1e-12));
    CHECK(one.empirical <= one.bound + 3.0 * one.se);
    CHECK(one.empirical > 0.0); // the source cell does get hit

    auto two = ordered_hitting_check(report.records, grid, {{6}, {5}}, t, report.rho);
    CHECK(two.empirical <= two.bound + 3.0 * two.se);
    CHECK(two.bound == doctest::Approx(poisson_tail(report.rho, t, 2)));

    // A cell that never disagreed gives frequency zero.
    auto same = run_percolation(6, 0, phi, 0.25, xi, xi, t, 500, 76);
    auto never = ordered_hitting_check(same.records, grid, {{-6}, {-5}}, t, report.rho);
    CHECK(never.empirical == 0.0);

    auto zero_t = ordered_hitting_check(report.records, grid, {{6}}, 0.0, report.rho);
    CHECK(zero_t.empirical == 0.0);
    CHECK(zero_t.bound == 0.0);

    CHECK_THROWS_AS(ordered_hitting_check(report.records, grid, {{6}, {4}}, t, report.rho),
                    std::invalid_argument);
    CHECK_THROWS_AS(ordered_hitting_check(report.records, grid, {{7}}, t, report.rho),
                    std::invalid_argument);
    CHECK_THROWS_AS(ordered_hitting_check({}, grid, {{6}}, t, report.rho),
                    std::invalid_argument);
}

TEST_CASE("locality scan stays clean in a vigorous super-threshold spread") {
    auto phi = make_hard_sphere(1, 1.0);
    Grid grid(1, 1.0, 3);
    CounterRng pair_rng = replica_stream(77, 0);
    auto [xi, zeta] =
        make_boundary_pair(BoundaryPairKind::empty_vs_saturated, grid.full_region(), phi, 0.8,
                           pair_rng);
    auto report = run_percolation(3, 0, phi, 0.8, zeta, xi, 2.0, 2000, 78);
    CHECK_FALSE(report.in_window); // t deliberately beyond the bound's horizon
    CHECK(report.locality_violations == 0);
    CHECK(report.profile[3] > 0.3); // disagreements are common out there
}

TEST_CASE("boundary-walk counts: exhaustive small cases") {
    // d = 1: a walk from the centre needs n+1 vertices to touch the rim.
    for (int n = 1; n <= 4; ++n) {
        Grid grid(1, 1.0, n);
        for (int start = -n; start <= n; ++start) {
            const int dist = n - std::abs(start);
            for (int vertices = 1; vertices <= n + 2; ++vertices) {
                CAPTURE(n);
                CAPTURE(start);
                CAPTURE(vertices);
                const long walks = count_boundary_walks(grid, {start}, vertices);
                if (vertices <= dist)
                    CHECK(walks == 0);
                else if (vertices == dist + 1)
                    CHECK(walks >= 1); // the straight walk to the nearest rim
                CHECK(walks <= static_cast<long>(std::pow(3.0, vertices)));
            }
        }
    }

    Grid line(1, 1.0, 2);
    CHECK(count_boundary_walks(line, {0}, 3) == 2); // straight out, each way
    CHECK(count_boundary_walks(line, {1}, 2) == 1); // one step to the rim
    CHECK(count_boundary_walks(line, {2}, 1) == 1); // already there

    Grid plane(2, 0.5, 1);
    CHECK(count_boundary_walks(plane, {0, 0}, 1) == 0);
    CHECK(count_boundary_walks(plane, {0, 0}, 2) == 8); // every neighbour is outer
    CHECK_THROWS_AS(count_boundary_walks(plane, {2, 0}, 1), std::invalid_argument);
}

TEST_CASE("canonical boundary pairs are valid model boundaries") {
    auto phi = make_hard_sphere(2, 0.5);
    Grid grid(2, 0.5, 2);
    const Box region = grid.full_region();
    CounterRng rng = replica_stream(79, 0);

    auto check_valid = [&](const PointPattern& xi) {
        CHECK_NOTHROW(GibbsModel(0.4, phi, region, xi));
        for (const auto& a : xi.atoms()) {
            CHECK_FALSE(region.contains(a.loc));
            CHECK(region.distance(a.loc) < phi.range);
        }
        CHECK(is_feasible(xi, phi));
    };

    auto same = make_boundary_pair(BoundaryPairKind::identical, region, phi, 0.4, rng);
    CHECK(same.first == same.second);
    CHECK(same.first.total() == 1);
    check_valid(same.first);

    auto single = make_boundary_pair(BoundaryPairKind::empty_vs_single, region, phi, 0.4, rng);
    CHECK(single.first.empty());
    CHECK(single.second.total() == 1);
    check_valid(single.second);

    auto saturated =
        make_boundary_pair(BoundaryPairKind::empty_vs_saturated, region, phi, 0.4, rng);
    CHECK(saturated.first.empty());
    check_valid(saturated.second);
    // 4 faces, side length 2.5, hard-core spacing 0.5: a dense shell.
    CHECK(saturated.second.total() >= 20);

    auto poisson = make_boundary_pair(BoundaryPairKind::poisson_pair, region, phi, 2.0, rng);
    check_valid(poisson.first);
    check_valid(poisson.second);
    CHECK_FALSE(poisson.first == poisson.second); // independent draws
    CHECK(poisson.first.total() > 0);

    // One-dimensional saturated shell: exactly one point beyond each end.
    Grid line(1, 1.0, 6);
    auto rods = make_boundary_pair(BoundaryPairKind::empty_vs_saturated, line.full_region(),
                                   make_hard_sphere(1, 1.0), 0.25, rng);
    CHECK(rods.second.total() == 2);
}

TEST_CASE("mixing window: frozen endpoints and emptiness") {
    auto phi = make_hard_sphere(1, 1.0);

    auto w2 = spatial_mixing_window(1, 2, phi, 0.01);
    CHECK(w2.lo == 0.0);
    CHECK(w2.hi == doctest::Approx(3.007450738591393).epsilon(1e-10));
    CHECK_FALSE(w2.empty());

    auto w6 = spatial_mixing_window(1, 6, phi, 0.01);
    CHECK(w6.lo == doctest::Approx(4.18661226032053).epsilon(1e-6));
    CHECK(w6.hi == doctest::Approx(9.022352215774179).epsilon(1e-10));

    // At activity 0.25 equilibration always outlasts the spread bound.
    for (int n = 1; n <= 20; ++n)
        CHECK(spatial_mixing_window(1, n, phi, 0.25).empty());

    CHECK_THROWS_WITH_AS(
        spatial_mixing_experiment(1, {2, 4}, phi, 0.25, BoundaryPairKind::empty_vs_single, 100,
                                  80),
        doctest::Contains("no feasible n"), std::runtime_error);
}

TEST_CASE("spatial mixing: identical boundaries and zero activity give zero distance") {
    auto phi = make_hard_sphere(1, 1.0);
    auto rows =
        spatial_mixing_experiment(1, {2, 3}, phi, 0.01, BoundaryPairKind::identical, 500, 81);
    for (const auto& row : rows) {
        CHECK(row.lower_bound == 0.0);
        CHECK(row.restricted_disagree == 0.0);
    }

    auto dead =
        spatial_mixing_experiment(1, {2}, phi, 0.0, BoundaryPairKind::empty_vs_single, 100, 82);
    CHECK(dead[0].lower_bound == 0.0);
    CHECK(dead[0].restricted_disagree == 0.0);
}

TEST_CASE("spatial mixing shrinks with distance at small activity") {
    auto phi = make_hard_sphere(1, 1.0);
    auto rows = spatial_mixing_experiment(1, {2, 4, 6}, phi, 0.01,
                                          BoundaryPairKind::empty_vs_saturated, 20000, 83,
                                          /*jobs=*/1);
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
        CAPTURE(row.n);
        CHECK(row.t > row.window_lo);
        CHECK(row.t < row.window_hi);
        CHECK(row.ceiling == doctest::Approx(3.0 * std::exp(-row.n)));
        // Count-histogram gaps only arise in runs whose restrictions differ.
        CHECK(row.lower_bound <= row.restricted_disagree + 1e-12);
        CHECK(row.upper_certificate >= row.lower_bound);
    }
    // Non-increasing within confidence bands, and under the ceiling at the end.
    for (size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i].lower_bound <=
              rows[i - 1].lower_bound + 3.0 * (rows[i - 1].lower_se + rows[i].lower_se) + 1e-12);
    const auto& last = rows.back();
    CHECK(last.lower_bound <= std::exp(-6.0) + 3.0 * last.lower_se + 1e-12);
}
