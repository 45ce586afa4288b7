#include "sbd/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sbd/replicas.hpp"
#include "sbd/stats.hpp"

namespace sbd {

namespace {

constexpr double never = std::numeric_limits<double>::infinity();

// Per-replica bookkeeping along one coupled trajectory: current
// disagreement-point count per box, first-hit times, locality scan.
struct BoxTracker {
    const Grid& grid;
    std::vector<long> live;
    std::vector<double> first_time;
    long violations = 0;
    PointPattern prev1, prev2;
    bool started = false;

    explicit BoxTracker(const Grid& g)
        : grid(g), live(static_cast<size_t>(g.vertex_count()), 0),
          first_time(static_cast<size_t>(g.vertex_count()), never) {}

    void seed_pattern(const PointPattern& excl, double t) {
        for (const auto& a : excl.atoms()) {
            const auto idx = static_cast<size_t>(grid.linear_index(grid.cell_of(a.loc)));
            live[idx] += a.mult;
            if (!(first_time[idx] <= t))
                first_time[idx] = t;
        }
    }

    void added(const PointLoc& loc, double t) {
        const GridIndex k = grid.cell_of(loc);
        const auto idx = static_cast<size_t>(grid.linear_index(k));
        if (first_time[idx] == never) {
            first_time[idx] = t;
            // A disagreeing point can only be born within interaction
            // range of an existing disagreement or of the differing part
            // of the boundary; for an inner box the latter is out of
            // reach, so a live witness must sit in the box's closed
            // neighbourhood right before this event.
            if (!grid.is_outer(k)) {
                bool witness = live[idx] > 0;
                if (!witness)
                    for (const auto& nb : grid.neighbors(k))
                        if (live[static_cast<size_t>(grid.linear_index(nb))] > 0) {
                            witness = true;
                            break;
                        }
                if (!witness)
                    ++violations;
            }
        }
        live[idx] += 1;
    }

    void removed(const PointLoc& loc) {
        const auto idx = static_cast<size_t>(grid.linear_index(grid.cell_of(loc)));
        live[idx] -= 1;
    }

    void apply_change(const PointPattern& prev, const PointPattern& cur, double t) {
        if (cur.total() == prev.total())
            return;
        const PointPattern delta = sym_diff(cur, prev);
        // Coupled jumps change one point at a time.
        const PointLoc& loc = delta.atoms().front().loc;
        if (cur.total() > prev.total())
            added(loc, t);
        else
            removed(loc);
    }

    void on_state(double t, const CoupledState& s) {
        if (!started) {
            started = true;
            seed_pattern(s.excl1, t);
            seed_pattern(s.excl2, t);
        } else {
            apply_change(prev1, s.excl1, t);
            apply_change(prev2, s.excl2, t);
        }
        prev1 = s.excl1;
        prev2 = s.excl2;
    }
};

} // namespace

double poisson_tail(double rho, double t, int k) {
    if (!(rho >= 0.0) || !(t >= 0.0))
        throw std::invalid_argument("poisson_tail: rho and t must be >= 0");
    if (k < 1)
        throw std::invalid_argument("poisson_tail: k must be >= 1");
    const double mean = rho * t;
    if (mean == 0.0)
        return 0.0;
    // Pr[N >= k] for N ~ Poisson(mean) is the regularized lower incomplete
    // gamma function P(k, mean).
    return gamma_p(static_cast<double>(k), mean);
}

PercolationReport run_percolation(int n, int m, const Potential& phi, double lambda,
                                  const PointPattern& xi, const PointPattern& zeta, double t,
                                  long replicas, uint64_t seed, int jobs) {
    if (m >= n || m < 0)
        throw std::invalid_argument("run_percolation: need 0 <= m < n");
    if (!(t >= 0.0))
        throw std::invalid_argument("run_percolation: t must be >= 0");
    if (replicas < 1)
        throw std::invalid_argument("run_percolation: need at least one replica");
    if (!(phi.range > 0.0))
        throw std::invalid_argument("run_percolation: potential must have positive range");

    const Grid grid(phi.dim, phi.range, n);
    const Box region = grid.full_region();
    const GibbsModel m1(lambda, phi, region, xi);
    const GibbsModel m2(lambda, phi, region, zeta);

    PercolationReport report;
    report.n = n;
    report.m = m;
    report.t = t;
    report.replicas = replicas;
    const double L = phi.stability;
    report.rho = lambda * std::exp(L) * std::pow(phi.range, phi.dim);
    report.ceiling = std::exp(-static_cast<double>(n - m));
    report.window_max =
        static_cast<double>(n - m) /
        (std::exp(2.0) * std::pow(6.0 * m + 3.0, phi.dim) * std::pow(phi.range, phi.dim) *
         lambda * std::exp(L));
    report.in_window = t < report.window_max;
    report.records.resize(static_cast<size_t>(replicas));
    std::vector<long> violations(static_cast<size_t>(replicas), 0);

    for_each_replica(replicas, jobs, [&](long rep) {
        CounterRng rng = replica_stream(seed, static_cast<uint64_t>(rep));
        BoxTracker tracker(grid);
        simulate_coupled_visit(m1, m2, {}, {}, t, rng,
                               [&](double tj, const CoupledState& s) { tracker.on_state(tj, s); });
        auto& rec = report.records[static_cast<size_t>(rep)];
        rec.first_time = std::move(tracker.first_time);
        rec.replica = static_cast<uint64_t>(rep);
        rec.t_end = t;
        violations[static_cast<size_t>(rep)] = tracker.violations;
    });

    for (long v : violations)
        report.locality_violations += v;

    // Hitting probabilities by shell distance, plus the headline V_m event.
    const auto vertices = grid.vertices();
    std::vector<long> shell_hits(static_cast<size_t>(n + 1), 0);
    long hit_vm = 0;
    for (const auto& rec : report.records) {
        int nearest = -1;
        for (size_t vi = 0; vi < vertices.size(); ++vi) {
            if (rec.first_time[vi] == never)
                continue;
            const int shell = Grid::inf_norm(vertices[vi]);
            if (nearest < 0 || shell < nearest)
                nearest = shell;
        }
        if (nearest >= 0) {
            for (int s = nearest; s <= n; ++s)
                ++shell_hits[static_cast<size_t>(s)];
            if (nearest <= m)
                ++hit_vm;
        }
    }
    report.probability = static_cast<double>(hit_vm) / static_cast<double>(replicas);
    report.se = binomial_se(report.probability, static_cast<size_t>(replicas));
    for (int s = 0; s <= n; ++s)
        report.profile.push_back(static_cast<double>(shell_hits[static_cast<size_t>(s)]) /
                                 static_cast<double>(replicas));
    return report;
}

OrderedHittingResult ordered_hitting_check(const std::vector<HittingRecord>& records,
                                           const Grid& grid, const std::vector<GridIndex>& chain,
                                           double t, double rho) {
    if (records.empty())
        throw std::invalid_argument("ordered_hitting_check: no records");
    if (chain.empty())
        throw std::invalid_argument("ordered_hitting_check: empty chain");
    for (const auto& k : chain)
        grid.require_vertex(k);
    for (size_t i = 1; i < chain.size(); ++i) {
        GridIndex diff(chain[i]);
        for (size_t c = 0; c < diff.size(); ++c)
            diff[c] -= chain[i - 1][c];
        if (Grid::inf_norm(diff) != 1)
            throw std::invalid_argument(
                "ordered_hitting_check: chain must step between inf-norm neighbours");
    }

    long happened = 0;
    for (const auto& rec : records) {
        double prev = -1.0;
        bool ok = true;
        for (const auto& k : chain) {
            const double tk = rec.first_time[static_cast<size_t>(grid.linear_index(k))];
            if (!(tk > prev) || !(tk <= t)) {
                ok = false;
                break;
            }
            prev = tk;
        }
        if (ok)
            ++happened;
    }
    OrderedHittingResult out;
    out.replicas = static_cast<long>(records.size());
    out.empirical = static_cast<double>(happened) / static_cast<double>(records.size());
    out.se = binomial_se(out.empirical, records.size());
    out.bound = poisson_tail(rho, t, static_cast<int>(chain.size()));
    return out;
}

namespace {

long count_walks_from(const Grid& grid, const GridIndex& at, int remaining) {
    if (remaining == 1)
        return grid.is_outer(at) ? 1 : 0;
    long total = 0;
    for (const auto& nb : grid.neighbors(at))
        total += count_walks_from(grid, nb, remaining - 1);
    return total;
}

} // namespace

long count_boundary_walks(const Grid& grid, const GridIndex& start, int vertices) {
    grid.require_vertex(start);
    if (vertices < 1)
        throw std::invalid_argument("count_boundary_walks: need at least one vertex");
    return count_walks_from(grid, start, vertices);
}

std::pair<PointPattern, PointPattern> make_boundary_pair(BoundaryPairKind kind, const Box& region,
                                                         const Potential& phi, double lambda,
                                                         CounterRng& rng) {
    const double R = phi.range;
    if (!(R > 0.0))
        throw std::invalid_argument("make_boundary_pair: potential must have positive range");
    const int d = region.dim;

    auto single_point = [&]() {
        // Half a range beyond the middle of the right face.
        PointLoc x = region.center();
        x[0] = region.hi[0] + 0.5 * R;
        PointPattern p;
        p.add(x);
        return p;
    };

    auto greedy_filter = [&](const std::vector<PointLoc>& candidates) {
        PointPattern kept;
        for (const auto& c : candidates) {
            if (region.contains(c) || !(region.distance(c) < R))
                continue;
            if (energy_finite(influence(c, kept, phi)))
                kept.add(c);
        }
        return kept;
    };

    switch (kind) {
    case BoundaryPairKind::identical: {
        PointPattern p = single_point();
        return {p, p};
    }
    case BoundaryPairKind::empty_vs_single:
        return {PointPattern{}, single_point()};
    case BoundaryPairKind::empty_vs_saturated: {
        // Lattice points on every face, offset half a range outward,
        // spaced by the hard-core diameter when there is one (the densest
        // packing the potential allows) and half a range otherwise.
        double spacing = 0.5 * R;
        if (phi.kind == PotentialKind::hard_sphere)
            spacing = phi.r;
        else if (phi.kind == PotentialKind::square_well)
            spacing = phi.r0;
        std::vector<PointLoc> candidates;
        for (int axis = 0; axis < d; ++axis) {
            for (int side = 0; side < 2; ++side) {
                const double level =
                    side == 0 ? region.lo[static_cast<size_t>(axis)] - 0.5 * R
                              : region.hi[static_cast<size_t>(axis)] + 0.5 * R;
                // Tile the face directions with the chosen spacing.
                std::vector<PointLoc> face = {{}};
                for (int other = 0; other < d; ++other) {
                    std::vector<PointLoc> next;
                    if (other == axis) {
                        for (auto& f : face) {
                            PointLoc g = f;
                            g.push_back(level);
                            next.push_back(std::move(g));
                        }
                    } else {
                        const double a = region.lo[static_cast<size_t>(other)];
                        const double b = region.hi[static_cast<size_t>(other)];
                        for (double v = a; v <= b + 1e-12; v += spacing)
                            for (auto& f : face) {
                                PointLoc g = f;
                                g.push_back(std::min(v, b));
                                next.push_back(std::move(g));
                            }
                    }
                    face = std::move(next);
                }
                candidates.insert(candidates.end(), face.begin(), face.end());
            }
        }
        return {PointPattern{}, greedy_filter(candidates)};
    }
    case BoundaryPairKind::poisson_pair: {
        // Two independent Poisson collars, thinned to feasibility by
        // keeping each point only if it fits with those kept before.
        auto collar_sample = [&]() {
            Box inflated = region;
            for (int i = 0; i < d; ++i) {
                inflated.lo[static_cast<size_t>(i)] -= R;
                inflated.hi[static_cast<size_t>(i)] += R;
            }
            std::vector<PointLoc> raw;
            const long count = rng.poisson(lambda * inflated.volume());
            for (long c = 0; c < count; ++c) {
                PointLoc x(static_cast<size_t>(d));
                for (int i = 0; i < d; ++i)
                    x[static_cast<size_t>(i)] = rng.uniform(inflated.lo[static_cast<size_t>(i)],
                                                            inflated.hi[static_cast<size_t>(i)]);
                raw.push_back(std::move(x));
            }
            return greedy_filter(raw);
        };
        PointPattern first = collar_sample();
        PointPattern second = collar_sample();
        return {std::move(first), std::move(second)};
    }
    }
    throw std::logic_error("make_boundary_pair: unknown kind");
}

MixingWindow spatial_mixing_window(int k, int n, const Potential& phi, double lambda) {
    if (k < 0 || n < 1)
        throw std::invalid_argument("spatial_mixing_window: need k >= 0, n >= 1");
    const double L = phi.stability;
    const double R = phi.range;
    const double epsilon = std::exp(-static_cast<double>(n));
    const auto est = weak_temperedness_constant(phi, 1e-10);
    const double delta = 1.0 - lambda * std::exp(L) * (est.c_hat + est.abs_error);

    MixingWindow w;
    w.hi = static_cast<double>(n) /
           (std::exp(2.0) * std::pow(6.0 * k + 3.0, phi.dim) * std::pow(R, phi.dim) * lambda *
            std::exp(L));
    if (delta <= 0.0) {
        w.lo = std::numeric_limits<double>::infinity();
        return w;
    }
    const double side = (2.0 * n + 2.0 * k + 1.0) * R;
    const double mass = lambda * std::pow(side, phi.dim) * std::exp(L);
    w.lo = std::max(0.0, std::log(mass / epsilon) / delta);
    return w;
}

std::vector<SpatialMixingRow> spatial_mixing_experiment(int k, const std::vector<int>& n_values,
                                                        const Potential& phi, double lambda,
                                                        BoundaryPairKind pair, long replicas,
                                                        uint64_t seed, int jobs) {
    if (n_values.empty())
        throw std::invalid_argument("spatial_mixing_experiment: no n values");
    if (replicas < 2)
        throw std::invalid_argument("spatial_mixing_experiment: need at least 2 replicas");

    // Fail fast with guidance when any requested n has an empty window.
    for (int n : n_values) {
        if (!spatial_mixing_window(k, n, phi, lambda).empty())
            continue;
        int feasible = -1;
        for (int probe = 1; probe <= 4096; ++probe) {
            if (!spatial_mixing_window(k, probe, phi, lambda).empty()) {
                feasible = probe;
                break;
            }
        }
        std::ostringstream os;
        os << "spatial_mixing_experiment: no valid time window at n=" << n
           << " (equilibration needs longer than the spread bound allows)";
        if (feasible > 0)
            os << "; smallest feasible n is " << feasible;
        else
            os << "; no feasible n up to 4096 — lower the activity";
        throw std::runtime_error(os.str());
    }

    std::vector<SpatialMixingRow> table;
    for (size_t row_idx = 0; row_idx < n_values.size(); ++row_idx) {
        const int n = n_values[row_idx];
        const MixingWindow w = spatial_mixing_window(k, n, phi, lambda);
        SpatialMixingRow row;
        row.n = n;
        row.window_lo = w.lo;
        row.window_hi = w.hi;
        // Midpoint of the window; with no births the spread bound never
        // expires and any time past equilibration will do.
        row.t = std::isfinite(w.hi) ? 0.5 * (w.lo + w.hi) : w.lo + 1.0;
        row.epsilon = std::exp(-static_cast<double>(n));
        row.ceiling = 3.0 * row.epsilon;
        row.replicas = replicas;

        const Grid grid(phi.dim, phi.range, k + n);
        const Box region = grid.full_region();
        const Grid inner_grid(phi.dim, phi.range, k);
        const Box inner = inner_grid.full_region();

        CounterRng pair_rng = replica_stream(seed, 0, 0xb0a7 + static_cast<uint64_t>(n));
        auto [xi, zeta] = make_boundary_pair(pair, region, phi, lambda, pair_rng);
        const GibbsModel m1(lambda, phi, region, xi);
        const GibbsModel m2(lambda, phi, region, zeta);

        struct Outcome {
            long count1 = 0, count2 = 0;
            bool differ_inner = false;
        };
        std::vector<Outcome> outcomes(static_cast<size_t>(replicas));
        for_each_replica(replicas, jobs, [&](long rep) {
            CounterRng rng =
                replica_stream(seed, static_cast<uint64_t>(rep), 1 + static_cast<uint64_t>(n));
            long c_shared = 0;
            PointPattern last_e1, last_e2, last_shared;
            simulate_coupled_visit(m1, m2, {}, {}, row.t, rng,
                                   [&](double, const CoupledState& s) {
                                       c_shared = s.shared.count_in(inner);
                                       last_e1 = s.excl1;
                                       last_e2 = s.excl2;
                                   });
            auto& o = outcomes[static_cast<size_t>(rep)];
            o.count1 = c_shared + last_e1.count_in(inner);
            o.count2 = c_shared + last_e2.count_in(inner);
            o.differ_inner = !(restrict_to(last_e1, inner) == restrict_to(last_e2, inner));
        });

        std::map<long, std::pair<long, long>> hist;
        long differ = 0;
        for (const auto& o : outcomes) {
            hist[o.count1].first++;
            hist[o.count2].second++;
            if (o.differ_inner)
                ++differ;
        }
        const double reps = static_cast<double>(replicas);
        for (const auto& [count, cnt] : hist) {
            const double p = static_cast<double>(cnt.first) / reps;
            const double q = static_cast<double>(cnt.second) / reps;
            const double gap = std::abs(p - q);
            if (gap > row.lower_bound) {
                row.lower_bound = gap;
                row.lower_se = std::sqrt(p * (1.0 - p) / reps + q * (1.0 - q) / reps);
            }
        }
        row.restricted_disagree = static_cast<double>(differ) / reps;
        row.restricted_se = binomial_se(row.restricted_disagree, static_cast<size_t>(replicas));
        row.upper_certificate = row.restricted_disagree + 2.0 * row.epsilon;
        table.push_back(row);
    }
    return table;
}

} // namespace sbd
