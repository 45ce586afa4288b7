#include "sbd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sbd/dynamics.hpp"
#include "sbd/replicas.hpp"
#include "sbd/rng.hpp"
#include "sbd/stats.hpp"

namespace sbd {

namespace {

constexpr long state_cap = 1000000;  // enumerated states
constexpr long solve_cap = 4096;     // dense linear algebra

// Potential at cell centers plus boundary influence, precomputed once.
struct CellTables {
    long n = 0;
    std::vector<ereal> pair; // n x n, phi(center_i, center_j)
    std::vector<ereal> bdry; // influence of the boundary condition at center_i
    std::vector<double> vol;

    ereal at(long i, long j) const { return pair[static_cast<std::size_t>(i * n + j)]; }
};

CellTables make_tables(const DiscretizedInstance& inst) {
    CellTables t;
    t.n = inst.cell_count();
    t.pair.resize(static_cast<std::size_t>(t.n) * static_cast<std::size_t>(t.n));
    t.bdry.resize(static_cast<std::size_t>(t.n));
    t.vol.resize(static_cast<std::size_t>(t.n));
    const Potential& phi = inst.model.phi;
    const Box& r = inst.model.region;
    const long k = inst.cells_per_dim;
    // Center-to-center distance from the index offset, multiplying before
    // dividing.  Grids are routinely commensurate with the interaction
    // radius (cells of width r/3, say), and then the representative pair
    // sits exactly on the potential's discontinuity: summing per-center
    // rounding errors would resolve that tie differently pair by pair,
    // while |di|*(hi-lo)/k hits the exact grid distance.
    auto index_dist = [&](long ci, long cj) {
        double acc = 0.0;
        for (int ax = r.dim - 1; ax >= 0; --ax) {
            const long da = ci % k - cj % k;
            ci /= k;
            cj /= k;
            const double step = static_cast<double>(std::labs(da)) *
                                (r.hi[static_cast<std::size_t>(ax)] - r.lo[static_cast<std::size_t>(ax)]) /
                                static_cast<double>(k);
            acc += step * step;
        }
        return std::sqrt(acc);
    };
    for (long i = 0; i < t.n; ++i) {
        t.vol[i] = inst.cells[static_cast<std::size_t>(i)].volume();
        t.bdry[i] = influence(inst.centers[static_cast<std::size_t>(i)], inst.model.boundary, phi);
        for (long j = 0; j < t.n; ++j)
            t.pair[static_cast<std::size_t>(i * t.n + j)] =
                phi.kind == PotentialKind::custom
                    ? phi(inst.centers[static_cast<std::size_t>(i)], inst.centers[static_cast<std::size_t>(j)])
                    : phi.radial(index_dist(i, j));
    }
    return t;
}

// Energy of an occupancy vector with all points sitting at cell centers:
// cross pairs, within-cell pairs, and the boundary term.
ereal occupancy_energy(const std::vector<long>& s, const CellTables& t) {
    ereal h = 0.0;
    for (long i = 0; i < t.n; ++i) {
        const long si = s[static_cast<std::size_t>(i)];
        if (si == 0) continue;
        h += static_cast<double>(si) * t.bdry[i];
        if (si >= 2) h += 0.5 * static_cast<double>(si) * static_cast<double>(si - 1) * t.at(i, i);
        for (long j = i + 1; j < t.n; ++j) {
            const long sj = s[static_cast<std::size_t>(j)];
            if (sj > 0) h += static_cast<double>(si) * static_cast<double>(sj) * t.at(i, j);
        }
    }
    return h;
}

// Influence a new center-i point would feel from the occupancy s plus the
// boundary; equals occupancy_energy(s + e_i) - occupancy_energy(s).
ereal occupancy_influence(long i, const std::vector<long>& s, const CellTables& t) {
    ereal w = t.bdry[i];
    for (long j = 0; j < t.n; ++j) {
        const long sj = s[static_cast<std::size_t>(j)];
        if (sj > 0) w += static_cast<double>(sj) * t.at(i, j);
    }
    return w;
}

void enumerate_states(const CellTables& t, long cap_per_cell,
                      std::vector<std::vector<long>>& out) {
    std::vector<long> s(static_cast<std::size_t>(t.n), 0);
    // Depth-first over cells, lexicographic order; prefixes that already
    // contain an infinite-energy pair are cut.  Removing points never
    // breaks feasibility, so every feasible prefix completes with zeros
    // and the work stays proportional to the number of states found.
    auto step = [&](auto&& self, long i) -> void {
        if (i == t.n) {
            out.push_back(s);
            if (static_cast<long>(out.size()) > state_cap)
                throw std::runtime_error(
                    "discretize: more than 1000000 feasible occupancy states; "
                    "use fewer cells or a lower occupancy cap");
            return;
        }
        for (long v = 0; v <= cap_per_cell; ++v) {
            if (v > 0) {
                if (!energy_finite(t.bdry[i])) break;
                if (v >= 2 && !energy_finite(t.at(i, i))) break;
                bool ok = true;
                for (long j = 0; j < i && ok; ++j)
                    if (s[static_cast<std::size_t>(j)] > 0 && !energy_finite(t.at(i, j))) ok = false;
                if (!ok) break;
            }
            s[static_cast<std::size_t>(i)] = v;
            self(self, i + 1);
        }
        s[static_cast<std::size_t>(i)] = 0;
    };
    step(step, 0);
}

} // namespace

double DiscretizedInstance::full_state_count() const {
    return std::pow(static_cast<double>(max_occupancy + 1), static_cast<double>(cell_count()));
}

long DiscretizedInstance::cell_index(const PointLoc& x) const {
    const Box& r = model.region;
    long idx = 0;
    for (int a = 0; a < r.dim; ++a) {
        const double h = (r.hi[static_cast<std::size_t>(a)] - r.lo[static_cast<std::size_t>(a)]) /
                         static_cast<double>(cells_per_dim);
        long i = static_cast<long>(std::floor((x[static_cast<std::size_t>(a)] -
                                               r.lo[static_cast<std::size_t>(a)]) / h));
        i = std::clamp(i, long{0}, static_cast<long>(cells_per_dim) - 1);
        idx = idx * cells_per_dim + i;
    }
    return idx;
}

std::vector<long> DiscretizedInstance::occupancy_of(const PointPattern& eta) const {
    std::vector<long> occ(static_cast<std::size_t>(cell_count()), 0);
    for (const Atom& a : eta.atoms())
        if (model.region.contains(a.loc))
            occ[static_cast<std::size_t>(cell_index(a.loc))] += a.mult;
    for (long& v : occ) v = std::min(v, max_occupancy);
    return occ;
}

long DiscretizedInstance::state_index(const std::vector<long>& occupancy) const {
    auto it = std::lower_bound(states.begin(), states.end(), occupancy);
    if (it == states.end() || *it != occupancy) return -1;
    return static_cast<long>(it - states.begin());
}

DiscretizedInstance discretize(const GibbsModel& m, int cells_per_dim, long max_occupancy) {
    m.validate();
    if (cells_per_dim < 1)
        throw std::invalid_argument("discretize: cells_per_dim must be at least 1");
    if (max_occupancy < 1)
        throw std::invalid_argument("discretize: max_occupancy must be at least 1");

    DiscretizedInstance inst;
    inst.model = m;
    inst.cells_per_dim = cells_per_dim;
    inst.max_occupancy = max_occupancy;

    const Box& r = m.region;
    const long k = cells_per_dim;
    long n_cells = 1;
    for (int a = 0; a < r.dim; ++a) n_cells *= k;
    inst.cells.reserve(static_cast<std::size_t>(n_cells));
    inst.centers.reserve(static_cast<std::size_t>(n_cells));
    std::vector<long> mi(static_cast<std::size_t>(r.dim), 0);
    for (long c = 0; c < n_cells; ++c) {
        // decode row-major multi-index (first axis most significant, matching cell_index)
        long rem = c;
        for (int a = r.dim - 1; a >= 0; --a) {
            mi[static_cast<std::size_t>(a)] = rem % k;
            rem /= k;
        }
        std::vector<double> lo(static_cast<std::size_t>(r.dim)), hi(static_cast<std::size_t>(r.dim));
        for (int a = 0; a < r.dim; ++a) {
            const double h = (r.hi[static_cast<std::size_t>(a)] - r.lo[static_cast<std::size_t>(a)]) /
                             static_cast<double>(k);
            lo[static_cast<std::size_t>(a)] = r.lo[static_cast<std::size_t>(a)] +
                                              static_cast<double>(mi[static_cast<std::size_t>(a)]) * h;
            hi[static_cast<std::size_t>(a)] = lo[static_cast<std::size_t>(a)] + h;
        }
        Box cell(lo, hi);
        inst.centers.push_back(cell.center());
        inst.cells.push_back(std::move(cell));
    }

    CellTables t = make_tables(inst);
    enumerate_states(t, max_occupancy, inst.states);
    return inst;
}

DiscreteChain exact_stationary(const DiscretizedInstance& inst) {
    const long N = static_cast<long>(inst.states.size());
    if (N == 0) throw std::logic_error("exact_stationary: no states enumerated");
    if (N > solve_cap)
        throw std::runtime_error("exact_stationary: " + std::to_string(N) +
                                 " states exceed the dense-solve cap of " +
                                 std::to_string(solve_cap));

    CellTables t = make_tables(inst);
    const double lambda = inst.model.lambda;

    DiscreteChain chain;
    chain.Q = Eigen::MatrixXd::Zero(N, N);
    for (long a = 0; a < N; ++a) {
        const std::vector<long>& s = inst.states[static_cast<std::size_t>(a)];
        double out = 0.0;
        std::vector<long> nb = s;
        for (long i = 0; i < t.n; ++i) {
            const long si = s[static_cast<std::size_t>(i)];
            if (si > 0) {
                nb[static_cast<std::size_t>(i)] = si - 1;
                const long b = inst.state_index(nb);
                nb[static_cast<std::size_t>(i)] = si;
                chain.Q(a, b) += static_cast<double>(si); // death: unit rate per point
                out += static_cast<double>(si);
            }
            if (si < inst.max_occupancy) {
                const double rate =
                    lambda * t.vol[static_cast<std::size_t>(i)] * exp_neg(occupancy_influence(i, s, t));
                if (rate > 0.0) {
                    nb[static_cast<std::size_t>(i)] = si + 1;
                    const long b = inst.state_index(nb);
                    nb[static_cast<std::size_t>(i)] = si;
                    if (b < 0)
                        throw std::logic_error("exact_stationary: positive-rate birth into a "
                                               "state missing from the enumeration");
                    chain.Q(a, b) += rate;
                    out += rate;
                }
            }
        }
        chain.Q(a, a) = -out;
    }

    // pi Q = 0 with sum(pi) = 1: transpose, overwrite one equation with the
    // normalization, full-pivot LU for the rank-deficiency robustness.
    Eigen::MatrixXd A = chain.Q.transpose();
    A.row(N - 1) = Eigen::RowVectorXd::Ones(N);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
    b(N - 1) = 1.0;
    chain.pi = A.fullPivLu().solve(b);

    double min_pi = chain.pi.minCoeff();
    if (min_pi < -1e-9)
        throw std::runtime_error("exact_stationary: linear solve produced a negative "
                                 "probability of " + std::to_string(min_pi));
    chain.pi = chain.pi.cwiseMax(0.0);
    chain.pi /= chain.pi.sum();
    chain.pq_residual = (chain.pi.transpose() * chain.Q).cwiseAbs().maxCoeff();

    // Independent route: the chain is reversible with product-form Gibbs
    // weights (activity^count / count! per cell, times e^{-energy}), so the
    // solve must reproduce them.
    Eigen::VectorXd w(N);
    if (lambda == 0.0) {
        for (long a = 0; a < N; ++a) {
            long tot = 0;
            for (long v : inst.states[static_cast<std::size_t>(a)]) tot += v;
            w(a) = (tot == 0) ? 1.0 : 0.0;
        }
    } else {
        Eigen::VectorXd lw(N);
        for (long a = 0; a < N; ++a) {
            const std::vector<long>& s = inst.states[static_cast<std::size_t>(a)];
            double acc = -occupancy_energy(s, t);
            for (long i = 0; i < t.n; ++i) {
                const long si = s[static_cast<std::size_t>(i)];
                if (si > 0)
                    acc += static_cast<double>(si) * std::log(lambda * t.vol[static_cast<std::size_t>(i)]) -
                           std::lgamma(static_cast<double>(si) + 1.0);
            }
            lw(a) = acc;
        }
        const double m = lw.maxCoeff();
        w = (lw.array() - m).exp();
    }
    w /= w.sum();
    chain.closed_form_rel_error = (chain.pi - w).cwiseAbs().maxCoeff() / w.maxCoeff();
    return chain;
}

OracleComparison compare_to_simulation(const DiscretizedInstance& inst, const DiscreteChain& chain,
                                       long runs, double t, double tolerance, uint64_t seed,
                                       int jobs) {
    if (runs < 200)
        throw std::invalid_argument("compare_to_simulation: need at least 200 runs for a "
                                    "meaningful occupancy histogram");
    if (!(t > 0.0)) throw std::invalid_argument("compare_to_simulation: end time must be positive");
    if (!(tolerance >= 0.0)) throw std::invalid_argument("compare_to_simulation: negative tolerance");

    const long N = static_cast<long>(inst.states.size());
    std::vector<long> final_state(static_cast<std::size_t>(runs), -1);
    for_each_replica(runs, jobs, [&](long rep) {
        CounterRng rng = replica_stream(seed, static_cast<uint64_t>(rep));
        PointPattern last;
        simulate_visit(inst.model, PointPattern{}, t, rng,
                       [&](double, const PointPattern& s) { last = s; });
        final_state[static_cast<std::size_t>(rep)] = inst.state_index(inst.occupancy_of(last));
    });

    std::vector<double> counts(static_cast<std::size_t>(N), 0.0);
    long off = 0;
    for (long idx : final_state)
        if (idx >= 0)
            counts[static_cast<std::size_t>(idx)] += 1.0;
        else
            ++off;

    OracleComparison cmp;
    cmp.samples = runs;
    cmp.t = t;
    cmp.tolerance = tolerance;
    cmp.off_support_mass = static_cast<double>(off) / static_cast<double>(runs);

    double tv = cmp.off_support_mass; // those states carry zero oracle mass
    for (long a = 0; a < N; ++a)
        tv += std::abs(counts[static_cast<std::size_t>(a)] / static_cast<double>(runs) - chain.pi(a));
    cmp.tv = 0.5 * tv;

    std::vector<double> probs(static_cast<std::size_t>(N));
    for (long a = 0; a < N; ++a) probs[static_cast<std::size_t>(a)] = chain.pi(a);
    try {
        Chi2Result chi2 = chi2_gof(counts, probs, static_cast<double>(runs - off));
        cmp.chi2_stat = chi2.stat;
        cmp.chi2_p = chi2.p;
    } catch (const std::runtime_error&) {
        // pi is (nearly) a point mass: after pooling there is one usable
        // bin, so chi-square carries no information and TV is the verdict
        cmp.chi2_stat = 0.0;
        cmp.chi2_p = 1.0;
    }

    // The oracle itself is biased by the center-evaluation of the
    // potential.  Halve the cell size once; with O(cell) bias the gap
    // between the two resolutions is about half the coarse bias, so twice
    // the gap is the allowance.
    DiscretizedInstance fine = discretize(inst.model, 2 * inst.cells_per_dim, inst.max_occupancy);
    DiscreteChain fine_chain = exact_stationary(fine);
    std::vector<double> projected(static_cast<std::size_t>(N), 0.0);
    double projected_off = 0.0;
    std::vector<long> coarse_of(fine.cells.size());
    for (std::size_t j = 0; j < fine.cells.size(); ++j)
        coarse_of[j] = inst.cell_index(fine.centers[j]);
    for (std::size_t fa = 0; fa < fine.states.size(); ++fa) {
        std::vector<long> occ(static_cast<std::size_t>(N == 0 ? 0 : inst.cell_count()), 0);
        const std::vector<long>& fs = fine.states[fa];
        for (std::size_t j = 0; j < fs.size(); ++j) occ[static_cast<std::size_t>(coarse_of[j])] += fs[j];
        for (long& v : occ) v = std::min(v, inst.max_occupancy);
        const long a = inst.state_index(occ);
        if (a >= 0)
            projected[static_cast<std::size_t>(a)] += fine_chain.pi(static_cast<long>(fa));
        else
            projected_off += fine_chain.pi(static_cast<long>(fa));
    }
    double gap = projected_off;
    for (long a = 0; a < N; ++a)
        gap += std::abs(projected[static_cast<std::size_t>(a)] - chain.pi(a));
    cmp.discretization_term = 2.0 * 0.5 * gap;

    cmp.pass = cmp.tv <= cmp.tolerance + cmp.discretization_term;
    return cmp;
}

} // namespace sbd
