#ifndef SBD_PERCOLATION_HPP
#define SBD_PERCOLATION_HPP

#include <cstdint>
#include <vector>

#include "sbd/coupling.hpp"

namespace sbd {

// Disagreement percolation over the box grid: couple two chains whose
// boundary conditions differ outside the gridded region, record when each
// grid box first holds a disagreeing point, and compare the spread of
// disagreements against Poisson-tail bounds.

struct HittingRecord {
    // Per grid box (dense linear index): first time the box held a
    // disagreement point; +inf if it never did within the horizon.
    std::vector<double> first_time;
    uint64_t replica = 0;
    double t_end = 0.0;
};

struct PercolationReport {
    int n = 0, m = 0;
    double t = 0.0;
    long replicas = 0;
    double rho = 0.0;         // lambda e^L R^d, the per-box disagreement-birth rate bound
    double probability = 0.0; // empirical Pr[some box of V_m disagrees by t]
    double se = 0.0;
    double ceiling = 0.0;    // e^{-(n-m)}
    double window_max = 0.0; // bound validity horizon; in_window = (t < window_max)
    bool in_window = false;
    std::vector<double> profile; // Pr[shell ||k||_inf =\ell reached by t], \ell = 0..n
    long locality_violations = 0;
    std::vector<HittingRecord> records;
};

// Couples two empty-start chains on the grid cube of radius n with cell
// size = interaction range under boundaries xi and zeta, over `replicas`
// independent runs.  Alongside the hitting-time bookkeeping, every run is
// scanned for locality: an inner box's first disagreement must occur while
// the box or an inf-norm neighbour already holds one (disagreements cannot
// jump across a box); violations would mean the coupling is wrong and are
// counted with zero tolerance.
PercolationReport run_percolation(int n, int m, const Potential& phi, double lambda,
                                  const PointPattern& xi, const PointPattern& zeta, double t,
                                  long replicas, uint64_t seed, int jobs = 1);

// Pr[Poisson(rho * t) >= k]: the chance that a rate-rho clock rings at
// least k times by t, evaluated through the regularized incomplete gamma
// function (exact, no cancellation).
double poisson_tail(double rho, double t, int k);

struct OrderedHittingResult {
    double empirical = 0.0;
    double se = 0.0;
    double bound = 0.0; // poisson_tail(rho, t, chain length)
    long replicas = 0;
};

// Frequency of the ordered event T_{k_1} < T_{k_2} < ... < T_{k_l} <= t
// along a path of neighbouring boxes, against its Poisson-tail bound.
OrderedHittingResult ordered_hitting_check(const std::vector<HittingRecord>& records,
                                           const Grid& grid, const std::vector<GridIndex>& chain,
                                           double t, double rho);

// Number of grid walks with `vertices` vertices that start at `start` and
// end in an outer box.  Zero until the walk is long enough to span the
// distance; always at most 3^{dim * vertices}.
long count_boundary_walks(const Grid& grid, const GridIndex& start, int vertices);

// Canonical boundary-condition pairs probing the spread experiments:
// identical on both sides, a single point against nothing, a saturated
// collar packing against nothing, or two independent Poisson collars.
enum class BoundaryPairKind { identical, empty_vs_single, empty_vs_saturated, poisson_pair };

std::pair<PointPattern, PointPattern> make_boundary_pair(BoundaryPairKind kind, const Box& region,
                                                         const Potential& phi, double lambda,
                                                         CounterRng& rng);

struct SpatialMixingRow {
    int n = 0;
    double t = 0.0; // midpoint of the valid time window
    double window_lo = 0.0, window_hi = 0.0;
    double epsilon = 0.0; // target accuracy e^{-n}
    double ceiling = 0.0; // 3 * epsilon: equilibration twice + spread once
    // Largest per-count-value gap between the two projected count
    // distributions on the inner cube: a total-variation lower bound.
    double lower_bound = 0.0;
    double lower_se = 0.0;
    // Empirical Pr[the two chains disagree inside the inner cube at t]:
    // with the equilibration allowance this certifies an upper bound.
    double restricted_disagree = 0.0;
    double restricted_se = 0.0;
    double upper_certificate = 0.0; // restricted_disagree + 2 * epsilon
    long replicas = 0;
};

// For each n: simulate the coupled pair on the cube of grid radius k + n
// under the boundary pair, at the prescribed time t(n), and measure how
// much the two laws still differ when projected onto the inner cube of
// grid radius k.  Shrinking values certify spatial mixing at this
// activity.  Throws with the minimal feasible n when the time window for
// the requested accuracy is empty.
std::vector<SpatialMixingRow> spatial_mixing_experiment(int k, const std::vector<int>& n_values,
                                                        const Potential& phi, double lambda,
                                                        BoundaryPairKind pair, long replicas,
                                                        uint64_t seed, int jobs = 1);

// The t(n) window: long enough that both chains forget the empty start
// (>= window_lo), short enough that the percolation bound applies
// (< window_hi).  Empty when window_lo >= window_hi.
struct MixingWindow {
    double lo = 0.0, hi = 0.0;
    bool empty() const { return !(lo < hi); }
};
MixingWindow spatial_mixing_window(int k, int n, const Potential& phi, double lambda);

} // namespace sbd

#endif
