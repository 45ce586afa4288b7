#ifndef SBD_ORACLE_HPP
#define SBD_ORACLE_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sbd/gibbs.hpp"

namespace sbd {

// Brute-force ground truth on small instances: chop the region into a
// uniform grid of cells with a per-cell occupancy cap, evaluate the
// potential at cell centers only, and treat the result as a finite-state
// birth-death chain whose stationary law is computable exactly.  The
// continuous simulator is then checked against this oracle.

struct DiscretizedInstance {
    GibbsModel model;
    int cells_per_dim = 0;
    long max_occupancy = 1;
    std::vector<Box> cells;
    std::vector<PointLoc> centers;
    // All occupancy vectors with finite energy (infinite-energy states are
    // unreachable: births into them have zero rate), lexicographic order.
    std::vector<std::vector<long>> states;

    long cell_count() const { return static_cast<long>(cells.size()); }
    // (c+1)^{#cells}, as a double since it can dwarf the enumeration cap.
    double full_state_count() const;
    // True when hard constraints cut infeasible occupancies out of the
    // enumeration; those carry zero stationary weight and are unreachable,
    // so the chain is restricted to the remaining component.
    bool restricted() const { return static_cast<double>(states.size()) < full_state_count(); }
    long cell_index(const PointLoc& x) const;
    // Occupancy vector of a continuous configuration, capped per cell.
    std::vector<long> occupancy_of(const PointPattern& eta) const;
    long state_index(const std::vector<long>& occupancy) const; // -1 if absent
};

// Builds the uniform discretization and enumerates its feasible states by
// depth-first search with infeasible-prefix pruning; more than 10^6 states
// is an error.
DiscretizedInstance discretize(const GibbsModel& m, int cells_per_dim, long max_occupancy = 1);

struct DiscreteChain {
    Eigen::MatrixXd Q;  // generator over the instance's states
    Eigen::VectorXd pi; // stationary law from the dense solve
    double pq_residual = 0.0;
    // Largest |pi - closed-form Gibbs weight| relative to the largest
    // weight; the generator solve and the product-form weights are
    // independent routes to the same distribution.
    double closed_form_rel_error = 0.0;
};

DiscreteChain exact_stationary(const DiscretizedInstance& inst);

struct OracleComparison {
    long samples = 0;
    double t = 0.0;
    double tv = 0.0; // total variation, empirical occupancy law vs pi
    double chi2_stat = 0.0;
    double chi2_p = 0.0;
    double off_support_mass = 0.0; // empirical mass on infeasible occupancies
    // First-order bias allowance from one cell-size halving:
    // 2 * TV(projected refined stationary law, pi).
    double discretization_term = 0.0;
    double tolerance = 0.0;
    bool pass = false; // tv <= tolerance + discretization_term
};

// Simulates the continuous chain from empty `runs` times to time t, maps
// each final configuration to its occupancy vector and compares the
// empirical law against the oracle's pi.
OracleComparison compare_to_simulation(const DiscretizedInstance& inst, const DiscreteChain& chain,
                                       long runs, double t, double tolerance, uint64_t seed,
                                       int jobs = 1);

} // namespace sbd

#endif
