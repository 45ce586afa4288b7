#ifndef SBD_COUPLING_HPP
#define SBD_COUPLING_HPP

#include <limits>
#include <utility>
#include <vector>

#include "sbd/dynamics.hpp"

namespace sbd {

// Identity coupling of two birth-death chains sharing activity, potential
// and region (boundaries may differ): points common to both chains die
// together, each chain's exclusive points die alone, and births are
// proposed once and accepted into each chain by a shared uniform draw
// against the two acceptance probabilities.  Each marginal chain has
// exactly the law of the single-chain simulator.

// Stored as the disjoint decomposition; the two chains are
// eta1 = shared + excl1 and eta2 = shared + excl2.
struct CoupledState {
    PointPattern shared, excl1, excl2;
    PointPattern eta1() const { return add(shared, excl1); }
    PointPattern eta2() const { return add(shared, excl2); }
};

CoupledState make_coupled(const PointPattern& eta1, const PointPattern& eta2);

// Number of disagreeing points: (eta1 sym_diff eta2)(region).
long disagreement_count(const CoupledState& state);

struct CoupledCounters {
    long candidates = 0;
    long shared_births = 0, excl_births1 = 0, excl_births2 = 0;
    long shared_deaths = 0, deaths1 = 0, deaths2 = 0;
    long rejected = 0;
    long ties = 0;
};

struct CoupledTrajectory {
    std::vector<double> jump_times; // [0] = 0 holds the initial state
    std::vector<CoupledState> states;
    double end_time = 0.0;
    // First time the chains are equal (+inf if never).  With equal
    // boundaries equality is absorbing; with different boundaries new
    // disagreements can be born afterwards.
    double coalescence_time = std::numeric_limits<double>::infinity();
    CoupledCounters counters;
};

template <class Visitor>
CoupledCounters simulate_coupled_visit(const GibbsModel& m1, const GibbsModel& m2,
                                       const PointPattern& eta1, const PointPattern& eta2,
                                       double t_end, CounterRng& rng, Visitor&& visit);

CoupledTrajectory simulate_coupled(const GibbsModel& m1, const GibbsModel& m2,
                                   const PointPattern& eta1, const PointPattern& eta2,
                                   double t_end, CounterRng& rng);

const CoupledState& coupled_state_at(const CoupledTrajectory& traj, double t);

// Conservative contraction exponent delta = 1 - lambda e^L (c_hat + error):
// the disagreement count drops at rate at least delta per unit time in
// expectation when positive.  At or above the uniqueness threshold the
// formula is non-positive and is returned as-is (sentinel for "no
// contraction certificate").
double contraction_rate(const GibbsModel& m, const Temperedness& est);

// Least-squares slope of -log(mean_f) against time: the empirically
// observed contraction exponent, to compare with the certified one.
double fitted_contraction_rate(const std::vector<double>& times,
                               const std::vector<double>& mean_f);

struct TvEstimates {
    double non_coalesced = 0.0; // empirical Pr[eta1(t) != eta2(t)]
    double se = 0.0;            // binomial standard error of that fraction
    long runs = 0;
    // Per query box: max_m |Pr[N_B = m] - Pr'[N_B = m]|, a valid total
    // variation lower bound for the two time-t laws.
    std::vector<double> lower_bounds;
};

// The non-coalescence fraction upper-bounds the total variation distance
// between the two chains' time-t laws (by the coupling inequality; report
// consumers may apply a factor 2 for the sup-difference convention).
TvEstimates tv_estimates(const std::vector<CoupledTrajectory>& runs, double t,
                         const std::vector<Box>& query_boxes = {});

// --- implementation ---

namespace detail {
void check_coupled_specs(const GibbsModel& m1, const GibbsModel& m2);
} // namespace detail

template <class Visitor>
CoupledCounters simulate_coupled_visit(const GibbsModel& m1, const GibbsModel& m2,
                                       const PointPattern& eta1, const PointPattern& eta2,
                                       double t_end, CounterRng& rng, Visitor&& visit) {
    detail::check_coupled_specs(m1, m2);
    detail::check_initial_state(m1, eta1);
    detail::check_initial_state(m2, eta2);

    CoupledState st = make_coupled(eta1, eta2);
    const double vol = m1.region.volume();
    const double birth_envelope = m1.lambda * std::exp(m1.phi.stability) * vol;
    const double L = m1.phi.stability;
    CoupledCounters counters;

    double t = 0.0;
    visit(t, std::as_const(st));
    for (;;) {
        const double n_shared = static_cast<double>(st.shared.total());
        const double n1 = static_cast<double>(st.excl1.total());
        const double n2 = static_cast<double>(st.excl2.total());
        const double kappa_bar = n_shared + n1 + n2 + birth_envelope;
        if (kappa_bar <= 0.0)
            break;
        double t_next = t + rng.exponential(kappa_bar);
        if (!(t_next <= t_end))
            break;
        if (t_next <= t) {
            ++counters.ties;
            t_next = std::nextafter(t, t_end + 1.0);
            if (!(t_next <= t_end))
                break;
        }
        t = t_next;
        ++counters.candidates;

        const double pick = rng.uniform01() * kappa_bar;
        if (pick < n_shared) {
            // Simultaneous death of a common point in both chains.
            st.shared.remove(st.shared.nth_point(rng.below(st.shared.total())));
            ++counters.shared_deaths;
            visit(t, std::as_const(st));
        } else if (pick < n_shared + n1) {
            st.excl1.remove(st.excl1.nth_point(rng.below(st.excl1.total())));
            ++counters.deaths1;
            visit(t, std::as_const(st));
        } else if (pick < n_shared + n1 + n2) {
            st.excl2.remove(st.excl2.nth_point(rng.below(st.excl2.total())));
            ++counters.deaths2;
            visit(t, std::as_const(st));
        } else {
            // Birth proposal shared by both chains.
            PointLoc x(static_cast<size_t>(m1.region.dim));
            for (int i = 0; i < m1.region.dim; ++i)
                x[static_cast<size_t>(i)] = rng.uniform(m1.region.lo[static_cast<size_t>(i)],
                                                        m1.region.hi[static_cast<size_t>(i)]);
            const ereal w_shared = influence(x, st.shared, m1.phi);
            const ereal w1 = w_shared + influence(x, st.excl1, m1.phi) +
                             influence(x, m1.boundary, m1.phi);
            const ereal w2 = w_shared + influence(x, st.excl2, m1.phi) +
                             influence(x, m2.boundary, m2.phi);
            double p1 = 0.0, p2 = 0.0;
            if (energy_finite(w1)) {
                if (w1 < -L - 1e-9)
                    detail::envelope_violation(w1, L);
                p1 = std::exp(-(w1 + L));
            }
            if (energy_finite(w2)) {
                if (w2 < -L - 1e-9)
                    detail::envelope_violation(w2, L);
                p2 = std::exp(-(w2 + L));
            }
            // One uniform realizes the maximal coupling of the two
            // acceptance events: both, exactly one, or neither.
            const double u = rng.uniform01();
            const double p_min = p1 < p2 ? p1 : p2;
            if (u < p_min) {
                st.shared.add(x);
                ++counters.shared_births;
                visit(t, std::as_const(st));
            } else if (u < p1) {
                st.excl1.add(x);
                ++counters.excl_births1;
                visit(t, std::as_const(st));
            } else if (u < p2) {
                st.excl2.add(x);
                ++counters.excl_births2;
                visit(t, std::as_const(st));
            } else {
                ++counters.rejected;
            }
        }
    }
    return counters;
}

} // namespace sbd

#endif
