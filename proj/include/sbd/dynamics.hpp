#ifndef SBD_DYNAMICS_HPP
#define SBD_DYNAMICS_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "sbd/gibbs.hpp"

namespace sbd {

// Spatial birth-death process on the model's region: each point dies at
// unit rate, births arrive at rate lambda e^{-W(x, eta + boundary)} dx.
// The Gibbs measure of the model is its reversible stationary law.

struct Trajectory {
    // jump_times[0] == 0 holds the initial state; strictly increasing.
    std::vector<double> jump_times;
    std::vector<PointPattern> states;
    double end_time = 0.0;

    struct Counters {
        long candidates = 0; // envelope clock ticks
        long births = 0;
        long deaths = 0;
        long rejected = 0; // thinned birth proposals (not jumps)
        long ties = 0;     // floating-point time collisions, broken by order
    } counters;
};

// Exact total jump rate at a fixed state: the death part (one per point)
// plus the birth integral, the latter estimated by Monte Carlo over
// uniform locations.  Always bounded by eta(region) + lambda e^L vol.
Estimate total_rate(const GibbsModel& m, const PointPattern& eta, long samples,
                    CounterRng& rng);

// Gillespie with thinning under the envelope rate
// kappa_bar = eta(region) + lambda e^L vol: each candidate event is a death
// with probability eta(region)/kappa_bar (uniform victim), otherwise a birth
// proposal at a uniform location accepted with probability e^{-(W+L)}.
// Rejected proposals advance time but are not jumps.  The visitor is called
// as visit(time, state) for the initial state and after every realized jump.
// A proposal with W < -L (impossible for a correctly bounded potential)
// aborts the run.
template <class Visitor>
Trajectory::Counters simulate_visit(const GibbsModel& m, PointPattern eta, double t_end,
                                    CounterRng& rng, Visitor&& visit);

Trajectory simulate(const GibbsModel& m, const PointPattern& initial, double t_end,
                    CounterRng& rng);

// Right-continuous lookup: the state at the last jump time <= t.
const PointPattern& state_at(const Trajectory& traj, double t);

// --- implementation ---

namespace detail {
void check_initial_state(const GibbsModel& m, const PointPattern& eta);
[[noreturn]] void envelope_violation(double w, double stability);
} // namespace detail

template <class Visitor>
Trajectory::Counters simulate_visit(const GibbsModel& m, PointPattern eta, double t_end,
                                    CounterRng& rng, Visitor&& visit) {
    detail::check_initial_state(m, eta);
    const double vol = m.region.volume();
    const double birth_envelope = m.lambda * std::exp(m.phi.stability) * vol;
    Trajectory::Counters counters;

    double t = 0.0;
    visit(t, std::as_const(eta));
    for (;;) {
        const double n = static_cast<double>(eta.total());
        const double kappa_bar = n + birth_envelope;
        if (kappa_bar <= 0.0)
            break; // absorbing: empty state and no births possible
        double t_next = t + rng.exponential(kappa_bar);
        if (!(t_next <= t_end))
            break;
        if (t_next <= t) { // exponential draw underflowed to zero width
            ++counters.ties;
            t_next = std::nextafter(t, t_end + 1.0);
            if (!(t_next <= t_end))
                break;
        }
        t = t_next;
        ++counters.candidates;
        if (rng.uniform01() * kappa_bar < n) {
            const long victim = rng.below(eta.total());
            eta.remove(eta.nth_point(victim));
            ++counters.deaths;
            visit(t, std::as_const(eta));
        } else {
            PointLoc x(static_cast<size_t>(m.region.dim));
            for (int i = 0; i < m.region.dim; ++i)
                x[static_cast<size_t>(i)] = rng.uniform(m.region.lo[static_cast<size_t>(i)],
                                                        m.region.hi[static_cast<size_t>(i)]);
            // W(x, eta + boundary) splits over the two patterns.
            const ereal w = influence(x, eta, m.phi) + influence(x, m.boundary, m.phi);
            double accept = 0.0;
            if (energy_finite(w)) {
                if (w < -m.phi.stability - 1e-9)
                    detail::envelope_violation(w, m.phi.stability);
                accept = std::exp(-(w + m.phi.stability));
            }
            if (rng.uniform01() < accept) {
                eta.add(x);
                ++counters.births;
                visit(t, std::as_const(eta));
            } else {
                ++counters.rejected;
            }
        }
    }
    return counters;
}

} // namespace sbd

#endif
