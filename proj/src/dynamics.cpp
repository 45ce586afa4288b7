#include "sbd/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sbd/stats.hpp"

namespace sbd {
namespace detail {

void check_initial_state(const GibbsModel& m, const PointPattern& eta) {
    m.validate();
    for (const auto& a : eta.atoms())
        if (!m.region.contains(a.loc))
            throw std::invalid_argument("simulate: initial state not supported in region");
    if (!is_feasible(eta, m.phi))
        throw std::invalid_argument("simulate: initial state is infeasible");
}

void envelope_violation(double w, double stability) {
    std::ostringstream os;
    os << "birth-death envelope violated: influence " << w << " below -L = " << -stability
       << "; the potential's declared stability bound is wrong";
    throw std::runtime_error(os.str());
}

} // namespace detail

Estimate total_rate(const GibbsModel& m, const PointPattern& eta, long samples,
                    CounterRng& rng) {
    detail::check_initial_state(m, eta);
    if (samples < 2)
        throw std::invalid_argument("total_rate: need at least 2 samples");
    const double vol = m.region.volume();
    RunningStat stat;
    for (long s = 0; s < samples; ++s) {
        PointLoc x(static_cast<size_t>(m.region.dim));
        for (int i = 0; i < m.region.dim; ++i)
            x[static_cast<size_t>(i)] = rng.uniform(m.region.lo[static_cast<size_t>(i)],
                                                    m.region.hi[static_cast<size_t>(i)]);
        const ereal w = influence(x, eta, m.phi) + influence(x, m.boundary, m.phi);
        stat.add(energy_finite(w) ? std::exp(-w) : 0.0);
    }
    const double deaths = static_cast<double>(eta.total());
    return {deaths + m.lambda * vol * stat.mean(), m.lambda * vol * 3.0 * stat.se()};
}

Trajectory simulate(const GibbsModel& m, const PointPattern& initial, double t_end,
                    CounterRng& rng) {
    if (!(t_end >= 0.0))
        throw std::invalid_argument("simulate: t_end must be >= 0");
    Trajectory traj;
    traj.end_time = t_end;
    traj.counters = simulate_visit(m, initial, t_end, rng, [&](double t, const PointPattern& s) {
        traj.jump_times.push_back(t);
        traj.states.push_back(s);
    });
    return traj;
}

const PointPattern& state_at(const Trajectory& traj, double t) {
    if (!(t >= 0.0) || !(t <= traj.end_time))
        throw std::out_of_range("state_at: time outside [0, end_time]");
    // Last jump time <= t (right-continuity at the jumps themselves).
    auto it = std::upper_bound(traj.jump_times.begin(), traj.jump_times.end(), t);
    const auto idx = static_cast<size_t>(it - traj.jump_times.begin()) - 1;
    return traj.states[idx];
}

} // namespace sbd
