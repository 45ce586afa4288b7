#include "sbd/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "sbd/stats.hpp"

namespace sbd {
namespace detail {

void check_coupled_specs(const GibbsModel& m1, const GibbsModel& m2) {
    m1.validate();
    m2.validate();
    if (m1.lambda != m2.lambda)
        throw std::invalid_argument("coupled chains must share the activity");
    if (!(m1.region.dim == m2.region.dim && m1.region.lo == m2.region.lo &&
          m1.region.hi == m2.region.hi))
        throw std::invalid_argument("coupled chains must share the region");
    const Potential &a = m1.phi, &b = m2.phi;
    if (a.kind == PotentialKind::custom || b.kind == PotentialKind::custom)
        throw std::invalid_argument(
            "coupled chains cannot verify that two custom potentials agree");
    if (!(a.kind == b.kind && a.dim == b.dim && a.range == b.range &&
          a.stability == b.stability && a.r == b.r && a.beta == b.beta && a.r0 == b.r0 &&
          a.well_depth == b.well_depth))
        throw std::invalid_argument("coupled chains must share the potential");
}

} // namespace detail

CoupledState make_coupled(const PointPattern& eta1, const PointPattern& eta2) {
    CoupledState st;
    st.shared = intersect(eta1, eta2);
    st.excl1 = subtract(eta1, eta2);
    st.excl2 = subtract(eta2, eta1);
    return st;
}

long disagreement_count(const CoupledState& state) {
    return state.excl1.total() + state.excl2.total();
}

CoupledTrajectory simulate_coupled(const GibbsModel& m1, const GibbsModel& m2,
                                   const PointPattern& eta1, const PointPattern& eta2,
                                   double t_end, CounterRng& rng) {
    if (!(t_end >= 0.0))
        throw std::invalid_argument("simulate_coupled: t_end must be >= 0");
    CoupledTrajectory traj;
    traj.end_time = t_end;
    traj.counters = simulate_coupled_visit(
        m1, m2, eta1, eta2, t_end, rng, [&](double t, const CoupledState& s) {
            traj.jump_times.push_back(t);
            traj.states.push_back(s);
            if (disagreement_count(s) == 0 && !(traj.coalescence_time <= t))
                traj.coalescence_time = t;
        });
    return traj;
}

const CoupledState& coupled_state_at(const CoupledTrajectory& traj, double t) {
    if (!(t >= 0.0) || !(t <= traj.end_time))
        throw std::out_of_range("coupled_state_at: time outside [0, end_time]");
    auto it = std::upper_bound(traj.jump_times.begin(), traj.jump_times.end(), t);
    const auto idx = static_cast<size_t>(it - traj.jump_times.begin()) - 1;
    return traj.states[idx];
}

double contraction_rate(const GibbsModel& m, const Temperedness& est) {
    m.validate();
    return 1.0 - m.lambda * std::exp(m.phi.stability) * (est.c_hat + est.abs_error);
}

double fitted_contraction_rate(const std::vector<double>& times,
                               const std::vector<double>& mean_f) {
    if (times.size() != mean_f.size() || times.size() < 2)
        throw std::invalid_argument("fitted_contraction_rate: need >= 2 matched samples");
    // Ordinary least squares of log(mean_f) on time; slope is -delta.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long n = 0;
    for (size_t i = 0; i < times.size(); ++i) {
        if (!(mean_f[i] > 0.0))
            continue; // zero means carry no log-scale information
        const double y = std::log(mean_f[i]);
        sx += times[i];
        sy += y;
        sxx += times[i] * times[i];
        sxy += times[i] * y;
        ++n;
    }
    if (n < 2)
        throw std::invalid_argument("fitted_contraction_rate: fewer than 2 positive means");
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    if (denom == 0.0)
        throw std::invalid_argument("fitted_contraction_rate: degenerate time grid");
    return -(static_cast<double>(n) * sxy - sx * sy) / denom;
}

TvEstimates tv_estimates(const std::vector<CoupledTrajectory>& runs, double t,
                         const std::vector<Box>& query_boxes) {
    if (runs.empty())
        throw std::invalid_argument("tv_estimates: empty run set");
    for (const auto& r : runs)
        if (r.end_time < t)
            throw std::invalid_argument("tv_estimates: a run ends before the query time");

    TvEstimates out;
    out.runs = static_cast<long>(runs.size());
    long differ = 0;
    // Per box, per count value: occurrence counts in each chain.
    std::vector<std::map<long, std::pair<long, long>>> hists(query_boxes.size());
    for (const auto& r : runs) {
        const CoupledState& s = coupled_state_at(r, t);
        if (disagreement_count(s) != 0)
            ++differ;
        for (size_t b = 0; b < query_boxes.size(); ++b) {
            const long shared_n = s.shared.count_in(query_boxes[b]);
            hists[b][shared_n + s.excl1.count_in(query_boxes[b])].first++;
            hists[b][shared_n + s.excl2.count_in(query_boxes[b])].second++;
        }
    }
    const double n = static_cast<double>(runs.size());
    out.non_coalesced = static_cast<double>(differ) / n;
    out.se = binomial_se(out.non_coalesced, runs.size());
    for (const auto& h : hists) {
        double worst = 0.0;
        for (const auto& [count, pair] : h)
            worst = std::max(worst,
                             std::abs(static_cast<double>(pair.first - pair.second)) / n);
        out.lower_bounds.push_back(worst);
    }
    return out;
}

} // namespace sbd
