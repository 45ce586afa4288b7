#ifndef SBD_GIBBS_HPP
#define SBD_GIBBS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "sbd/pattern.hpp"
#include "sbd/potential.hpp"
#include "sbd/rng.hpp"
#include "sbd/space.hpp"

namespace sbd {

// Finite-volume Gibbs model: activity, pair potential, bounded box region
// and a fixed boundary pattern.  Only boundary points within `range` of the
// region can interact with it, so the constructor insists the boundary
// lives strictly outside the region and inside that collar — boundary
// conditions are stored pre-truncated and nothing is lost.
struct GibbsModel {
    double lambda = 0.0;
    Potential phi;
    Box region;
    PointPattern boundary;

    GibbsModel() = default;
    GibbsModel(double lambda_, Potential phi_, Box region_, PointPattern boundary_ = {});

    void validate() const; // throws std::invalid_argument on contract violations
};

struct Estimate {
    double value = 0.0;
    double error = 0.0; // certified bound or CI half-width as documented per call
};

// Normalizing constant 1 + sum_n lambda^n/n! * integral over region^n of
// e^{-conditional energy}.
//
// Series mode: term-by-term Monte Carlo up to n_max with a factorial tail
// bound lambda^n e^{1.5 L n} vol^n / n!; refuses (throws) when the tail at
// n_max cannot meet err_request.  Error = tail bound + 3 sigma of the MC.
// Monte Carlo mode: e^{lambda vol} * E[e^{-H}] under a Poisson(lambda)
// process; error = 3 sigma CI half-width.
Estimate partition_function_series(const GibbsModel& m, int n_max, long samples_per_term,
                                   double err_request, CounterRng& rng);
Estimate partition_function_mc(const GibbsModel& m, long samples, CounterRng& rng);

// Poisson process of the given intensity on a box.
PointPattern sample_poisson(double intensity, const Box& region, CounterRng& rng);

// Exact draw from the Gibbs measure by rejection: propose from a Poisson
// process with intensity lambda e^{1.5 L}, accept with probability
// exp(-H - 1.5 L n) which lies in [0,1] by the stability bound.
// attempts_out (optional) reports how many proposals were consumed.
PointPattern sample_exact(const GibbsModel& m, CounterRng& rng, long* attempts_out = nullptr);

// Estimated acceptance probability of the rejection sampler; the exact
// sampler refuses to run (throws std::runtime_error) when a pilot estimate
// falls below min_acceptance.
double rejection_acceptance_pilot(const GibbsModel& m, long pilot, CounterRng& rng);
inline constexpr double min_acceptance = 1e-6;

// Built-in test statistics F(x, eta) for the integral identity below.
struct GnzStatistic {
    enum class Kind { ones, count_equals, exp_influence } kind = Kind::ones;
    Box query;      // for count_equals
    long target = 0;
    static GnzStatistic ones() { return {}; }
    static GnzStatistic count_equals(Box b, long m);
    static GnzStatistic exp_influence();
    double operator()(const PointLoc& x, const PointPattern& eta, const Potential& phi) const;
    std::string name() const;
};

// Checks E[sum_{x in eta} F(x, eta)] = lambda * integral over the region of
// E[e^{-W(x, eta + boundary)} F(x, eta + delta_x)] dx, which characterizes
// the Gibbs measure.  Both sides share each exact sample (paired design),
// so the z-score uses the variance of the per-sample difference.
struct GnzResult {
    double lhs = 0.0, rhs = 0.0, z = 0.0;
    double lhs_se = 0.0, rhs_se = 0.0;
    double diff_se = 0.0; // SE of the per-sample difference (what z divides by)
    long samples = 0;
};
GnzResult gnz_residual(const GibbsModel& m, const GnzStatistic& stat, long samples,
                       CounterRng& rng);

} // namespace sbd

#endif
