#include "sbd/gibbs.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sbd/stats.hpp"

namespace sbd {

GibbsModel::GibbsModel(double lambda_, Potential phi_, Box region_, PointPattern boundary_)
    : lambda(lambda_), phi(std::move(phi_)), region(std::move(region_)),
      boundary(std::move(boundary_)) {
    validate();
}

void GibbsModel::validate() const {
    std::vector<std::string> bad;
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        bad.push_back("activity must be a finite number >= 0");
    if (phi.dim != region.dim)
        bad.push_back("potential dimension " + std::to_string(phi.dim) +
                      " does not match region dimension " + std::to_string(region.dim));
    if (!(region.volume() > 0.0))
        bad.push_back("region must have positive volume");
    if (bad.empty()) {
        // Boundary points beyond the interaction range cannot influence the
        // region, so the stored boundary must already be truncated to the
        // open collar; anything else is a construction mistake upstream.
        for (const auto& a : boundary.atoms()) {
            if (region.contains(a.loc)) {
                bad.push_back("boundary atom lies inside the region");
                break;
            }
        }
        for (const auto& a : boundary.atoms()) {
            if (!region.contains(a.loc) && !(region.distance(a.loc) < phi.range)) {
                bad.push_back("boundary atom lies outside the interaction collar "
                              "(distance to region must be < " +
                              std::to_string(phi.range) + ")");
                break;
            }
        }
        if (!is_feasible(boundary, phi))
            bad.push_back("boundary pattern is infeasible (infinite self-energy)");
    }
    if (!bad.empty()) {
        std::ostringstream os;
        os << "invalid Gibbs model:";
        for (const auto& b : bad)
            os << "\n  - " << b;
        throw std::invalid_argument(os.str());
    }
}

namespace {

PointLoc uniform_point(const Box& b, CounterRng& rng) {
    PointLoc x(static_cast<size_t>(b.dim));
    for (int i = 0; i < b.dim; ++i)
        x[static_cast<size_t>(i)] = rng.uniform(b.lo[static_cast<size_t>(i)],
                                                b.hi[static_cast<size_t>(i)]);
    return x;
}

// exp(-H_Lambda(eta | xi) - (3/2) L n), the rejection acceptance probability;
// lies in [0,1] because the conditional energy is bounded below by -(3/2) L n.
double acceptance_probability(const GibbsModel& m, const PointPattern& eta) {
    const ereal h = conditional_energy(eta, m.boundary, m.region, m.phi);
    if (!energy_finite(h))
        return 0.0;
    const double n = static_cast<double>(eta.total());
    return std::exp(-h - 1.5 * m.phi.stability * n);
}

} // namespace

PointPattern sample_poisson(double intensity, const Box& region, CounterRng& rng) {
    PointPattern eta;
    const long n = rng.poisson(intensity * region.volume());
    for (long i = 0; i < n; ++i)
        eta.add(uniform_point(region, rng));
    return eta;
}

Estimate partition_function_series(const GibbsModel& m, int n_max, long samples_per_term,
                                   double err_request, CounterRng& rng) {
    m.validate();
    if (n_max < 0 || samples_per_term < 1)
        throw std::invalid_argument("partition_function_series: need n_max >= 0 and samples >= 1");
    const double vol = m.region.volume();
    const double x = m.lambda * std::exp(1.5 * m.phi.stability) * vol;

    // Tail of sum x^n / n! past n_max: once the term ratio x/(n+1) drops
    // below one the remainder is dominated by a geometric series.
    double tail = 0.0;
    if (x > 0.0) {
        const double ratio = x / static_cast<double>(n_max + 2);
        if (ratio >= 1.0)
            tail = stat_inf();
        else {
            double first = std::exp(static_cast<double>(n_max + 1) * std::log(x) -
                                    std::lgamma(static_cast<double>(n_max + 2)));
            tail = first / (1.0 - ratio);
        }
    }
    if (!(tail <= err_request)) {
        std::ostringstream os;
        os << "partition_function_series: truncation tail bound " << tail << " at n_max=" << n_max
           << " exceeds requested error " << err_request
           << "; raise n_max or use the Monte Carlo mode";
        throw std::runtime_error(os.str());
    }

    // Term n=0 contributes exactly 1.  Each further term
    // lambda^n vol^n / n! * mean of e^{-H} over uniform n-tuples.
    KahanSum total;
    total.add(1.0);
    double var_sum = 0.0;
    double log_coeff = 0.0; // log(lambda^n vol^n / n!)
    for (int n = 1; n <= n_max; ++n) {
        if (m.lambda == 0.0)
            break;
        log_coeff += std::log(m.lambda * vol) - std::log(static_cast<double>(n));
        const double coeff = std::exp(log_coeff);
        if (coeff == 0.0)
            break;
        RunningStat stat;
        for (long s = 0; s < samples_per_term; ++s) {
            PointPattern eta;
            for (int i = 0; i < n; ++i)
                eta.add(uniform_point(m.region, rng));
            const ereal h = conditional_energy(eta, m.boundary, m.region, m.phi);
            stat.add(energy_finite(h) ? std::exp(-h) : 0.0);
        }
        total.add(coeff * stat.mean());
        const double se = coeff * stat.se();
        var_sum += se * se;
    }
    return {total.value(), tail + 3.0 * std::sqrt(var_sum)};
}

Estimate partition_function_mc(const GibbsModel& m, long samples, CounterRng& rng) {
    m.validate();
    if (samples < 2)
        throw std::invalid_argument("partition_function_mc: need at least 2 samples");
    // Under a Poisson process of intensity lambda the density of the Gibbs
    // weight integrates to Xi * e^{-lambda vol}, so Xi = e^{lambda vol} E[e^{-H}].
    const double vol = m.region.volume();
    RunningStat stat;
    for (long s = 0; s < samples; ++s) {
        PointPattern eta = sample_poisson(m.lambda, m.region, rng);
        const ereal h = conditional_energy(eta, m.boundary, m.region, m.phi);
        stat.add(energy_finite(h) ? std::exp(-h) : 0.0);
    }
    const double scale = std::exp(m.lambda * vol);
    return {scale * stat.mean(), scale * 3.0 * stat.se()};
}

double rejection_acceptance_pilot(const GibbsModel& m, long pilot, CounterRng& rng) {
    m.validate();
    if (pilot < 1)
        throw std::invalid_argument("rejection_acceptance_pilot: need pilot >= 1");
    const double intensity = m.lambda * std::exp(1.5 * m.phi.stability);
    RunningStat stat;
    for (long s = 0; s < pilot; ++s)
        stat.add(acceptance_probability(m, sample_poisson(intensity, m.region, rng)));
    return stat.mean();
}

PointPattern sample_exact(const GibbsModel& m, CounterRng& rng, long* attempts_out) {
    m.validate();
    const double intensity = m.lambda * std::exp(1.5 * m.phi.stability);
    RunningStat observed;
    long attempts = 0;
    // Degeneracy gate: after enough consecutive rejections, the running mean
    // of the acceptance probabilities is itself a pilot estimate.
    long next_check = 1000;
    for (;;) {
        ++attempts;
        PointPattern eta = sample_poisson(intensity, m.region, rng);
        const double p = acceptance_probability(m, eta);
        observed.add(p);
        if (rng.uniform01() < p) {
            if (attempts_out)
                *attempts_out = attempts;
            return eta;
        }
        if (attempts >= next_check) {
            if (observed.mean() < min_acceptance) {
                std::ostringstream os;
                os << "sample_exact: estimated acceptance " << observed.mean() << " after "
                   << attempts << " proposals is below " << min_acceptance
                   << "; shrink the region or lower the activity";
                throw std::runtime_error(os.str());
            }
            next_check *= 10;
        }
    }
}

GnzStatistic GnzStatistic::count_equals(Box b, long m) {
    GnzStatistic s;
    s.kind = Kind::count_equals;
    s.query = std::move(b);
    s.target = m;
    return s;
}

GnzStatistic GnzStatistic::exp_influence() {
    GnzStatistic s;
    s.kind = Kind::exp_influence;
    return s;
}

double GnzStatistic::operator()(const PointLoc& x, const PointPattern& eta,
                                const Potential& phi) const {
    switch (kind) {
    case Kind::ones:
        return 1.0;
    case Kind::count_equals:
        return eta.count_in(query) == target ? 1.0 : 0.0;
    case Kind::exp_influence: {
        const ereal w = influence(x, eta, phi);
        return energy_finite(w) ? std::exp(-w) : 0.0;
    }
    }
    return 0.0;
}

std::string GnzStatistic::name() const {
    switch (kind) {
    case Kind::ones:
        return "ones";
    case Kind::count_equals:
        return "count_equals(m=" + std::to_string(target) + ")";
    case Kind::exp_influence:
        return "exp_influence";
    }
    return "?";
}

GnzResult gnz_residual(const GibbsModel& m, const GnzStatistic& stat, long samples,
                       CounterRng& rng) {
    m.validate();
    if (samples < 2)
        throw std::invalid_argument("gnz_residual: need at least 2 samples");
    const double vol = m.region.volume();
    // A few query locations per sample tame the variance of the integral
    // side without breaking the per-sample pairing.
    constexpr int queries = 4;
    RunningStat lhs_stat, rhs_stat, diff_stat;
    for (long s = 0; s < samples; ++s) {
        const PointPattern eta = sample_exact(m, rng);

        double lhs = 0.0;
        for (const auto& a : eta.atoms())
            lhs += static_cast<double>(a.mult) * stat(a.loc, eta, m.phi);

        double rhs = 0.0;
        for (int q = 0; q < queries; ++q) {
            const PointLoc x = uniform_point(m.region, rng);
            const ereal w = influence(x, add(eta, m.boundary), m.phi);
            if (!energy_finite(w))
                continue; // weight e^{-inf} == 0
            PointPattern plus = eta;
            plus.add(x);
            rhs += std::exp(-w) * stat(x, plus, m.phi);
        }
        rhs *= m.lambda * vol / queries;

        lhs_stat.add(lhs);
        rhs_stat.add(rhs);
        diff_stat.add(lhs - rhs);
    }
    GnzResult r;
    r.lhs = lhs_stat.mean();
    r.rhs = rhs_stat.mean();
    r.lhs_se = lhs_stat.se();
    r.rhs_se = rhs_stat.se();
    r.samples = samples;
    const double se = diff_stat.se();
    r.diff_se = se;
    if (se > 0.0)
        r.z = diff_stat.mean() / se;
    else
        r.z = diff_stat.mean() == 0.0 ? 0.0 : (diff_stat.mean() > 0 ? stat_inf() : -stat_inf());
    return r;
}

} // namespace sbd
