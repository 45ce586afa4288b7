#ifndef SBD_STATS_HPP
#define SBD_STATS_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sbd {

// Compensated (Kahan) accumulator; used wherever a sum must not depend on
// platform-specific reassociation.
class KahanSum {
  public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

  private:
    double s_ = 0.0, c_ = 0.0;
};

// Streaming mean/variance (Welford).
class RunningStat {
  public:
    void add(double x) {
        ++n_;
        double d = x - mean_;
        mean_ += d / double(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / double(n_ - 1) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }
    double se() const { return n_ > 0 ? stddev() / std::sqrt(double(n_)) : 0.0; }

  private:
    std::size_t n_ = 0;
    double mean_ = 0.0, m2_ = 0.0;
};

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series expansion (x < a+1).
inline double gamma_p_series(double a, double x) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x) by continued fraction (x >= a+1).
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace detail

// P(a,x) = gamma(a,x)/Gamma(a)
inline double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: bad args");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_cf(a, x);
}

inline double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_q: bad args");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_cf(a, x);
}

// Survival function of chi-squared with df degrees of freedom.
inline double chi2_sf(double stat, int df) {
    if (df <= 0) throw std::invalid_argument("chi2_sf: df <= 0");
    if (stat <= 0.0) return 1.0;
    return gamma_q(0.5 * double(df), 0.5 * stat);
}

// Standard error of a binomial proportion estimate.
inline double binomial_se(double phat, std::size_t n) {
    if (n == 0) return 0.0;
    return std::sqrt(phat * (1.0 - phat) / double(n));
}

// Pearson chi-squared goodness-of-fit of observed counts vs probabilities.
// Bins with expected count below min_expected are pooled into the last
// qualifying bin.  Returns (stat, df, p); throws when pooling leaves < 2 bins.
struct Chi2Result {
    double stat;
    int df;
    double p;
};

inline double stat_inf() { return std::numeric_limits<double>::infinity(); }

inline Chi2Result chi2_gof(const std::vector<double>& observed,
                           const std::vector<double>& probs,
                           double total, double min_expected = 5.0) {
    if (observed.size() != probs.size())
        throw std::invalid_argument("chi2_gof: size mismatch");
    std::vector<double> obs, exp;
    double o_pool = 0.0, e_pool = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        double e = probs[i] * total;
        if (e < min_expected) {
            o_pool += observed[i];
            e_pool += e;
        } else {
            obs.push_back(observed[i]);
            exp.push_back(e);
        }
    }
    if (e_pool > 0.0) {
        obs.push_back(o_pool);
        exp.push_back(e_pool);
    }
    if (obs.size() < 2) throw std::runtime_error("chi2_gof: too few usable bins");
    double stat = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (exp[i] <= 0.0) {
            if (obs[i] > 0.0) return {stat_inf(), int(obs.size()) - 1, 0.0};
            continue;
        }
        double d = obs[i] - exp[i];
        stat += d * d / exp[i];
    }
    int df = int(obs.size()) - 1;
    return {stat, df, chi2_sf(stat, df)};
}

// Two-sample chi-squared homogeneity test on matched count vectors.
inline Chi2Result chi2_two_sample(const std::vector<double>& a,
                                  const std::vector<double>& b,
                                  double min_expected = 5.0) {
    if (a.size() != b.size()) throw std::invalid_argument("chi2_two_sample: size mismatch");
    double na = 0.0, nb = 0.0;
    for (double v : a) na += v;
    for (double v : b) nb += v;
    if (na == 0.0 || nb == 0.0) throw std::runtime_error("chi2_two_sample: empty sample");
    // pool small bins (by combined expected count under homogeneity)
    std::vector<double> pa, pb;
    double qa = 0.0, qb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double tot = a[i] + b[i];
        if (tot * na / (na + nb) < min_expected || tot * nb / (na + nb) < min_expected) {
            qa += a[i];
            qb += b[i];
        } else {
            pa.push_back(a[i]);
            pb.push_back(b[i]);
        }
    }
    if (qa + qb > 0.0) {
        pa.push_back(qa);
        pb.push_back(qb);
    }
    if (pa.size() < 2) throw std::runtime_error("chi2_two_sample: too few usable bins");
    double stat = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        double tot = pa[i] + pb[i];
        double ea = tot * na / (na + nb), eb = tot * nb / (na + nb);
        if (ea > 0.0) stat += (pa[i] - ea) * (pa[i] - ea) / ea;
        if (eb > 0.0) stat += (pb[i] - eb) * (pb[i] - eb) / eb;
    }
    int df = int(pa.size()) - 1;
    return {stat, df, chi2_sf(stat, df)};
}

} // namespace sbd

#endif
