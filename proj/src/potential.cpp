#include "sbd/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sbd/rng.hpp"
#include "sbd/stats.hpp"

namespace sbd {

std::string kind_name(PotentialKind k) {
    switch (k) {
        case PotentialKind::zero: return "zero";
        case PotentialKind::hard_sphere: return "hard_sphere";
        case PotentialKind::strauss: return "strauss";
        case PotentialKind::square_well: return "square_well";
        case PotentialKind::custom: return "custom";
    }
    return "?";
}

ereal Potential::operator()(const PointLoc& x, const PointLoc& y) const {
    if (kind == PotentialKind::custom) return custom_eval(x, y);
    return radial(dist(x, y));
}

ereal Potential::radial(double d) const {
    switch (kind) {
        case PotentialKind::zero:
            return 0.0;
        case PotentialKind::hard_sphere:
            return d < r ? energy_inf : 0.0;
        case PotentialKind::strauss:
            return d < r ? beta : 0.0;
        case PotentialKind::square_well:
            if (d < r0) return energy_inf;
            if (d < range) return -well_depth;
            return 0.0;
        case PotentialKind::custom:
            throw std::logic_error("radial() not defined for custom potentials");
    }
    return 0.0;
}

Potential make_zero(int dim) {
    Potential p;
    p.kind = PotentialKind::zero;
    p.dim = dim;
    p.range = 0.0;
    p.stability = 0.0;
    return p;
}

Potential make_hard_sphere(int dim, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("hard_sphere: r must be positive");
    Potential p;
    p.kind = PotentialKind::hard_sphere;
    p.dim = dim;
    p.r = r;
    p.range = r;
    p.stability = 0.0; // purely repulsive
    return p;
}

Potential make_strauss(int dim, double r, double beta) {
    if (!(r > 0.0)) throw std::invalid_argument("strauss: r must be positive");
    if (beta < 0.0) throw std::invalid_argument("strauss: beta must be >= 0");
    Potential p;
    p.kind = PotentialKind::strauss;
    p.dim = dim;
    p.r = r;
    p.beta = beta;
    p.range = r;
    p.stability = 0.0;
    return p;
}

double ball_volume(int dim, double radius) {
    double unit = std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
    return unit * std::pow(radius, dim);
}

double sphere_surface(int dim) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim);
}

long packing_bound(int dim, double r0, double R) {
    if (!(r0 > 0.0) || !(R > r0)) throw std::invalid_argument("packing_bound: need 0 < r0 < R");
    double annulus = ball_volume(dim, R) - ball_volume(dim, r0);
    double cube = std::pow(r0 / std::sqrt(double(dim)), dim);
    // small slack so exact ratios (e.g. 2.0 in 1-d) survive rounding
    return long(std::floor(annulus / cube + 1e-9));
}

Potential make_square_well(int dim, double r0, double R, double a, double L_bound) {
    if (!(r0 > 0.0)) throw std::invalid_argument("square_well: r0 must be positive");
    if (!(R > r0)) throw std::invalid_argument("square_well: R must exceed r0");
    if (a < 0.0) throw std::invalid_argument("square_well: a must be >= 0");
    if (L_bound < 0.0) throw std::invalid_argument("square_well: L_bound must be >= 0");
    long M = packing_bound(dim, r0, R);
    if (L_bound < a * double(M) - 1e-12)
        throw std::invalid_argument(
            "square_well: L_bound " + std::to_string(L_bound) + " is below a*M = " +
            std::to_string(a * double(M)) + " (M = " + std::to_string(M) +
            " interacting hard cores can fit in the attraction shell)");
    Potential p;
    p.kind = PotentialKind::square_well;
    p.dim = dim;
    p.r0 = r0;
    p.well_depth = a;
    p.range = R;
    p.stability = L_bound;
    p.stability_certified = false; // user-asserted, gated by the packing bound
    return p;
}

namespace {

// Gauss-Kronrod 7-15 pair on [-1,1]; nodes and weights are the standard
// tabulated values (positive half; symmetric).
const double kr_nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
const double kr_weights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
const double g7_weights[4] = {
    0.129484966168869693270611432679082, // node index 1
    0.279705391489276667901467771423780, // node index 3
    0.381830050505118944950369775488975, // node index 5
    0.417959183673469387755102040816327};// node index 7 (center)

struct Panel {
    double a, b, integral, err;
};

Panel gk15(const std::function<double(double)>& f, double a, double b) {
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double fk = 0.0, fg = 0.0;
    for (int i = 0; i < 8; ++i) {
        double v;
        if (i == 7) {
            v = f(c);
            fk += kr_weights[i] * v;
            fg += g7_weights[3] * v;
        } else {
            double v1 = f(c - h * kr_nodes[i]);
            double v2 = f(c + h * kr_nodes[i]);
            fk += kr_weights[i] * (v1 + v2);
            if (i % 2 == 1) fg += g7_weights[i / 2] * (v1 + v2);
        }
    }
    double integral = fk * h;
    double err = std::fabs((fk - fg) * h);
    return {a, b, integral, err};
}

// Adaptive bisection until the summed error estimate meets tol.
std::pair<double, double> integrate(const std::function<double(double)>& f,
                                    const std::vector<double>& breakpoints, double tol) {
    std::vector<Panel> panels;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
        if (breakpoints[i + 1] > breakpoints[i])
            panels.push_back(gk15(f, breakpoints[i], breakpoints[i + 1]));
    for (int round = 0; round < 60; ++round) {
        double total_err = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < panels.size(); ++i) {
            total_err += panels[i].err;
            if (panels[i].err > panels[worst].err) worst = i;
        }
        if (total_err <= tol || panels.size() > 4000) break;
        Panel p = panels[worst];
        double m = 0.5 * (p.a + p.b);
        panels[worst] = gk15(f, p.a, m);
        panels.push_back(gk15(f, m, p.b));
    }
    KahanSum integral;
    double err = 0.0;
    std::sort(panels.begin(), panels.end(),
              [](const Panel& x, const Panel& y) { return x.a < y.a; });
    for (const auto& p : panels) {
        integral.add(p.integral);
        err += p.err;
    }
    return {integral.value(), err};
}

std::vector<double> radial_breakpoints(const Potential& pot) {
    std::vector<double> bp{0.0};
    if (pot.kind == PotentialKind::square_well) bp.push_back(pot.r0);
    bp.push_back(pot.range);
    return bp;
}

} // namespace

Temperedness weak_temperedness_constant(const Potential& pot, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("weak_temperedness_constant: tol must be > 0");
    Temperedness est;
    est.method = Temperedness::Method::quadrature;
    if (pot.kind == PotentialKind::custom)
        throw std::invalid_argument(
            "weak_temperedness_constant: custom potentials need the Monte Carlo form");
    if (pot.kind == PotentialKind::zero || pot.range <= 0.0) return est; // all zeros

    double surf = sphere_surface(pot.dim);
    auto shell = [&](double t) { return surf * std::pow(t, pot.dim - 1); };
    auto f_hat = [&](double t) {
        ereal v = pot.radial(t);
        return (1.0 - exp_neg(std::fabs(v))) * shell(t);
    };
    auto f_full = [&](double t) {
        ereal v = pot.radial(t);
        return std::fabs(1.0 - exp_neg(v)) * shell(t);
    };
    auto bp = radial_breakpoints(pot);
    auto [ch, eh] = integrate(f_hat, bp, 0.5 * tol);
    auto [cf, ef] = integrate(f_full, bp, 0.5 * tol);
    est.c_hat = ch;
    est.c_full = cf;
    est.abs_error = std::max(eh, ef);
    return est;
}

Temperedness weak_temperedness_constant_mc(const Potential& pot,
                                           const std::vector<PointLoc>& centers,
                                           long samples, uint64_t seed) {
    if (centers.empty()) throw std::invalid_argument("temperedness MC: need at least one center");
    if (samples < 100) throw std::invalid_argument("temperedness MC: too few samples");
    Temperedness est;
    est.method = Temperedness::Method::monte_carlo;
    if (pot.range <= 0.0) return est;

    double R = pot.range;
    double box_vol = std::pow(2.0 * R, pot.dim);
    CounterRng rng = replica_stream(seed, 0, 0x7e0bULL);
    double worst_hat = 0.0, worst_full = 0.0, worst_err = 0.0;
    for (const auto& x : centers) {
        RunningStat s_hat, s_full;
        PointLoc y(x.size());
        for (long i = 0; i < samples; ++i) {
            for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] + rng.uniform(-R, R);
            ereal v = pot(x, y);
            s_hat.add((1.0 - exp_neg(std::fabs(v))) * box_vol);
            s_full.add(std::fabs(1.0 - exp_neg(v)) * box_vol);
        }
        if (s_hat.mean() > worst_hat) {
            worst_hat = s_hat.mean();
            worst_full = s_full.mean();
            worst_err = 3.0 * std::max(s_hat.se(), s_full.se());
        }
    }
    est.c_hat = worst_hat;
    est.c_full = worst_full;
    est.abs_error = worst_err;
    return est;
}

double uniqueness_threshold(const Potential& pot, const Temperedness& est) {
    double c = est.c_hat + est.abs_error;
    if (c <= 0.0) return energy_inf;
    return 1.0 / (std::exp(pot.stability) * c);
}

double penrose_ruelle_threshold(const Potential& pot, const Temperedness& est) {
    if (est.c_full <= 0.0) return energy_inf;
    return 1.0 / (std::exp(pot.stability + 1.0) * est.c_full);
}

} // namespace sbd
