#ifndef SBD_POTENTIAL_HPP
#define SBD_POTENTIAL_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sbd/ereal.hpp"
#include "sbd/pattern.hpp"

namespace sbd {

enum class PotentialKind { zero, hard_sphere, strauss, square_well, custom };

std::string kind_name(PotentialKind k);

// Symmetric pair potential with certified constants:
//   range:     phi(x,y) = 0 whenever |x-y| >= range
//   stability: adding one point to a feasible pattern lowers the total
//              energy by at most `stability` (exact for the built-in kinds;
//              user-asserted for square_well and custom)
struct Potential {
    PotentialKind kind = PotentialKind::zero;
    int dim = 1;
    double range = 0.0;
    double stability = 0.0;
    bool stability_certified = true;

    // built-in parameters (meaning depends on kind)
    double r = 0.0;          // hard-core / interaction radius
    double beta = 0.0;       // strauss step height
    double r0 = 0.0;         // square_well core radius
    double well_depth = 0.0; // square_well attraction a

    // custom potentials supply the evaluation directly
    std::function<ereal(const PointLoc&, const PointLoc&)> custom_eval;
    bool translation_invariant = true;

    ereal operator()(const PointLoc& x, const PointLoc& y) const;
    ereal radial(double distance) const; // built-ins only
};

Potential make_zero(int dim);
Potential make_hard_sphere(int dim, double r);
Potential make_strauss(int dim, double r, double beta);

// square_well: hard core below r0, constant attraction -a on [r0, R),
// zero beyond.  L_bound is validated against a*packing_bound(dim,r0,R)
// and rejected when below it.
Potential make_square_well(int dim, double r0, double R, double a, double L_bound);

// Volume-division bound on how many points with pairwise distance >= r0
// fit in the annulus r0 <= |y| < R: each point owns a disjoint cube of
// side r0/sqrt(d), so the annulus volume divided by the cube volume caps
// the count.  This is a sanity gate for user-supplied stability bounds,
// not a certificate; the simulator independently aborts if it ever
// witnesses an influence below -L.
long packing_bound(int dim, double r0, double R);

double ball_volume(int dim, double radius);
double sphere_surface(int dim); // surface measure of the unit sphere in R^d

struct Temperedness {
    double c_hat = 0.0;     // sup_x integral of 1 - e^{-|phi(x,y)|} dy
    double c_full = 0.0;    // sup_x integral of |1 - e^{-phi(x,y)}| dy
    double abs_error = 0.0; // certified bound (quadrature) or CI half-width (MC)
    enum class Method { quadrature, monte_carlo } method = Method::quadrature;
};

// Deterministic adaptive quadrature on the radial profile for the
// translation-invariant built-ins; tol is the requested absolute error.
Temperedness weak_temperedness_constant(const Potential& pot, double tol);

// Monte Carlo fallback for custom potentials: sup over the supplied
// centers, ball integral by uniform sampling, error = 3-sigma CI.
Temperedness weak_temperedness_constant_mc(const Potential& pot,
                                           const std::vector<PointLoc>& centers,
                                           long samples, uint64_t seed);

// Activity threshold 1/(e^L * (c_hat + abs_error)); +inf when the
// interaction vanishes.  Uses the upper confidence bound so the reported
// threshold is conservative.
double uniqueness_threshold(const Potential& pot, const Temperedness& est);

// Classical comparison value 1/(e^{L+1} * c_full).
double penrose_ruelle_threshold(const Potential& pot, const Temperedness& est);

} // namespace sbd

#endif
