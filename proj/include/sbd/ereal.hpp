#ifndef SBD_EREAL_HPP
#define SBD_EREAL_HPP

#include <cmath>
#include <limits>

namespace sbd {

// Energies live on the extended half-line (-inf, +inf].  We use IEEE
// doubles with +inf as the hard-core marker: the usual ordering is total
// on this set and std::exp(-inf) is exactly +0, so hard cores yield
// exact-zero acceptance probabilities rather than underflow artifacts.
// NaN is never produced as long as +inf is only ever added to finite
// values or to itself, which the energy routines guarantee.
using ereal = double;

inline constexpr ereal energy_inf = std::numeric_limits<double>::infinity();

inline bool energy_finite(ereal e) { return std::isfinite(e); }

// e^{-w} with the convention e^{-inf} == 0 (exact)
inline double exp_neg(ereal w) { return std::exp(-w); }

} // namespace sbd

#endif
