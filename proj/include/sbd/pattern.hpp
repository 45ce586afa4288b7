#ifndef SBD_PATTERN_HPP
#define SBD_PATTERN_HPP

#include <vector>

#include "sbd/ereal.hpp"
#include "sbd/space.hpp"

namespace sbd {

struct Potential; // potential.hpp

using PointLoc = std::vector<double>;

// Finite counting measure on R^d: a multiset of located points.  Locations
// are compared by exact bit equality — in the simulators two points are
// only ever "the same" when one was literally copied from the other
// (shared births in the coupling), so no epsilon merging is wanted.
struct Atom {
    PointLoc loc;
    long mult = 1;
};

class PointPattern {
  public:
    PointPattern() = default;
    explicit PointPattern(std::vector<Atom> atoms);

    static PointPattern single(PointLoc x) { return PointPattern({Atom{std::move(x), 1}}); }

    const std::vector<Atom>& atoms() const { return atoms_; }
    bool empty() const { return atoms_.empty(); }
    long total() const; // sum of multiplicities

    long multiplicity(const PointLoc& x) const;
    long count_in(const Box& region) const;

    void add(const PointLoc& x, long mult = 1);    // + mult * delta_x
    void remove(const PointLoc& x, long mult = 1); // throws if not present

    // The point at position `index` in multiplicity order (0-based across
    // the total count); used for uniform death selection.
    const PointLoc& nth_point(long index) const;

    bool operator==(const PointPattern& other) const; // equality as measures

  private:
    std::vector<Atom> atoms_;
};

// Lattice-style algebra (per-location min / max / clamped difference).
PointPattern intersect(const PointPattern& a, const PointPattern& b);
PointPattern unite(const PointPattern& a, const PointPattern& b);
PointPattern subtract(const PointPattern& a, const PointPattern& b);
PointPattern sym_diff(const PointPattern& a, const PointPattern& b);
PointPattern add(const PointPattern& a, const PointPattern& b); // measure sum

PointPattern restrict_to(const PointPattern& a, const Box& region);

double dist(const PointLoc& a, const PointLoc& b);

// Total interaction energy: sum of the pair potential over unordered pairs
// of distinct points, multiplicities included (m points at one location
// contribute m(m-1)/2 self-pairs).  Empty pattern has energy 0.  The pair
// order is canonical (atoms sorted lexicographically) and the sum is
// compensated, so the result is reproducible across platforms.
ereal energy(const PointPattern& eta, const Potential& phi);

// W(x, eta) = sum over atoms of mult * phi(x, loc); the one-point energy
// increment: energy(eta + delta_x) = energy(eta) + influence(x, eta).
ereal influence(const PointLoc& x, const PointPattern& eta, const Potential& phi);

// Energy of eta inside the region given fixed boundary points outside it:
//   (1/2) sum_{x in eta} W(x, eta - delta_x)  +  sum_{x in eta} W(x, boundary).
// Requires eta supported in region and boundary supported outside it.
ereal conditional_energy(const PointPattern& eta, const PointPattern& boundary,
                         const Box& region, const Potential& phi);

// True iff no unordered pair (multiplicity included) has infinite potential;
// for pair potentials this is exactly "every sub-pattern has finite energy".
bool is_feasible(const PointPattern& eta, const Potential& phi);

} // namespace sbd

#endif
