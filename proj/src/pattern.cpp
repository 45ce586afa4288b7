#include "sbd/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sbd/potential.hpp"
#include "sbd/stats.hpp"

namespace sbd {

namespace {

bool loc_less(const PointLoc& a, const PointLoc& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<Atom> sorted_atoms(std::vector<Atom> atoms) {
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& x, const Atom& y) { return loc_less(x.loc, y.loc); });
    return atoms;
}

} // namespace

PointPattern::PointPattern(std::vector<Atom> atoms) {
    for (auto& a : atoms) {
        if (a.mult <= 0) throw std::invalid_argument("PointPattern: multiplicity must be positive");
        add(a.loc, a.mult);
    }
}

long PointPattern::total() const {
    long t = 0;
    for (const auto& a : atoms_) t += a.mult;
    return t;
}

long PointPattern::multiplicity(const PointLoc& x) const {
    for (const auto& a : atoms_)
        if (a.loc == x) return a.mult;
    return 0;
}

long PointPattern::count_in(const Box& region) const {
    long t = 0;
    for (const auto& a : atoms_)
        if (region.contains(a.loc)) t += a.mult;
    return t;
}

void PointPattern::add(const PointLoc& x, long mult) {
    if (mult <= 0) throw std::invalid_argument("PointPattern::add: multiplicity must be positive");
    for (auto& a : atoms_) {
        if (a.loc == x) {
            a.mult += mult;
            return;
        }
    }
    atoms_.push_back(Atom{x, mult});
}

void PointPattern::remove(const PointLoc& x, long mult) {
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        if (atoms_[i].loc == x) {
            if (atoms_[i].mult < mult)
                throw std::invalid_argument("PointPattern::remove: multiplicity underflow");
            atoms_[i].mult -= mult;
            if (atoms_[i].mult == 0) {
                atoms_[i] = atoms_.back();
                atoms_.pop_back();
            }
            return;
        }
    }
    throw std::invalid_argument("PointPattern::remove: point not present");
}

const PointLoc& PointPattern::nth_point(long index) const {
    for (const auto& a : atoms_) {
        if (index < a.mult) return a.loc;
        index -= a.mult;
    }
    throw std::out_of_range("PointPattern::nth_point: index past total count");
}

bool PointPattern::operator==(const PointPattern& other) const {
    if (atoms_.size() != other.atoms_.size()) return false;
    for (const auto& a : atoms_)
        if (other.multiplicity(a.loc) != a.mult) return false;
    return true;
}

namespace {

// generic per-location combine; f(ma, mb) -> multiplicity in the result
template <class F>
PointPattern combine(const PointPattern& a, const PointPattern& b, F f) {
    std::vector<Atom> out;
    for (const auto& at : a.atoms()) {
        long m = f(at.mult, b.multiplicity(at.loc));
        if (m > 0) out.push_back(Atom{at.loc, m});
    }
    for (const auto& bt : b.atoms()) {
        if (a.multiplicity(bt.loc) > 0) continue; // handled above
        long m = f(0, bt.mult);
        if (m > 0) out.push_back(Atom{bt.loc, m});
    }
    return PointPattern(std::move(out));
}

} // namespace

PointPattern intersect(const PointPattern& a, const PointPattern& b) {
    return combine(a, b, [](long x, long y) { return std::min(x, y); });
}

PointPattern unite(const PointPattern& a, const PointPattern& b) {
    return combine(a, b, [](long x, long y) { return std::max(x, y); });
}

PointPattern subtract(const PointPattern& a, const PointPattern& b) {
    return combine(a, b, [](long x, long y) { return std::max(0L, x - y); });
}

PointPattern sym_diff(const PointPattern& a, const PointPattern& b) {
    return combine(a, b, [](long x, long y) { return std::labs(x - y); });
}

PointPattern add(const PointPattern& a, const PointPattern& b) {
    return combine(a, b, [](long x, long y) { return x + y; });
}

PointPattern restrict_to(const PointPattern& a, const Box& region) {
    std::vector<Atom> out;
    for (const auto& at : a.atoms())
        if (region.contains(at.loc)) out.push_back(at);
    return PointPattern(std::move(out));
}

double dist(const PointLoc& a, const PointLoc& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

ereal energy(const PointPattern& eta, const Potential& phi) {
    const auto atoms = sorted_atoms(eta.atoms());
    KahanSum sum;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        // self-pairs of a multiple point
        if (atoms[i].mult > 1) {
            ereal v = phi(atoms[i].loc, atoms[i].loc);
            if (!energy_finite(v)) return energy_inf;
            sum.add(0.5 * double(atoms[i].mult) * double(atoms[i].mult - 1) * v);
        }
        for (std::size_t j = i + 1; j < atoms.size(); ++j) {
            ereal v = phi(atoms[i].loc, atoms[j].loc);
            if (!energy_finite(v)) return energy_inf;
            if (v != 0.0) sum.add(double(atoms[i].mult) * double(atoms[j].mult) * v);
        }
    }
    return sum.value();
}

ereal influence(const PointLoc& x, const PointPattern& eta, const Potential& phi) {
    const auto atoms = sorted_atoms(eta.atoms());
    KahanSum sum;
    for (const auto& a : atoms) {
        ereal v = phi(x, a.loc);
        if (!energy_finite(v)) return energy_inf;
        if (v != 0.0) sum.add(double(a.mult) * v);
    }
    return sum.value();
}

ereal conditional_energy(const PointPattern& eta, const PointPattern& boundary,
                         const Box& region, const Potential& phi) {
    for (const auto& a : eta.atoms())
        if (!region.contains(a.loc))
            throw std::invalid_argument("conditional_energy: pattern not supported in region");
    for (const auto& a : boundary.atoms())
        if (region.contains(a.loc))
            throw std::invalid_argument("conditional_energy: boundary intersects region");

    const auto atoms = sorted_atoms(eta.atoms());
    KahanSum sum;
    for (const auto& a : atoms) {
        // W(x, eta - delta_x): remove one copy of x from its own atom
        PointPattern rest(atoms);
        rest.remove(a.loc, 1);
        ereal w = influence(a.loc, rest, phi);
        if (!energy_finite(w)) return energy_inf;
        sum.add(0.5 * double(a.mult) * w);
        ereal wb = influence(a.loc, boundary, phi);
        if (!energy_finite(wb)) return energy_inf;
        if (wb != 0.0) sum.add(double(a.mult) * wb);
    }
    return sum.value();
}

bool is_feasible(const PointPattern& eta, const Potential& phi) {
    const auto& atoms = eta.atoms();
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (atoms[i].mult > 1 && !energy_finite(phi(atoms[i].loc, atoms[i].loc))) return false;
        for (std::size_t j = i + 1; j < atoms.size(); ++j)
            if (!energy_finite(phi(atoms[i].loc, atoms[j].loc))) return false;
    }
    return true;
}

} // namespace sbd
