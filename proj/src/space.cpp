#include "sbd/space.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace sbd {

Box::Box(std::vector<double> lo_, std::vector<double> hi_)
    : dim(int(lo_.size())), lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size() || lo.empty())
        throw std::invalid_argument("Box: lower/upper size mismatch");
    for (int i = 0; i < dim; ++i)
        if (!(lo[i] < hi[i]))
            throw std::invalid_argument("Box: lower must be strictly below upper");
}

double Box::volume() const {
    double v = 1.0;
    for (int i = 0; i < dim; ++i) v *= hi[i] - lo[i];
    return v;
}

bool Box::contains(const std::vector<double>& x) const {
    if (int(x.size()) != dim) return false;
    for (int i = 0; i < dim; ++i)
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
}

std::vector<double> Box::center() const {
    std::vector<double> c(dim);
    for (int i = 0; i < dim; ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
}

double Box::distance(const std::vector<double>& x) const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
        double d = 0.0;
        if (x[i] < lo[i]) d = lo[i] - x[i];
        else if (x[i] > hi[i]) d = x[i] - hi[i];
        s += d * d;
    }
    return std::sqrt(s);
}

Grid::Grid(int dim_, double R, int n) : dim(dim_), cell_size(R), radius(n) {
    if (dim <= 0) throw std::invalid_argument("Grid: dim must be positive");
    if (!(R > 0.0)) throw std::invalid_argument("Grid: cell size must be positive");
    if (n < 0) throw std::invalid_argument("Grid: radius must be >= 0");
}

long Grid::vertex_count() const {
    long c = 1;
    for (int i = 0; i < dim; ++i) c *= 2L * radius + 1;
    return c;
}

bool Grid::in_grid(const GridIndex& k) const {
    if (int(k.size()) != dim) return false;
    for (int v : k)
        if (std::abs(v) > radius) return false;
    return true;
}

void Grid::require_vertex(const GridIndex& k) const {
    if (!in_grid(k))
        throw std::invalid_argument("Grid: index " + index_to_string(k) + " outside grid of radius " +
                                    std::to_string(radius));
}

Box Grid::cell(const GridIndex& k) const {
    require_vertex(k);
    std::vector<double> lo(dim), hi(dim);
    for (int i = 0; i < dim; ++i) {
        lo[i] = (double(k[i]) - 0.5) * cell_size;
        hi[i] = (double(k[i]) + 0.5) * cell_size;
    }
    return Box(std::move(lo), std::move(hi));
}

Box Grid::full_region() const {
    std::vector<double> lo(dim), hi(dim);
    double half = (double(radius) + 0.5) * cell_size;
    for (int i = 0; i < dim; ++i) {
        lo[i] = -half;
        hi[i] = half;
    }
    return Box(std::move(lo), std::move(hi));
}

std::vector<GridIndex> Grid::neighbors(const GridIndex& k) const {
    require_vertex(k);
    std::vector<GridIndex> out;
    GridIndex j(dim);
    // walk the 3^d offset cube, skip the origin offset
    std::vector<int> off(dim, -1);
    while (true) {
        bool all_zero = true;
        for (int i = 0; i < dim; ++i) {
            j[i] = k[i] + off[i];
            if (off[i] != 0) all_zero = false;
        }
        if (!all_zero && in_grid(j)) out.push_back(j);
        int i = 0;
        for (; i < dim; ++i) {
            if (off[i] < 1) {
                ++off[i];
                break;
            }
            off[i] = -1;
        }
        if (i == dim) break;
    }
    return out;
}

bool Grid::is_outer(const GridIndex& k) const {
    require_vertex(k);
    return inf_norm(k) == radius;
}

GridIndex Grid::cell_of(const std::vector<double>& x) const {
    if (int(x.size()) != dim) throw std::invalid_argument("Grid: point dimension mismatch");
    GridIndex k(dim);
    for (int i = 0; i < dim; ++i) {
        // cell j covers [(j-1/2)R, (j+1/2)R]; shared faces go to the smaller j
        double s = x[i] / cell_size + 0.5;
        double f = std::floor(s);
        int j = (s == f) ? int(f) - 1 : int(f);
        if (j < -radius) j = -radius; // x on the extreme lower face
        if (j > radius)
            throw std::invalid_argument("Grid: point outside the gridded region");
        k[i] = j;
    }
    // verify containment (catches points below the lower edge)
    Box b = cell(k);
    if (!b.contains(x)) throw std::invalid_argument("Grid: point outside the gridded region");
    return k;
}

std::vector<GridIndex> Grid::vertices() const {
    std::vector<GridIndex> out;
    out.reserve(vertex_count());
    GridIndex k(dim, -radius);
    while (true) {
        out.push_back(k);
        int i = dim - 1; // lexicographic: last coordinate fastest
        for (; i >= 0; --i) {
            if (k[i] < radius) {
                ++k[i];
                break;
            }
            k[i] = -radius;
        }
        if (i < 0) break;
    }
    return out;
}

long Grid::linear_index(const GridIndex& k) const {
    require_vertex(k);
    long idx = 0, base = 2L * radius + 1;
    for (int i = 0; i < dim; ++i) idx = idx * base + (k[i] + radius);
    return idx;
}

GridIndex Grid::from_linear(long idx) const {
    long base = 2L * radius + 1;
    GridIndex k(dim);
    for (int i = dim - 1; i >= 0; --i) {
        k[i] = int(idx % base) - radius;
        idx /= base;
    }
    return k;
}

int Grid::inf_norm(const GridIndex& k) {
    int m = 0;
    for (int v : k) m = std::max(m, std::abs(v));
    return m;
}

std::string index_to_string(const GridIndex& k) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (i) os << ",";
        os << k[i];
    }
    os << ")";
    return os.str();
}

} // namespace sbd
