#ifndef SBD_SPACE_HPP
#define SBD_SPACE_HPP

#include <string>
#include <vector>

namespace sbd {

// Axis-aligned closed box in R^d with positive finite volume.
struct Box {
    int dim = 0;
    std::vector<double> lo, hi;

    Box() = default;
    Box(std::vector<double> lo_, std::vector<double> hi_);

    double volume() const;
    bool contains(const std::vector<double>& x) const; // closed containment
    std::vector<double> center() const;

    // Euclidean distance from x to the box (0 when inside).
    double distance(const std::vector<double>& x) const;
};

using GridIndex = std::vector<int>;

// Grid of (2n+1)^d closed cubes of side R centered at R*k for integer
// vectors k with ||k||_inf <= n.  The union of the cells is the cube
// [-(n+1/2)R, (n+1/2)R]^d.  Cells overlap only on shared faces; points on
// a face are attributed to the lexicographically smallest containing index
// so box membership is a function.
struct Grid {
    int dim = 0;
    double cell_size = 0.0; // R
    int radius = 0;         // n

    Grid() = default;
    Grid(int dim_, double R, int n);

    long vertex_count() const; // (2n+1)^d

    bool in_grid(const GridIndex& k) const;
    void require_vertex(const GridIndex& k) const; // throws std::invalid_argument

    Box cell(const GridIndex& k) const;
    Box full_region() const;

    // ||j - k||_inf == 1 neighbours inside the grid; at most 3^d - 1.
    std::vector<GridIndex> neighbors(const GridIndex& k) const;

    bool is_outer(const GridIndex& k) const; // ||k||_inf == n

    // deterministic membership (lexicographically smallest containing cell)
    GridIndex cell_of(const std::vector<double>& x) const;

    // enumeration and dense linear indexing of V_n, lexicographic order
    std::vector<GridIndex> vertices() const;
    long linear_index(const GridIndex& k) const;
    GridIndex from_linear(long idx) const;

    static int inf_norm(const GridIndex& k);
};

std::string index_to_string(const GridIndex& k);

} // namespace sbd

#endif
