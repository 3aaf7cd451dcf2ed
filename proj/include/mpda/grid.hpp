#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mpda {

enum class Boundary { Dirichlet, Periodic };

inline const char* to_string(Boundary b) {
    return b == Boundary::Dirichlet ? "dirichlet" : "periodic";
}

inline Boundary boundary_from_string(const std::string& s) {
    if (s == "dirichlet") return Boundary::Dirichlet;
    if (s == "periodic") return Boundary::Periodic;
    throw std::invalid_argument("unknown boundary condition: " + s);
}

/// Rectangular 2D lattice: node (i, j) lives at linear index j*nx + i,
/// row-major, 0-based.
struct GridSpec {
    int nx = 2;
    int ny = 2;
    double dx = 1.0;
    double dy = 1.0;
    Boundary boundary = Boundary::Dirichlet;

    GridSpec() = default;
    GridSpec(int nx_, int ny_, double dx_, double dy_,
             Boundary b = Boundary::Dirichlet)
        : nx(nx_), ny(ny_), dx(dx_), dy(dy_), boundary(b) {
        validate();
    }

    void validate() const {
        if (nx < 2 || ny < 2)
            throw std::invalid_argument("grid needs nx, ny >= 2");
        if (!(dx > 0.0) || !std::isfinite(dx) || !(dy > 0.0) || !std::isfinite(dy))
            throw std::invalid_argument("grid spacing must be positive and finite");
    }

    int num_nodes() const { return nx * ny; }

    int linear_index(int i, int j) const {
        if (i < 0 || i >= nx || j < 0 || j >= ny)
            throw std::out_of_range("grid coordinate out of range");
        return j * nx + i;
    }

    int coord_i(int idx) const { return idx % nx; }
    int coord_j(int idx) const { return idx / nx; }

    bool operator==(const GridSpec& o) const {
        return nx == o.nx && ny == o.ny && dx == o.dx && dy == o.dy &&
               boundary == o.boundary;
    }
};

/// Halve the resolution: nx' = ceil(nx/2), spacing doubles. Odd sizes round
/// up so every fine node keeps a parent at (i/2, j/2).
inline GridSpec coarsen(const GridSpec& g) {
    const int cnx = (g.nx + 1) / 2;
    const int cny = (g.ny + 1) / 2;
    if (cnx < 2 || cny < 2)
        throw std::invalid_argument("grid too small to coarsen");
    return GridSpec(cnx, cny, 2.0 * g.dx, 2.0 * g.dy, g.boundary);
}

}  // namespace mpda
