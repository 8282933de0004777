#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "duet/util.hpp"

namespace duet {

/// Uniform axis-aligned grid patch with cubic cells of side h.
/// origin holds the coordinates of the center of cell (0,0,0); cell values
/// are stored row-major with the x index fastest.
struct GridGeometry {
    int nx = 0, ny = 0, nz = 0;
    double h = 0.0;
    Vec3 origin{0.0, 0.0, 0.0};

    std::size_t size() const { return std::size_t(nx) * ny * nz; }
    std::size_t index(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(nx) * (std::size_t(j) + std::size_t(ny) * k);
    }
    Vec3 cell_center(int i, int j, int k) const {
        return {origin[0] + i * h, origin[1] + j * h, origin[2] + k * h};
    }
    double cell_volume() const { return h * h * h; }
    bool same_as(const GridGeometry& o) const;
    void validate() const;

    /// Cube of n^3 cells whose center sits at `center`.
    static GridGeometry cube(int n, double h, const Vec3& center);
};

/// Non-negative mass density sampled on a grid patch.
struct GridDensity {
    GridGeometry geom;
    std::vector<double> values;

    GridDensity() = default;
    GridDensity(const GridGeometry& g, double fill = 0.0) : geom(g), values(g.size(), fill) {}

    double mass() const;
    Vec3 center_of_mass() const;
    double max_value() const;
    double lp_norm(double p) const;  // (sum |v|^p h^3)^(1/p); p = inf -> max
    void validate() const;           // finite, non-negative, consistent sizes
};

/// Signed scalar field on the same geometry as the density it derives from.
struct GridField {
    GridGeometry geom;
    std::vector<double> values;

    GridField() = default;
    explicit GridField(const GridGeometry& g, double fill = 0.0) : geom(g), values(g.size(), fill) {}
};

// Density snapshot file, magic "GPD1": nx, ny, nz as u32 LE, then h and the
// origin as f64 LE, then nx*ny*nz cell values as f64 LE, x index fastest.
void write_gpd1(const GridDensity& rho, const std::string& path);
GridDensity read_gpd1(const std::string& path);

}  // namespace duet
