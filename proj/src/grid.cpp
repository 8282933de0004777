#include "duet/grid.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace duet {

bool GridGeometry::same_as(const GridGeometry& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz && h == o.h && origin == o.origin;
}

void GridGeometry::validate() const {
    if (nx <= 0 || ny <= 0 || nz <= 0) throw std::invalid_argument("grid: dims must be positive");
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("grid: spacing must be positive");
    for (double c : origin)
        if (!std::isfinite(c)) throw std::invalid_argument("grid: origin must be finite");
}

GridGeometry GridGeometry::cube(int n, double h, const Vec3& center) {
    GridGeometry g;
    g.nx = g.ny = g.nz = n;
    g.h = h;
    double off = 0.5 * (n - 1) * h;
    g.origin = {center[0] - off, center[1] - off, center[2] - off};
    return g;
}

double GridDensity::mass() const {
    KahanSum s;
    for (double v : values) s.add(v);
    return s.value() * geom.cell_volume();
}

Vec3 GridDensity::center_of_mass() const {
    KahanSum sx, sy, sz, sm;
    for (int k = 0; k < geom.nz; ++k)
        for (int j = 0; j < geom.ny; ++j)
            for (int i = 0; i < geom.nx; ++i) {
                double v = values[geom.index(i, j, k)];
                if (v == 0.0) continue;
                Vec3 c = geom.cell_center(i, j, k);
                sx.add(v * c[0]);
                sy.add(v * c[1]);
                sz.add(v * c[2]);
                sm.add(v);
            }
    double m = sm.value();
    if (m <= 0.0) throw std::domain_error("grid: center of mass of zero-mass density");
    return {sx.value() / m, sy.value() / m, sz.value() / m};
}

double GridDensity::max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
}

double GridDensity::lp_norm(double p) const {
    if (std::isinf(p)) return max_value();
    if (p < 1.0) throw std::domain_error("grid: Lp norm needs p >= 1");
    KahanSum s;
    for (double v : values) s.add(std::pow(std::abs(v), p));
    return std::pow(s.value() * geom.cell_volume(), 1.0 / p);
}

void GridDensity::validate() const {
    geom.validate();
    if (values.size() != geom.size()) throw std::invalid_argument("grid: value count mismatch");
    for (double v : values)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("grid: density values must be finite and non-negative");
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::string& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    }
    out.append(reinterpret_cast<char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T)))
        throw std::runtime_error("gpd1: truncated payload");
    if constexpr (std::endian::native == std::endian::big) {
        for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    }
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace

void write_gpd1(const GridDensity& rho, const std::string& path) {
    rho.validate();
    std::string buf;
    buf.reserve(24 + 8 * rho.values.size() + 36);
    buf.append("GPD1", 4);
    put_le<std::uint32_t>(buf, std::uint32_t(rho.geom.nx));
    put_le<std::uint32_t>(buf, std::uint32_t(rho.geom.ny));
    put_le<std::uint32_t>(buf, std::uint32_t(rho.geom.nz));
    put_le<double>(buf, rho.geom.h);
    put_le<double>(buf, rho.geom.origin[0]);
    put_le<double>(buf, rho.geom.origin[1]);
    put_le<double>(buf, rho.geom.origin[2]);
    for (double v : rho.values) put_le<double>(buf, v);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("gpd1: cannot open " + path + " for writing");
    f.write(buf.data(), std::streamsize(buf.size()));
    if (!f) throw std::runtime_error("gpd1: write failed for " + path);
}

GridDensity read_gpd1(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("gpd1: cannot open " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "GPD1", 4) != 0)
        throw std::runtime_error("gpd1: bad magic in " + path);
    GridDensity rho;
    rho.geom.nx = int(get_le<std::uint32_t>(f));
    rho.geom.ny = int(get_le<std::uint32_t>(f));
    rho.geom.nz = int(get_le<std::uint32_t>(f));
    rho.geom.h = get_le<double>(f);
    for (int c = 0; c < 3; ++c) rho.geom.origin[c] = get_le<double>(f);
    rho.geom.validate();
    rho.values.resize(rho.geom.size());
    for (double& v : rho.values) v = get_le<double>(f);
    // A trailing byte means the file was not produced by this writer.
    if (f.peek() != std::char_traits<char>::eof())
        throw std::runtime_error("gpd1: trailing bytes in " + path);
    rho.validate();
    return rho;
}

}  // namespace duet
