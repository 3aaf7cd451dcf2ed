#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpda/graph.hpp"
#include "mpda/grid.hpp"
#include "mpda/oracle.hpp"

namespace mpda {

// Field file: magic "MPDA1", a text header "nx ny dx dy boundary", then
// n little-endian IEEE doubles, row-major. dx/dy are printed as hexfloats
// so write/read round-trips bitwise.

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "field files are little-endian; byte swapping not implemented");

inline std::uint64_t to_le_bits(double v) { return std::bit_cast<std::uint64_t>(v); }
inline double from_le_bits(std::uint64_t bits) { return std::bit_cast<double>(bits); }

[[noreturn]] inline void io_fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

}  // namespace detail

inline void write_field(const Field& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) detail::io_fail(path, "cannot open for writing");
    std::ostringstream header;
    header << "MPDA1\n"
           << f.grid.nx << ' ' << f.grid.ny << ' ' << std::hexfloat << f.grid.dx << ' '
           << f.grid.dy << std::defaultfloat << ' ' << to_string(f.grid.boundary) << '\n';
    out << header.str();
    for (double v : f.values) {
        const std::uint64_t bits = detail::to_le_bits(v);
        out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
    if (!out) detail::io_fail(path, "write failed");
}

inline Field read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) detail::io_fail(path, "cannot open for reading");
    std::string magic;
    std::getline(in, magic);
    if (magic != "MPDA1") detail::io_fail(path, "not a MPDA1 field file");
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    int nx, ny;
    std::string dxs, dys, bs;
    if (!(hs >> nx >> ny >> dxs >> dys >> bs)) detail::io_fail(path, "malformed header");
    GridSpec grid(nx, ny, std::strtod(dxs.c_str(), nullptr),
                  std::strtod(dys.c_str(), nullptr), boundary_from_string(bs));
    std::vector<double> values(static_cast<std::size_t>(grid.num_nodes()));
    for (double& v : values) {
        std::uint64_t bits;
        if (!in.read(reinterpret_cast<char*>(&bits), sizeof(bits)))
            detail::io_fail(path, "truncated field data");
        v = detail::from_le_bits(bits);
    }
    return Field(grid, std::move(values));
}

// Observation file: text, one "i j value variance" record per line,
// '#' starts a comment. Coordinates are grid node coordinates.

inline void write_observations(const ObservationSet& obs, const GridSpec& g,
                               const std::string& path) {
    std::ofstream out(path);
    if (!out) detail::io_fail(path, "cannot open for writing");
    out << "# i j value variance\n";
    out.precision(17);
    for (const auto& o : obs.entries)
        out << g.coord_i(o.node) << ' ' << g.coord_j(o.node) << ' ' << o.value << ' '
            << o.noise_variance << '\n';
    if (!out) detail::io_fail(path, "write failed");
}

inline ObservationSet read_observations(const std::string& path, const GridSpec& g) {
    std::ifstream in(path);
    if (!in) detail::io_fail(path, "cannot open for reading");
    ObservationSet obs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double fi, fj, value, variance;
        if (!(ls >> fi)) continue;  // blank or comment-only line
        if (!(ls >> fj >> value >> variance))
            detail::io_fail(path, "malformed record at line " + std::to_string(line_no));
        // off-grid coordinates snap to the nearest node, ties toward the
        // lower index
        const int i = std::clamp(static_cast<int>(std::ceil(fi - 0.5)), 0, g.nx - 1);
        const int j = std::clamp(static_cast<int>(std::ceil(fj - 0.5)), 0, g.ny - 1);
        obs.entries.push_back({g.linear_index(i, j), value, variance});
    }
    obs.validate(g.num_nodes());
    return obs;
}

// Portable pixmap rendering. gray: P5, min-max normalized; diverging: P6,
// blue-white-red symmetric around zero.

enum class RenderMode { Gray, Diverging };

inline void render_field(const Field& f, const std::string& path, RenderMode mode) {
    std::ofstream out(path, std::ios::binary);
    if (!out) detail::io_fail(path, "cannot open for writing");
    const int nx = f.grid.nx, ny = f.grid.ny;

    if (mode == RenderMode::Gray) {
        const auto [mn_it, mx_it] = std::minmax_element(f.values.begin(), f.values.end());
        const double mn = *mn_it, mx = *mx_it;
        out << "P5\n" << nx << ' ' << ny << "\n255\n";
        for (double v : f.values) {
            const unsigned char px =
                mx > mn ? static_cast<unsigned char>(std::lround(255.0 * (v - mn) / (mx - mn)))
                        : static_cast<unsigned char>(128);
            out.put(static_cast<char>(px));
        }
    } else {
        double amax = 0.0;
        for (double v : f.values) amax = std::max(amax, std::abs(v));
        out << "P6\n" << nx << ' ' << ny << "\n255\n";
        for (double v : f.values) {
            const double t = amax > 0.0 ? v / amax : 0.0;  // [-1, 1]
            unsigned char r = 255, g = 255, b = 255;
            if (t > 0.0) {  // toward red
                g = b = static_cast<unsigned char>(std::lround(255.0 * (1.0 - t)));
            } else if (t < 0.0) {  // toward blue
                r = g = static_cast<unsigned char>(std::lround(255.0 * (1.0 + t)));
            }
            out.put(static_cast<char>(r));
            out.put(static_cast<char>(g));
            out.put(static_cast<char>(b));
        }
    }
    if (!out) detail::io_fail(path, "write failed");
}

}  // namespace mpda
