#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "featscale/errors.hpp"
#include "featscale/lattice.hpp"

namespace featscale {

/// Shortest round-trip decimal text for a double; the one formatting used
/// in every CSV/JSON artifact so reruns are byte-identical.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Rectangular grid of values; NaN encodes the NA (no-data) token.
/// On disk: header line "n1,n2,spacing", then n1 rows of n2 comma-separated
/// values, row 0 being the northernmost.
struct GridData {
    int n1 = 0;
    int n2 = 0;
    double spacing = 1.0;
    std::vector<double> values;  // row-major

    static constexpr double na() { return std::numeric_limits<double>::quiet_NaN(); }

    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * n2 + j]; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n2 + j]; }

    static GridData make(int n1, int n2, double spacing, double fill = 0.0) {
        GridData g;
        g.n1 = n1;
        g.n2 = n2;
        g.spacing = spacing;
        g.values.assign(static_cast<std::size_t>(n1) * n2, fill);
        return g;
    }
};

inline void write_grid_csv(const GridData& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputMissing("cannot open for writing: " + path);
    out << grid.n1 << ',' << grid.n2 << ',' << format_double(grid.spacing) << '\n';
    for (int i = 0; i < grid.n1; ++i) {
        for (int j = 0; j < grid.n2; ++j) {
            if (j) out << ',';
            out << format_double(grid.at(i, j));
        }
        out << '\n';
    }
    if (!out) throw InputMissing("write failed: " + path);
}

inline GridData read_grid_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputMissing("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigInvalid("empty grid file: " + path);
    GridData grid;
    {
        std::istringstream hdr(line);
        std::string tok;
        if (!std::getline(hdr, tok, ',')) throw ConfigInvalid("bad grid header: " + path);
        grid.n1 = std::stoi(tok);
        if (!std::getline(hdr, tok, ',')) throw ConfigInvalid("bad grid header: " + path);
        grid.n2 = std::stoi(tok);
        if (!std::getline(hdr, tok, ',')) throw ConfigInvalid("bad grid header: " + path);
        grid.spacing = std::stod(tok);
    }
    if (grid.n1 < 1 || grid.n2 < 1 || !(grid.spacing > 0.0))
        throw ConfigInvalid("bad grid header values: " + path);
    grid.values.reserve(static_cast<std::size_t>(grid.n1) * grid.n2);
    for (int i = 0; i < grid.n1; ++i) {
        if (!std::getline(in, line)) throw ConfigInvalid("grid row missing in " + path);
        std::istringstream row(line);
        std::string tok;
        int cols = 0;
        while (std::getline(row, tok, ',')) {
            // trim spaces
            const auto b = tok.find_first_not_of(" \t\r");
            const auto e = tok.find_last_not_of(" \t\r");
            tok = (b == std::string::npos) ? "" : tok.substr(b, e - b + 1);
            if (tok == "NA" || tok == "nan" || tok.empty())
                grid.values.push_back(GridData::na());
            else
                grid.values.push_back(std::stod(tok));
            ++cols;
        }
        if (cols != grid.n2) throw ConfigInvalid("grid row width mismatch in " + path);
    }
    return grid;
}

/// Active-vector <-> grid conversions under a lattice's node ordering.
inline GridData field_to_grid(std::span<const double> field, const Lattice& lat) {
    if (static_cast<int>(field.size()) != lat.n_active())
        throw DimensionMismatch("field_to_grid: length != active count");
    GridData g = GridData::make(lat.n1, lat.n2, lat.spacing, GridData::na());
    int slot = 0;
    for (int i = 0; i < lat.grid_size(); ++i)
        if (lat.active[i]) g.values[i] = field[slot++];
    return g;
}

inline std::vector<double> grid_to_field(const GridData& grid, const Lattice& lat) {
    if (grid.n1 != lat.n1 || grid.n2 != lat.n2)
        throw DimensionMismatch("grid_to_field: grid shape != lattice shape");
    std::vector<double> field;
    field.reserve(static_cast<std::size_t>(lat.n_active()));
    for (int i = 0; i < lat.grid_size(); ++i)
        if (lat.active[i]) field.push_back(grid.values[i]);
    return field;
}

/// Lattice whose observation mask reflects the grid's NA cells; an
/// optional activity grid (nonzero/zero, NA = inactive) restricts the
/// active area.
inline Lattice lattice_from_grids(const GridData& data, const GridData* active_mask = nullptr) {
    Lattice lat;
    lat.n1 = data.n1;
    lat.n2 = data.n2;
    lat.spacing = data.spacing;
    lat.active.assign(static_cast<std::size_t>(data.n1) * data.n2, 1);
    if (active_mask) {
        if (active_mask->n1 != data.n1 || active_mask->n2 != data.n2)
            throw DimensionMismatch("active mask shape != data shape");
        for (int i = 0; i < lat.grid_size(); ++i) {
            const double v = active_mask->values[i];
            lat.active[i] = (!std::isnan(v) && v != 0.0) ? 1 : 0;
        }
    }
    lat.observed.assign(lat.active.begin(), lat.active.end());
    for (int i = 0; i < lat.grid_size(); ++i)
        if (std::isnan(data.values[i])) lat.observed[i] = 0;
    return lat;
}

enum class Palette { gray, diverging };

inline Palette palette_from_name(const std::string& name) {
    if (name == "gray" || name == "grey") return Palette::gray;
    if (name == "diverging") return Palette::diverging;
    throw ConfigInvalid("unknown palette: " + name);
}

/// Binary PPM heatmap with linear value mapping; all-equal grids map to
/// the palette midpoint and NA cells use a reserved magenta.
inline void write_heatmap(const GridData& grid, const std::string& path,
                          Palette palette = Palette::diverging) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : grid.values) {
        if (std::isnan(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const bool flat = !(hi > lo);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputMissing("cannot open for writing: " + path);
    out << "P6\n" << grid.n2 << ' ' << grid.n1 << "\n255\n";
    auto emit = [&](unsigned char r, unsigned char g, unsigned char b) {
        out.put(static_cast<char>(r));
        out.put(static_cast<char>(g));
        out.put(static_cast<char>(b));
    };
    for (double v : grid.values) {
        if (std::isnan(v)) {
            emit(255, 0, 255);
            continue;
        }
        const double t = flat ? 0.5 : (v - lo) / (hi - lo);
        if (palette == Palette::gray) {
            const auto g = static_cast<unsigned char>(std::lround(t * 255.0));
            emit(g, g, g);
        } else {
            // blue - white - red
            if (t < 0.5) {
                const double s = t * 2.0;
                emit(static_cast<unsigned char>(std::lround(s * 255.0)),
                     static_cast<unsigned char>(std::lround(s * 255.0)), 255);
            } else {
                const double s = (t - 0.5) * 2.0;
                emit(255, static_cast<unsigned char>(std::lround((1.0 - s) * 255.0)),
                     static_cast<unsigned char>(std::lround((1.0 - s) * 255.0)));
            }
        }
    }
    if (!out) throw InputMissing("write failed: " + path);
}

/// Raw little-endian float64 matrix with its shape in the caller's sidecar.
inline void write_matrix_f64(std::span<const double> data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputMissing("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw InputMissing("write failed: " + path);
}

inline std::vector<double> read_matrix_f64(const std::string& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputMissing("cannot open: " + path);
    std::vector<double> data(count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
        throw InputMissing("short read: " + path);
    return data;
}

}  // namespace featscale
