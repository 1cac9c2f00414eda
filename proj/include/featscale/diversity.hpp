#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "featscale/errors.hpp"
#include "featscale/lattice.hpp"
#include "featscale/parallel.hpp"

namespace featscale {

/// Per-pixel trait layers on the full grid; pixels outside the lattice's
/// active+observed set never enter a community.
struct TraitStack {
    int n_traits = 0;
    std::vector<std::vector<double>> traits;  // each length n1*n2
    const Lattice* lattice = nullptr;

    void validate() const {
        if (!lattice) throw DimensionMismatch("trait stack: no lattice");
        if (static_cast<int>(traits.size()) != n_traits || n_traits < 2)
            throw DimensionMismatch("trait stack: need at least 2 trait layers");
        for (const auto& t : traits)
            if (static_cast<int>(t.size()) != lattice->grid_size())
                throw DimensionMismatch("trait stack: layer length != grid size");
    }

    std::vector<double> point(int grid_idx) const {
        std::vector<double> p(static_cast<std::size_t>(n_traits));
        for (int t = 0; t < n_traits; ++t) p[t] = traits[t][grid_idx];
        return p;
    }
};

/// Pixels within an inclusive Euclidean radius of a center pixel.
struct Community {
    int center = 0;
    std::vector<int> members;  // full-grid indices, center included
    int size() const { return static_cast<int>(members.size()); }
};

inline Community community(const Lattice& lat, int center, double radius) {
    if (center < 0 || center >= lat.grid_size())
        throw DimensionMismatch("community: center out of range");
    if (!lat.active[center] || !lat.observed[center])
        throw DimensionMismatch("community: center must be active and observed");
    Community com;
    com.center = center;
    const auto [cr, cc] = lat.coords(center);
    const int steps = static_cast<int>(std::floor(radius / lat.spacing)) + 1;
    const double r2 = radius * radius;
    for (int i = std::max(0, cr - steps); i <= std::min(lat.n1 - 1, cr + steps); ++i) {
        for (int j = std::max(0, cc - steps); j <= std::min(lat.n2 - 1, cc + steps); ++j) {
            const int g = lat.index(i, j);
            if (!lat.active[g] || !lat.observed[g]) continue;
            const double dy = (i - cr) * lat.spacing;
            const double dx = (j - cc) * lat.spacing;
            if (dx * dx + dy * dy <= r2) com.members.push_back(g);
        }
    }
    return com;
}

/// Result of one diversity index over one community.
struct IndexValue {
    double value = 0.0;
    bool degenerate = false;
};

/// Functional divergence: spread of the community members' distances to
/// their trait-space center of gravity, mapped into (0, 1].
inline IndexValue fdiv(const std::vector<std::vector<double>>& pts) {
    const int c = static_cast<int>(pts.size());
    if (c < 2) return {0.0, true};
    const int t = static_cast<int>(pts.front().size());
    std::vector<double> centroid(t, 0.0);
    for (const auto& p : pts)
        for (int k = 0; k < t; ++k) centroid[k] += p[k];
    for (auto& v : centroid) v /= c;
    std::vector<double> dg(c);
    double dg_bar = 0.0;
    for (int i = 0; i < c; ++i) {
        double s = 0.0;
        for (int k = 0; k < t; ++k) s += (pts[i][k] - centroid[k]) * (pts[i][k] - centroid[k]);
        dg[i] = std::sqrt(s);
        dg_bar += dg[i];
    }
    dg_bar /= c;
    if (dg_bar <= 0.0) return {0.0, true};  // all members identical
    double abs_dev = 0.0;
    for (int i = 0; i < c; ++i) abs_dev += std::abs(dg[i] - dg_bar);
    abs_dev /= c;
    return {dg_bar / (abs_dev + dg_bar), false};
}

/// Exact Euclidean minimum spanning tree branch lengths (Prim on the
/// complete graph).
inline std::vector<double> mst_branch_lengths(const std::vector<std::vector<double>>& pts) {
    const int c = static_cast<int>(pts.size());
    const int t = static_cast<int>(pts.front().size());
    auto dist2 = [&](int a, int b) {
        double s = 0.0;
        for (int k = 0; k < t; ++k) s += (pts[a][k] - pts[b][k]) * (pts[a][k] - pts[b][k]);
        return s;
    };
    std::vector<char> in_tree(c, 0);
    std::vector<double> best(c, std::numeric_limits<double>::infinity());
    in_tree[0] = 1;
    for (int j = 1; j < c; ++j) best[j] = dist2(0, j);
    std::vector<double> branches;
    branches.reserve(c - 1);
    for (int step = 1; step < c; ++step) {
        int pick = -1;
        for (int j = 0; j < c; ++j)
            if (!in_tree[j] && (pick == -1 || best[j] < best[pick])) pick = j;
        branches.push_back(std::sqrt(best[pick]));
        in_tree[pick] = 1;
        for (int j = 0; j < c; ++j)
            if (!in_tree[j]) best[j] = std::min(best[j], dist2(pick, j));
    }
    return branches;
}

/// Functional evenness: regularity of the minimum-spanning-tree branch
/// lengths in trait space.
inline IndexValue feve(const std::vector<std::vector<double>>& pts) {
    const int c = static_cast<int>(pts.size());
    if (c < 3) return {0.0, true};
    const std::vector<double> branches = mst_branch_lengths(pts);
    double total = 0.0;
    for (double b : branches) total += b;
    if (total <= 0.0) return {0.0, true};  // all members identical
    const double floor = 1.0 / (c - 1);
    double s = 0.0;
    for (double b : branches) s += std::min(b / total, floor);
    return {(s - floor) / (1.0 - floor), false};
}

namespace hull3 {

using Point = std::array<double, 3>;

inline Point sub(const Point& a, const Point& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Point cross(const Point& a, const Point& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double dot(const Point& a, const Point& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double det3(const Point& a, const Point& b, const Point& c, const Point& d) {
    return dot(sub(b, a), cross(sub(c, a), sub(d, a)));
}

struct Face {
    int a, b, c;
    bool alive = true;
};

/// Volume of the convex hull of a 3-D point set via incremental insertion.
/// Returns 0 for degenerate (coplanar or smaller) sets.
inline double hull_volume(const std::vector<Point>& pts) {
    const int n = static_cast<int>(pts.size());
    if (n < 4) return 0.0;

    double scale = 0.0;
    for (const auto& p : pts)
        for (double v : p) scale = std::max(scale, std::abs(v));
    const double eps = std::max(scale, 1.0) * 1e-12;

    // initial tetrahedron from spread-out points
    int i0 = 0, i1 = -1;
    for (int i = 1; i < n; ++i) {
        double d = 0.0;
        for (int k = 0; k < 3; ++k) d += std::abs(pts[i][k] - pts[i0][k]);
        if (d > eps) {
            i1 = i;
            break;
        }
    }
    if (i1 < 0) return 0.0;
    int i2 = -1;
    double best_area = eps;
    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1) continue;
        const Point c = cross(sub(pts[i1], pts[i0]), sub(pts[i], pts[i0]));
        const double area = std::sqrt(dot(c, c));
        if (area > best_area) {
            best_area = area;
            i2 = i;
        }
    }
    if (i2 < 0) return 0.0;
    int i3 = -1;
    double best_vol = eps * best_area;
    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1 || i == i2) continue;
        const double v = std::abs(det3(pts[i0], pts[i1], pts[i2], pts[i]));
        if (v > best_vol) {
            best_vol = v;
            i3 = i;
        }
    }
    if (i3 < 0) return 0.0;  // coplanar

    std::vector<Face> faces;
    auto add_face = [&](int a, int b, int c, const Point& inside) {
        // orient so the interior point sits on the negative side
        if (det3(pts[a], pts[b], pts[c], inside) > 0.0)
            faces.push_back({a, c, b});
        else
            faces.push_back({a, b, c});
    };
    Point inner = {0, 0, 0};
    for (int k = 0; k < 3; ++k)
        inner[k] = (pts[i0][k] + pts[i1][k] + pts[i2][k] + pts[i3][k]) / 4.0;
    add_face(i0, i1, i2, inner);
    add_face(i0, i1, i3, inner);
    add_face(i0, i2, i3, inner);
    add_face(i1, i2, i3, inner);

    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1 || i == i2 || i == i3) continue;
        // collect faces visible from pts[i]
        std::vector<int> visible;
        for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
            if (!faces[f].alive) continue;
            if (det3(pts[faces[f].a], pts[faces[f].b], pts[faces[f].c], pts[i]) > eps * scale)
                visible.push_back(f);
        }
        if (visible.empty()) continue;
        // horizon = edges of visible faces shared with a hidden face
        std::vector<std::pair<int, int>> horizon;
        auto edge_hidden = [&](int a, int b) {
            for (int f : visible) {
                const auto& fc = faces[f];
                const std::array<std::pair<int, int>, 3> edges{
                    {{fc.b, fc.a}, {fc.c, fc.b}, {fc.a, fc.c}}};
                for (const auto& e : edges)
                    if (e.first == a && e.second == b) return false;
            }
            return true;
        };
        for (int f : visible) {
            const auto& fc = faces[f];
            const std::array<std::pair<int, int>, 3> edges{
                {{fc.a, fc.b}, {fc.b, fc.c}, {fc.c, fc.a}}};
            for (const auto& e : edges)
                if (edge_hidden(e.first, e.second)) horizon.push_back(e);
        }
        for (int f : visible) faces[f].alive = false;
        for (const auto& e : horizon) {
            Face nf{e.first, e.second, i};
            faces.push_back(nf);
        }
    }

    // signed tetrahedra against a hull vertex; faces are outward-oriented
    const Point origin = pts[i0];
    double six_vol = 0.0;
    for (const auto& f : faces) {
        if (!f.alive) continue;
        six_vol += dot(sub(pts[f.a], origin), cross(sub(pts[f.b], origin), sub(pts[f.c], origin)));
    }
    return std::abs(six_vol) / 6.0;
}

}  // namespace hull3

/// Functional richness: convex-hull volume in a 3-trait space.
inline IndexValue frich(const std::vector<std::vector<double>>& pts) {
    if (pts.empty() || pts.front().size() != 3)
        throw DimensionMismatch("frich: exactly 3 traits required");
    std::vector<hull3::Point> p3;
    p3.reserve(pts.size());
    for (const auto& p : pts) p3.push_back({p[0], p[1], p[2]});
    const double vol = hull3::hull_volume(p3);
    return {vol, vol == 0.0};
}

enum class DiversityIndex { frich, fdiv, feve };

struct IndexMap {
    int n1 = 0, n2 = 0;
    std::vector<double> values;  // NaN at skipped or degenerate pixels
    int degenerate_count = 0;
    int evaluated_count = 0;
};

/// Moving-window index map: the chosen index evaluated on the community of
/// every active+observed pixel. Degenerate communities yield no-data.
inline IndexMap index_map(const TraitStack& stack, double radius, DiversityIndex which,
                          int threads = 1) {
    stack.validate();
    if (!(radius > 0.0)) throw DimensionMismatch("index_map: radius must be positive");
    if (which == DiversityIndex::frich && stack.n_traits != 3)
        throw DimensionMismatch("index_map: functional richness needs exactly 3 traits");
    const Lattice& lat = *stack.lattice;
    IndexMap map;
    map.n1 = lat.n1;
    map.n2 = lat.n2;
    map.values.assign(static_cast<std::size_t>(lat.grid_size()),
                      std::numeric_limits<double>::quiet_NaN());
    std::vector<char> degenerate(static_cast<std::size_t>(lat.grid_size()), 0);
    std::vector<char> evaluated(static_cast<std::size_t>(lat.grid_size()), 0);

    parallel_for(lat.grid_size(), threads, [&](long g) {
        if (!lat.active[g] || !lat.observed[g]) return;
        const Community com = community(lat, static_cast<int>(g), radius);
        std::vector<std::vector<double>> pts;
        pts.reserve(com.members.size());
        for (int m : com.members) pts.push_back(stack.point(m));
        IndexValue v;
        switch (which) {
            case DiversityIndex::frich: v = frich(pts); break;
            case DiversityIndex::fdiv: v = fdiv(pts); break;
            case DiversityIndex::feve: v = feve(pts); break;
        }
        evaluated[g] = 1;
        if (v.degenerate && which != DiversityIndex::frich) {
            degenerate[g] = 1;
            return;
        }
        if (v.degenerate) degenerate[g] = 1;
        map.values[g] = v.value;
    });
    for (int g = 0; g < lat.grid_size(); ++g) {
        map.degenerate_count += degenerate[g];
        map.evaluated_count += evaluated[g];
    }
    return map;
}

}  // namespace featscale
