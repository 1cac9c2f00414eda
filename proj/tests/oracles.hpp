#pragma once

// Test-only reference implementations. Everything here is deliberately
// dense, brute-force, and independent of the library's sparse code paths:
// these are the oracles the library is checked against.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "featscale/lattice.hpp"
#include "featscale/sparse.hpp"

namespace oracle {

struct Dense {
    int n = 0;
    std::vector<double> a;  // row-major

    static Dense zero(int n) { return {n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)}; }
    static Dense identity(int n) {
        Dense d = zero(n);
        for (int i = 0; i < n; ++i) d(i, i) = 1.0;
        return d;
    }
    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

inline Dense to_dense(const featscale::SparseMatrix& s) {
    Dense d = Dense::zero(s.n);
    for (int i = 0; i < s.n; ++i)
        for (int p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) d(i, s.col_idx[p]) += s.values[p];
    return d;
}

inline Dense kron(const Dense& a, const Dense& b) {
    Dense out = Dense::zero(a.n * b.n);
    for (int i = 0; i < a.n; ++i)
        for (int j = 0; j < a.n; ++j)
            for (int k = 0; k < b.n; ++k)
                for (int l = 0; l < b.n; ++l) out(i * b.n + k, j * b.n + l) = a(i, j) * b(k, l);
    return out;
}

/// Tridiagonal first-order random-walk structure matrix, written out
/// directly (not via the library builder).
inline Dense dense_structure(int n) {
    Dense r = Dense::zero(n);
    for (int i = 0; i < n; ++i) {
        r(i, i) = (i == 0 || i == n - 1) ? 1.0 : 2.0;
        if (i > 0) r(i, i - 1) = -1.0;
        if (i + 1 < n) r(i, i + 1) = -1.0;
    }
    return r;
}

/// Row-major grid spatial-weight matrix by the Kronecker formula.
inline Dense dense_grid_q(int n1, int n2, double a1, double a2) {
    const Dense term1 = kron(dense_structure(n1), Dense::identity(n2));
    const Dense term2 = kron(Dense::identity(n1), dense_structure(n2));
    Dense q = Dense::zero(n1 * n2);
    for (std::size_t i = 0; i < q.a.size(); ++i) q.a[i] = a1 * term1.a[i] + a2 * term2.a[i];
    return q;
}

inline std::vector<double> matvec(const Dense& m, std::span<const double> v) {
    std::vector<double> out(static_cast<std::size_t>(m.n), 0.0);
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) out[i] += m(i, j) * v[j];
    return out;
}

/// Plain dense Cholesky, lower triangular, no pivoting.
inline Dense dense_cholesky(const Dense& a) {
    Dense l = Dense::zero(a.n);
    for (int i = 0; i < a.n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0) throw std::runtime_error("oracle cholesky: not SPD");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

/// LU with partial pivoting, then solve.
inline std::vector<double> dense_solve(Dense a, std::vector<double> b) {
    const int n = a.n;
    std::vector<int> piv(static_cast<std::size_t>(n));
    for (int col = 0; col < n; ++col) {
        int p = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(p, col))) p = r;
        piv[col] = p;
        if (p != col) {
            for (int c = 0; c < n; ++c) std::swap(a(col, c), a(p, c));
            std::swap(b[col], b[p]);
        }
        if (a(col, col) == 0.0) throw std::runtime_error("oracle solve: singular");
        for (int r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            a(r, col) = 0.0;
            for (int c = col + 1; c < n; ++c) a(r, c) -= f * a(col, c);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

inline Dense dense_inverse(const Dense& a) {
    Dense inv = Dense::zero(a.n);
    for (int c = 0; c < a.n; ++c) {
        std::vector<double> e(static_cast<std::size_t>(a.n), 0.0);
        e[c] = 1.0;
        const std::vector<double> x = dense_solve(a, e);
        for (int r = 0; r < a.n; ++r) inv(r, c) = x[r];
    }
    return inv;
}

/// Symmetric eigenvalues by cyclic Jacobi rotations.
inline std::vector<double> sym_eigenvalues(Dense a, int sweeps = 64) {
    const int n = a.n;
    for (int s = 0; s < sweeps; ++s) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-28) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// All-pairs Matheron estimator, O(n^2), shared binning convention
/// (equal-width bins over (0, max_lag], bin value reported at the mean
/// pair distance).
struct BruteBins {
    std::vector<double> lag;
    std::vector<double> gamma;
    std::vector<long> count;
};

inline BruteBins brute_force_variogram(std::span<const double> field, const featscale::Lattice& lat,
                                       double max_lag, int n_bins, bool ew_only = false,
                                       bool ns_only = false, double angle_tol_deg = 22.5) {
    // field is on active nodes; expand to grid
    std::vector<double> img(static_cast<std::size_t>(lat.grid_size()),
                            std::numeric_limits<double>::quiet_NaN());
    int slot = 0;
    for (int g = 0; g < lat.grid_size(); ++g) {
        if (!lat.active[g]) continue;
        if (lat.observed[g]) img[g] = field[slot];
        ++slot;
    }
    BruteBins bins;
    bins.lag.assign(n_bins, 0.0);
    bins.gamma.assign(n_bins, 0.0);
    bins.count.assign(n_bins, 0);
    const double width = max_lag / n_bins;
    const int n = lat.grid_size();
    for (int a = 0; a < n; ++a) {
        if (std::isnan(img[a])) continue;
        for (int b = a + 1; b < n; ++b) {
            if (std::isnan(img[b])) continue;
            const int ra = a / lat.n2, ca = a % lat.n2;
            const int rb = b / lat.n2, cb = b % lat.n2;
            const int dy = ra - rb;
            const int dx = ca - cb;
            // pair distance convention: integer offset scaled by the spacing
            const double dist = lat.spacing * std::hypot(dy, dx);
            if (dist == 0.0 || dist > max_lag) continue;
            if (ew_only &&
                std::atan2(std::abs(dy), std::abs(dx)) * 180.0 / M_PI > angle_tol_deg)
                continue;
            if (ns_only &&
                std::atan2(std::abs(dx), std::abs(dy)) * 180.0 / M_PI > angle_tol_deg)
                continue;
            // right-closed bins (0, max_lag]
            int bin = static_cast<int>(std::ceil(dist / width)) - 1;
            if (bin < 0) bin = 0;
            if (bin >= n_bins) bin = n_bins - 1;
            const double d = img[a] - img[b];
            bins.gamma[bin] += d * d;
            bins.lag[bin] += dist;
            bins.count[bin]++;
        }
    }
    for (int b = 0; b < n_bins; ++b) {
        if (bins.count[b] > 0) {
            bins.gamma[b] = 0.5 * bins.gamma[b] / bins.count[b];
            bins.lag[b] /= bins.count[b];
        } else {
            bins.gamma[b] = std::numeric_limits<double>::quiet_NaN();
            bins.lag[b] = (b + 0.5) * width;
        }
    }
    return bins;
}

/// MST total length by Prim over the complete graph (independent copy).
inline double brute_mst_length(const std::vector<std::vector<double>>& pts) {
    const int c = static_cast<int>(pts.size());
    std::vector<char> used(c, 0);
    std::vector<double> best(c, std::numeric_limits<double>::infinity());
    auto d2 = [&](int i, int j) {
        double s = 0.0;
        for (std::size_t k = 0; k < pts[i].size(); ++k)
            s += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
        return s;
    };
    used[0] = 1;
    for (int j = 1; j < c; ++j) best[j] = d2(0, j);
    double total = 0.0;
    for (int s = 1; s < c; ++s) {
        int pick = -1;
        for (int j = 0; j < c; ++j)
            if (!used[j] && (pick < 0 || best[j] < best[pick])) pick = j;
        total += std::sqrt(best[pick]);
        used[pick] = 1;
        for (int j = 0; j < c; ++j)
            if (!used[j]) best[j] = std::min(best[j], d2(pick, j));
    }
    return total;
}

}  // namespace oracle
