#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "featscale/errors.hpp"
#include "featscale/sparse.hpp"

namespace featscale {

/// Regular grid geometry with an active-area mask and an observation mask.
/// Node (i, j) of the n1 x n2 grid maps to full-grid index i*n2 + j
/// (row-major, row 0 is the northern edge). Vectors handled by the other
/// modules live on the *active* subset, ordered by increasing full-grid
/// index.
struct Lattice {
    int n1 = 0;  // rows, N-S extent
    int n2 = 0;  // columns, E-W extent
    double spacing = 1.0;
    std::vector<char> active;    // length n1*n2
    std::vector<char> observed;  // length n1*n2; observed implies active

    static Lattice full(int n1, int n2, double spacing) {
        Lattice lat;
        lat.n1 = n1;
        lat.n2 = n2;
        lat.spacing = spacing;
        lat.active.assign(static_cast<std::size_t>(n1) * n2, 1);
        lat.observed = lat.active;
        return lat;
    }

    int grid_size() const { return n1 * n2; }
    int index(int i, int j) const { return i * n2 + j; }
    std::pair<int, int> coords(int idx) const { return {idx / n2, idx % n2}; }

    int n_active() const {
        int c = 0;
        for (char a : active) c += a;
        return c;
    }
    int n_observed() const {
        int c = 0;
        for (char o : observed) c += o;
        return c;
    }

    void validate() const {
        if (n1 < 1 || n2 < 1) throw DimensionMismatch("lattice: grid dimensions must be positive");
        if (static_cast<int>(active.size()) != grid_size() ||
            static_cast<int>(observed.size()) != grid_size())
            throw DimensionMismatch("lattice: mask length != n1*n2");
        for (int i = 0; i < grid_size(); ++i)
            if (observed[i] && !active[i])
                throw DimensionMismatch("lattice: observed node outside the active area");
        if (n_active() < 2) throw DimensionMismatch("lattice: fewer than 2 active nodes");
        if (n_observed() < 1) throw DimensionMismatch("lattice: no observed nodes");
    }

    /// Active full-grid indices in vector order.
    std::vector<int> active_nodes() const {
        std::vector<int> nodes;
        nodes.reserve(active.size());
        for (int i = 0; i < grid_size(); ++i)
            if (active[i]) nodes.push_back(i);
        return nodes;
    }

    /// Map full-grid index -> active-vector slot (-1 when inactive).
    std::vector<int> active_slots() const {
        std::vector<int> slot(active.size(), -1);
        int c = 0;
        for (int i = 0; i < grid_size(); ++i)
            if (active[i]) slot[i] = c++;
        return slot;
    }

    /// Copy with every active node marked observed; detail fields exist at
    /// resampled locations too, so their variograms use all active nodes.
    Lattice fully_observed() const {
        Lattice lat = *this;
        lat.observed = lat.active;
        return lat;
    }
};

/// Axis weights of the grid model; alpha1 acts along the N-S axis,
/// alpha2 along E-W, constrained to alpha1 + alpha2 = 2.
struct AnisotropyWeights {
    double alpha1 = 1.0;
    double alpha2 = 1.0;

    void validate() const {
        if (!(alpha1 > 0.0) || !(alpha2 > 0.0))
            throw DimensionMismatch("anisotropy weights must be positive");
        if (std::abs(alpha1 + alpha2 - 2.0) > 1e-9)
            throw DimensionMismatch("anisotropy weights must sum to 2");
    }
};

/// Row-sum-zero structure matrix of a first-order random walk:
/// tridiagonal, diagonal (1, 2, ..., 2, 1), off-diagonals -1.
inline SparseMatrix structure_matrix(int n) {
    if (n < 2) throw DimensionMismatch("structure_matrix: n must be >= 2");
    SparseMatrix R;
    R.n = n;
    R.symmetric = true;
    R.row_ptr.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) {
        const bool first = (i == 0), last = (i == n - 1);
        if (!first) {
            R.col_idx.push_back(i - 1);
            R.values.push_back(-1.0);
        }
        R.col_idx.push_back(i);
        R.values.push_back(first || last ? 1.0 : 2.0);
        if (!last) {
            R.col_idx.push_back(i + 1);
            R.values.push_back(-1.0);
        }
        R.row_ptr[i + 1] = static_cast<int>(R.col_idx.size());
    }
    return R;
}

/// Spatial-weight matrix of the full regular grid: first-order neighbor
/// coupling, -alpha1 across rows and -alpha2 across columns, diagonal set
/// to the negated off-diagonal row sum (accumulated in column order, the
/// same order mask_q uses, so masking an all-active lattice is an exact
/// no-op).
inline SparseMatrix build_regular_q(const Lattice& lat, const AnisotropyWeights& w) {
    w.validate();
    if (lat.n1 < 2 || lat.n2 < 2) throw DimensionMismatch("build_regular_q: grid must be at least 2x2");
    if (lat.n_active() != lat.grid_size())
        throw DimensionMismatch("build_regular_q: lattice must be fully active; use mask_q for masks");
    const int n1 = lat.n1, n2 = lat.n2;
    SparseMatrix Q;
    Q.n = n1 * n2;
    Q.symmetric = true;
    Q.row_ptr.assign(Q.n + 1, 0);
    Q.col_idx.reserve(static_cast<std::size_t>(Q.n) * 5);
    Q.values.reserve(static_cast<std::size_t>(Q.n) * 5);
    for (int i = 0; i < n1; ++i) {
        for (int j = 0; j < n2; ++j) {
            const int idx = i * n2 + j;
            double diag = 0.0;
            // neighbors in column order: up, left, right, down
            const int up = idx - n2, left = idx - 1, right = idx + 1, down = idx + n2;
            std::size_t diag_slot = 0;
            if (i > 0) {
                Q.col_idx.push_back(up);
                Q.values.push_back(-w.alpha1);
                diag += w.alpha1;
            }
            if (j > 0) {
                Q.col_idx.push_back(left);
                Q.values.push_back(-w.alpha2);
                diag += w.alpha2;
            }
            Q.col_idx.push_back(idx);
            diag_slot = Q.values.size();
            Q.values.push_back(0.0);
            if (j < n2 - 1) {
                Q.col_idx.push_back(right);
                Q.values.push_back(-w.alpha2);
                diag += w.alpha2;
            }
            if (i < n1 - 1) {
                Q.col_idx.push_back(down);
                Q.values.push_back(-w.alpha1);
                diag += w.alpha1;
            }
            Q.values[diag_slot] = diag;
            Q.row_ptr[idx + 1] = static_cast<int>(Q.col_idx.size());
        }
    }
    return Q;
}

/// Restrict a full-grid Q to the active nodes: off-diagonals survive only
/// between pairs of active nodes and each diagonal is re-derived as the
/// negated sum of its surviving off-diagonal row entries, keeping row sums
/// at zero. Active nodes left with no active neighbor are reported through
/// `isolated` (their rows become all-zero).
inline SparseMatrix mask_q(const SparseMatrix& Q, const Lattice& lat,
                           std::vector<int>* isolated = nullptr) {
    if (Q.n != lat.grid_size()) throw DimensionMismatch("mask_q: Q must cover the full grid");
    lat.validate();
    const std::vector<int> slot = lat.active_slots();
    const std::vector<int> nodes = lat.active_nodes();
    const int m = static_cast<int>(nodes.size());
    SparseMatrix M;
    M.n = m;
    M.symmetric = true;
    M.row_ptr.assign(m + 1, 0);
    if (isolated) isolated->clear();
    for (int r = 0; r < m; ++r) {
        const int g = nodes[r];
        double diag = 0.0;
        std::size_t diag_slot = 0;
        bool has_neighbor = false;
        bool diag_written = false;
        for (int p = Q.row_ptr[g]; p < Q.row_ptr[g + 1]; ++p) {
            const int c = Q.col_idx[p];
            if (c == g) {
                M.col_idx.push_back(r);
                diag_slot = M.values.size();
                M.values.push_back(0.0);
                diag_written = true;
            } else if (slot[c] >= 0) {
                M.col_idx.push_back(slot[c]);
                M.values.push_back(Q.values[p]);
                diag += -Q.values[p];
                has_neighbor = true;
            }
        }
        // builders always store the diagonal explicitly, even when zero,
        // so shifted systems (I + lambda*Q etc.) share the pattern
        if (!diag_written) throw DimensionMismatch("mask_q: input Q lacks an explicit diagonal entry");
        M.values[diag_slot] = diag;
        M.row_ptr[r + 1] = static_cast<int>(M.col_idx.size());
        if (!has_neighbor && isolated) isolated->push_back(r);
    }
    return M;
}

/// Graph-Laplacian spatial-weight matrix from an explicit edge list.
inline SparseMatrix build_adjacency_q(int n_nodes, const std::vector<std::pair<int, int>>& edges,
                                      const std::vector<double>* weights = nullptr,
                                      std::vector<int>* isolated = nullptr) {
    if (n_nodes < 1) throw DimensionMismatch("build_adjacency_q: need at least one node");
    if (weights && weights->size() != edges.size())
        throw DimensionMismatch("build_adjacency_q: one weight per edge required");
    std::vector<std::tuple<int, int, double>> trips;
    trips.reserve(edges.size() * 2 + n_nodes);
    std::vector<std::pair<int, int>> seen;
    seen.reserve(edges.size());
    std::vector<double> degree(n_nodes, 0.0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        auto [i, j] = edges[e];
        if (i < 0 || i >= n_nodes || j < 0 || j >= n_nodes)
            throw GraphError("edge index out of range");
        if (i == j) throw GraphError("self loop at node " + std::to_string(i));
        const double wgt = weights ? (*weights)[e] : 1.0;
        if (!(wgt > 0.0)) throw GraphError("edge weight must be positive");
        const auto key = std::minmax(i, j);
        seen.emplace_back(key.first, key.second);
        trips.emplace_back(i, j, -wgt);
        trips.emplace_back(j, i, -wgt);
        degree[i] += wgt;
        degree[j] += wgt;
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
        throw GraphError("duplicate edge in adjacency list");
    if (isolated) {
        isolated->clear();
        for (int i = 0; i < n_nodes; ++i)
            if (degree[i] == 0.0) isolated->push_back(i);
    }
    for (int i = 0; i < n_nodes; ++i) trips.emplace_back(i, i, degree[i]);
    return SparseMatrix::from_triplets(n_nodes, std::move(trips), true);
}

/// Selection operator H restricting active-space vectors to the observed
/// subset; kept_indices[r] is the active-vector slot of observed slot r.
struct SelectionOperator {
    int n = 0;  // active dimension
    std::vector<int> kept_indices;

    int m() const { return static_cast<int>(kept_indices.size()); }
    bool is_identity() const { return m() == n; }

    std::vector<double> apply(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != n) throw DimensionMismatch("H: input length != n");
        std::vector<double> y(kept_indices.size());
        for (std::size_t r = 0; r < kept_indices.size(); ++r) y[r] = x[kept_indices[r]];
        return y;
    }

    std::vector<double> apply_transpose(std::span<const double> y) const {
        if (static_cast<int>(y.size()) != m()) throw DimensionMismatch("H': input length != m");
        std::vector<double> x(static_cast<std::size_t>(n), 0.0);
        for (std::size_t r = 0; r < kept_indices.size(); ++r) x[kept_indices[r]] = y[r];
        return x;
    }
};

inline SelectionOperator selection_operator(const Lattice& lat) {
    lat.validate();
    SelectionOperator H;
    H.n = lat.n_active();
    H.kept_indices.reserve(static_cast<std::size_t>(lat.n_observed()));
    int slot = 0;
    for (int g = 0; g < lat.grid_size(); ++g) {
        if (!lat.active[g]) continue;
        if (lat.observed[g]) H.kept_indices.push_back(slot);
        ++slot;
    }
    return H;
}

/// Spatial-weight matrix on the active nodes of a lattice (full-grid build
/// followed by masking, fused for convenience).
inline SparseMatrix build_lattice_q(const Lattice& lat, const AnisotropyWeights& w,
                                    std::vector<int>* isolated = nullptr) {
    Lattice full = Lattice::full(lat.n1, lat.n2, lat.spacing);
    const SparseMatrix Q = build_regular_q(full, w);
    return mask_q(Q, lat, isolated);
}

}  // namespace featscale
