#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "featscale/errors.hpp"
#include "featscale/rng.hpp"
#include "featscale/sparse.hpp"

namespace featscale {

enum class Ordering { natural, bandwidth_reducing };

/// Reverse Cuthill-McKee order of a symmetric sparsity pattern. Each
/// connected component is swept breadth-first from a pseudo-peripheral
/// node, neighbors visited in (degree, index) order, and the whole
/// sequence reversed. Returns perm with perm[k] = original index of the
/// node placed at position k.
inline std::vector<int> reverse_cuthill_mckee(const SparseMatrix& A) {
    const int n = A.n;
    std::vector<int> degree(n, 0);
    for (int i = 0; i < n; ++i)
        for (int j : A.row_cols(i))
            if (j != i) degree[i]++;

    std::vector<int> order;
    order.reserve(n);
    std::vector<char> visited(n, 0);
    std::vector<int> level_of(n, -1);

    auto bfs_levels = [&](int root, std::vector<int>& last_level) {
        std::fill(level_of.begin(), level_of.end(), -1);
        std::vector<int> frontier{root};
        level_of[root] = 0;
        int depth = 0;
        last_level = frontier;
        while (!frontier.empty()) {
            std::vector<int> next;
            for (int i : frontier)
                for (int j : A.row_cols(i))
                    if (j != i && level_of[j] == -1) {
                        level_of[j] = depth + 1;
                        next.push_back(j);
                    }
            if (next.empty()) break;
            last_level = next;
            frontier = std::move(next);
            ++depth;
        }
        return depth;
    };

    auto pseudo_peripheral = [&](int seed) {
        int root = seed;
        std::vector<int> last;
        int depth = bfs_levels(root, last);
        for (int iter = 0; iter < 4; ++iter) {
            int best = last.front();
            for (int v : last)
                if (degree[v] < degree[best] || (degree[v] == degree[best] && v < best)) best = v;
            std::vector<int> last2;
            const int depth2 = bfs_levels(best, last2);
            if (depth2 <= depth) break;
            depth = depth2;
            root = best;
            last = std::move(last2);
        }
        return root;
    };

    std::vector<int> nbrs;
    for (int seed = 0; seed < n; ++seed) {
        if (visited[seed]) continue;
        // smallest-degree unvisited node of this component as the seed
        const int root = pseudo_peripheral(seed);
        std::size_t head = order.size();
        order.push_back(root);
        visited[root] = 1;
        while (head < order.size()) {
            const int i = order[head++];
            nbrs.clear();
            for (int j : A.row_cols(i))
                if (j != i && !visited[j]) nbrs.push_back(j);
            std::sort(nbrs.begin(), nbrs.end(), [&](int a, int b) {
                return degree[a] != degree[b] ? degree[a] < degree[b] : a < b;
            });
            for (int j : nbrs) {
                visited[j] = 1;
                order.push_back(j);
            }
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

/// Cholesky factor T (upper triangular, positive diagonal) of a permuted
/// symmetric positive-definite matrix: T'T = P'AP. Stored in CSR with
/// the diagonal first in each row, so rows of T double as columns of the
/// lower factor L = T'.
struct CholeskyFactor {
    int n = 0;
    std::vector<int> perm;  // perm[k] = original index at permuted position k
    std::vector<int> pinv;  // inverse permutation
    SparseMatrix upper;     // T; within row j the diagonal entry comes first

    /// Solve A x = b through the two triangular systems.
    std::vector<double> solve(std::span<const double> b) const {
        if (static_cast<int>(b.size()) != n) throw DimensionMismatch("solve: rhs length != dimension");
        std::vector<double> w(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) w[k] = b[perm[k]];
        solve_permuted(w);
        std::vector<double> x(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) x[perm[k]] = w[k];
        return x;
    }

    /// Forward then backward substitution acting on the permuted vector.
    void solve_permuted(std::span<double> w) const {
        const auto& rp = upper.row_ptr;
        const auto& ci = upper.col_idx;
        const auto& vv = upper.values;
        // L w = b with L = T' accessed column-wise through rows of T
        for (int j = 0; j < n; ++j) {
            const double wj = w[j] / vv[rp[j]];
            w[j] = wj;
            for (int p = rp[j] + 1; p < rp[j + 1]; ++p) w[ci[p]] -= vv[p] * wj;
        }
        // T x = w row-wise, bottom up
        for (int k = n - 1; k >= 0; --k) {
            double s = w[k];
            for (int p = rp[k] + 1; p < rp[k + 1]; ++p) s -= vv[p] * w[ci[p]];
            w[k] = s / vv[rp[k]];
        }
    }

    /// Backward substitution only: returns v with T v = z (permuted frame).
    void backsolve_permuted(std::span<double> z) const {
        const auto& rp = upper.row_ptr;
        const auto& ci = upper.col_idx;
        const auto& vv = upper.values;
        for (int k = n - 1; k >= 0; --k) {
            double s = z[k];
            for (int p = rp[k] + 1; p < rp[k + 1]; ++p) s -= vv[p] * z[ci[p]];
            z[k] = s / vv[rp[k]];
        }
    }
};

/// Pattern-only analysis of a symmetric CSR matrix: elimination ordering,
/// elimination tree, static row patterns of the factor, and the scatter
/// map from the input's value array. The analysis depends only on the
/// sparsity pattern, so one instance serves every matrix that shares the
/// pattern (e.g. I + lambda*Q across lambdas, or kx*Q + ky*D across
/// Gibbs sweeps).
class CholeskySymbolic {
  public:
    CholeskySymbolic() = default;

    explicit CholeskySymbolic(const SparseMatrix& A, Ordering ordering = Ordering::bandwidth_reducing) {
        if (A.n < 1) throw DimensionMismatch("cholesky: dimension must be >= 1");
        if (!A.symmetric) throw DimensionMismatch("cholesky: matrix must be flagged symmetric");
        n_ = A.n;
        if (ordering == Ordering::natural) {
            perm_.resize(n_);
            std::iota(perm_.begin(), perm_.end(), 0);
        } else {
            perm_ = reverse_cuthill_mckee(A);
        }
        pinv_.resize(n_);
        for (int k = 0; k < n_; ++k) pinv_[perm_[k]] = k;

        // Upper-triangular pattern of C = P'AP, column by column, together
        // with the positions in A.values feeding each column.
        scatter_ptr_.assign(n_ + 1, 0);
        for (int k = 0; k < n_; ++k) {
            const int r = perm_[k];
            for (int p = A.row_ptr[r]; p < A.row_ptr[r + 1]; ++p)
                if (pinv_[A.col_idx[p]] <= k) scatter_ptr_[k + 1]++;
        }
        for (int k = 0; k < n_; ++k) scatter_ptr_[k + 1] += scatter_ptr_[k];
        scatter_row_.resize(scatter_ptr_[n_]);
        scatter_src_.resize(scatter_ptr_[n_]);
        {
            std::vector<int> fill(scatter_ptr_.begin(), scatter_ptr_.end() - 1);
            for (int k = 0; k < n_; ++k) {
                const int r = perm_[k];
                for (int p = A.row_ptr[r]; p < A.row_ptr[r + 1]; ++p) {
                    const int i = pinv_[A.col_idx[p]];
                    if (i <= k) {
                        scatter_row_[fill[k]] = i;
                        scatter_src_[fill[k]] = p;
                        fill[k]++;
                    }
                }
            }
        }

        // Elimination tree over the permuted upper pattern.
        std::vector<int> parent(n_, -1), ancestor(n_, -1);
        for (int k = 0; k < n_; ++k) {
            for (int p = scatter_ptr_[k]; p < scatter_ptr_[k + 1]; ++p) {
                int i = scatter_row_[p];
                while (i != -1 && i < k) {
                    const int nexti = ancestor[i];
                    ancestor[i] = k;
                    if (nexti == -1) parent[i] = k;
                    i = nexti;
                }
            }
        }

        // Row patterns of L (topological order within each row) by walking
        // tree paths; total work is proportional to the factor's nonzeros.
        pattern_ptr_.assign(n_ + 1, 0);
        std::vector<int> flag(n_, -1);
        std::vector<int> stack(n_);
        std::vector<int> col_count(n_, 1);  // diagonal
        std::vector<std::vector<int>> rows(n_);
        for (int k = 0; k < n_; ++k) {
            flag[k] = k;
            auto& rowk = rows[k];
            for (int p = scatter_ptr_[k]; p < scatter_ptr_[k + 1]; ++p) {
                int i = scatter_row_[p];
                if (i == k) continue;
                int top = 0;
                while (flag[i] != k) {
                    stack[top++] = i;
                    flag[i] = k;
                    i = parent[i];
                }
                // path discovered root-ward; emit in ascending order
                while (top > 0) rowk.push_back(stack[--top]);
            }
            std::sort(rowk.begin(), rowk.end());
            for (int i : rowk) col_count[i]++;
            pattern_ptr_[k + 1] = pattern_ptr_[k] + static_cast<int>(rowk.size());
        }
        pattern_idx_.resize(pattern_ptr_[n_]);
        for (int k = 0; k < n_; ++k)
            std::copy(rows[k].begin(), rows[k].end(), pattern_idx_.begin() + pattern_ptr_[k]);

        t_row_ptr_.assign(n_ + 1, 0);
        for (int j = 0; j < n_; ++j) t_row_ptr_[j + 1] = t_row_ptr_[j] + col_count[j];
    }

    int dim() const { return n_; }
    int factor_nnz() const { return t_row_ptr_.empty() ? 0 : t_row_ptr_[n_]; }
    const std::vector<int>& perm() const { return perm_; }

    /// Numeric phase. A must share the pattern the analysis was built on.
    /// Up-looking: row k of L is produced by a sparse triangular solve
    /// against the earlier rows, then appended entry-by-entry to the rows
    /// of T (columns of L).
    CholeskyFactor factor(const SparseMatrix& A) const {
        if (A.n != n_) throw DimensionMismatch("cholesky factor: dimension changed since analysis");
        CholeskyFactor F;
        F.n = n_;
        F.perm = perm_;
        F.pinv = pinv_;
        F.upper.n = n_;
        F.upper.symmetric = false;
        F.upper.row_ptr = t_row_ptr_;
        F.upper.col_idx.assign(static_cast<std::size_t>(factor_nnz()), 0);
        F.upper.values.assign(static_cast<std::size_t>(factor_nnz()), 0.0);

        double max_diag = 0.0;
        for (int i = 0; i < n_; ++i) max_diag = std::max(max_diag, std::abs(A.at(i, i)));
        const double pivot_floor = 1e-12 * max_diag;

        std::vector<double> x(static_cast<std::size_t>(n_), 0.0);
        std::vector<int> cpos(t_row_ptr_.begin(), t_row_ptr_.end() - 1);
        auto& tc = F.upper.col_idx;
        auto& tv = F.upper.values;

        for (int k = 0; k < n_; ++k) {
            for (int p = scatter_ptr_[k]; p < scatter_ptr_[k + 1]; ++p)
                x[scatter_row_[p]] = A.values[scatter_src_[p]];
            double d = x[k];
            x[k] = 0.0;
            for (int q = pattern_ptr_[k]; q < pattern_ptr_[k + 1]; ++q) {
                const int j = pattern_idx_[q];
                const double tjj = tv[t_row_ptr_[j]];
                const double lkj = x[j] / tjj;
                x[j] = 0.0;
                for (int p = t_row_ptr_[j] + 1; p < cpos[j]; ++p) x[tc[p]] -= tv[p] * lkj;
                d -= lkj * lkj;
                tc[cpos[j]] = k;
                tv[cpos[j]] = lkj;
                cpos[j]++;
            }
            if (!(d > pivot_floor) || !std::isfinite(d))
                throw NotPositiveDefinite("non-positive pivot at permuted row " + std::to_string(k));
            tc[cpos[k]] = k;
            tv[cpos[k]] = std::sqrt(d);
            cpos[k]++;
        }
        return F;
    }

  private:
    int n_ = 0;
    std::vector<int> perm_, pinv_;
    std::vector<int> scatter_ptr_, scatter_row_, scatter_src_;
    std::vector<int> pattern_ptr_, pattern_idx_;
    std::vector<int> t_row_ptr_;
};

/// One-shot analysis + factorization.
inline CholeskyFactor cholesky(const SparseMatrix& A, Ordering ordering = Ordering::bandwidth_reducing) {
    return CholeskySymbolic(A, ordering).factor(A);
}

inline std::vector<double> solve(const CholeskyFactor& F, std::span<const double> b) {
    return F.solve(b);
}

/// One draw from the canonical-form Gaussian N(Prec^-1 b, Prec^-1) using a
/// factor of Prec: mean by a full solve, fluctuation by back-substituting a
/// standard-normal vector.
inline std::vector<double> sample_canonical_normal(const CholeskyFactor& F,
                                                   std::span<const double> canonical_mean,
                                                   RngState& rng) {
    std::vector<double> out = F.solve(canonical_mean);
    std::vector<double> z(static_cast<std::size_t>(F.n));
    for (auto& zi : z) zi = rng.normal();
    F.backsolve_permuted(z);
    for (int k = 0; k < F.n; ++k) out[F.perm[k]] += z[k];
    return out;
}

inline std::vector<double> sample_canonical_normal(const SparseMatrix& precision,
                                                   std::span<const double> canonical_mean,
                                                   RngState& rng,
                                                   Ordering ordering = Ordering::bandwidth_reducing) {
    if (static_cast<int>(canonical_mean.size()) != precision.n)
        throw DimensionMismatch("sample_canonical_normal: length mismatch");
    const CholeskyFactor F = cholesky(precision, ordering);
    return sample_canonical_normal(F, canonical_mean, rng);
}

}  // namespace featscale
