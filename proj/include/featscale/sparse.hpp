#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include "featscale/errors.hpp"

namespace featscale {

/// Square sparse matrix in compressed sparse row form. Column indices are
/// strictly increasing within each row. Symmetric matrices store both
/// triangles; the flag records the caller's promise, it is not re-verified
/// on every operation.
struct SparseMatrix {
    int n = 0;
    std::vector<int> row_ptr;    // length n+1
    std::vector<int> col_idx;    // length nnz
    std::vector<double> values;  // length nnz
    bool symmetric = false;

    int nnz() const { return row_ptr.empty() ? 0 : row_ptr[n]; }

    std::span<const int> row_cols(int i) const {
        return {col_idx.data() + row_ptr[i], static_cast<std::size_t>(row_ptr[i + 1] - row_ptr[i])};
    }
    std::span<const double> row_vals(int i) const {
        return {values.data() + row_ptr[i], static_cast<std::size_t>(row_ptr[i + 1] - row_ptr[i])};
    }

    /// Entry lookup by binary search; absent entries read as zero.
    double at(int i, int j) const {
        const int* first = col_idx.data() + row_ptr[i];
        const int* last = col_idx.data() + row_ptr[i + 1];
        const int* it = std::lower_bound(first, last, j);
        if (it == last || *it != j) return 0.0;
        return values[static_cast<std::size_t>(it - col_idx.data())];
    }

    double* find(int i, int j) {
        const int* first = col_idx.data() + row_ptr[i];
        const int* last = col_idx.data() + row_ptr[i + 1];
        const int* it = std::lower_bound(first, last, j);
        if (it == last || *it != j) return nullptr;
        return values.data() + (it - col_idx.data());
    }

    static SparseMatrix from_triplets(int n, std::vector<std::tuple<int, int, double>> trips,
                                      bool symmetric = false) {
        std::sort(trips.begin(), trips.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
        });
        SparseMatrix A;
        A.n = n;
        A.symmetric = symmetric;
        A.row_ptr.assign(n + 1, 0);
        A.col_idx.reserve(trips.size());
        A.values.reserve(trips.size());
        for (const auto& [i, j, v] : trips) {
            if (i < 0 || i >= n || j < 0 || j >= n)
                throw DimensionMismatch("triplet index out of range");
            A.col_idx.push_back(j);
            A.values.push_back(v);
            A.row_ptr[i + 1]++;
        }
        for (int i = 1; i <= n; ++i) A.row_ptr[i] += A.row_ptr[i - 1];
        // merge duplicates within rows
        std::vector<int> merged_cols;
        std::vector<double> merged_vals;
        std::vector<int> merged_ptr(n + 1, 0);
        merged_cols.reserve(A.col_idx.size());
        merged_vals.reserve(A.values.size());
        for (int i = 0; i < n; ++i) {
            int p = A.row_ptr[i];
            const int end = A.row_ptr[i + 1];
            while (p < end) {
                const int j = A.col_idx[p];
                double v = 0.0;
                while (p < end && A.col_idx[p] == j) v += A.values[p++];
                merged_cols.push_back(j);
                merged_vals.push_back(v);
            }
            merged_ptr[i + 1] = static_cast<int>(merged_cols.size());
        }
        A.row_ptr = std::move(merged_ptr);
        A.col_idx = std::move(merged_cols);
        A.values = std::move(merged_vals);
        return A;
    }
};

/// Exact sparse matrix-vector product.
inline std::vector<double> matvec(const SparseMatrix& A, std::span<const double> v) {
    if (static_cast<int>(v.size()) != A.n)
        throw DimensionMismatch("matvec: vector length != matrix dimension");
    std::vector<double> out(static_cast<std::size_t>(A.n));
    for (int i = 0; i < A.n; ++i) {
        double s = 0.0;
        for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) s += A.values[p] * v[A.col_idx[p]];
        out[i] = s;
    }
    return out;
}

inline void matvec_into(const SparseMatrix& A, std::span<const double> v, std::span<double> out) {
    if (static_cast<int>(v.size()) != A.n || static_cast<int>(out.size()) != A.n)
        throw DimensionMismatch("matvec: vector length != matrix dimension");
    for (int i = 0; i < A.n; ++i) {
        double s = 0.0;
        for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) s += A.values[p] * v[A.col_idx[p]];
        out[i] = s;
    }
}

/// Connected components of the off-diagonal adjacency structure.
/// Returns a per-node component label in [0, n_components).
inline std::vector<int> connected_components(const SparseMatrix& A, int* n_components = nullptr) {
    std::vector<int> label(static_cast<std::size_t>(A.n), -1);
    std::vector<int> stack;
    int comp = 0;
    for (int s = 0; s < A.n; ++s) {
        if (label[s] != -1) continue;
        label[s] = comp;
        stack.push_back(s);
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) {
                const int j = A.col_idx[p];
                if (j != i && label[j] == -1) {
                    label[j] = comp;
                    stack.push_back(j);
                }
            }
        }
        ++comp;
    }
    if (n_components) *n_components = comp;
    return label;
}

}  // namespace featscale
