#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "featscale/errors.hpp"
#include "featscale/lattice.hpp"
#include "featscale/rng.hpp"
#include "featscale/variogram.hpp"

namespace featscale {

enum class Region { whole, lower_half, upper_half };

/// Stationary Gaussian random field specification on a regular grid.
/// Coordinate scale factors stretch distances before the covariance is
/// evaluated, shortening the correlation length along the scaled axis.
struct FieldSpec {
    MaternParams params;
    int n1 = 0;
    int n2 = 0;
    double spacing = 1.0;
    double scale_x = 1.0;  // stretches E-W distances
    double scale_y = 1.0;  // stretches N-S distances
    Region region = Region::whole;
    double jitter = 1e-10;
    // Dense generation guard; the covariance factor costs nodes^2/2 doubles
    // (a 100x100 whole-grid field needs a ~400 MB workspace).
    int max_nodes = 40000;

    std::vector<int> region_nodes() const {
        std::vector<int> nodes;
        const int row_lo = (region == Region::lower_half) ? n1 / 2 : 0;
        const int row_hi = (region == Region::upper_half) ? n1 / 2 : n1;  // boundary row goes south
        for (int i = row_lo; i < row_hi; ++i)
            for (int j = 0; j < n2; ++j) nodes.push_back(i * n2 + j);
        return nodes;
    }
};

/// Dense lower-triangular Cholesky in packed row-major storage, blocked
/// eight rows at a time to keep the streamed panel reads shared.
inline void packed_cholesky(std::vector<double>& a, int n) {
    auto row = [&](int i) { return a.data() + static_cast<std::size_t>(i) * (i + 1) / 2; };
    auto finish_row = [&](int r, int from) {
        double* rr = row(r);
        for (int j = from; j < r; ++j) {
            const double* rj = row(j);
            double s = rr[j];
            for (int k = 0; k < j; ++k) s -= rr[k] * rj[k];
            rr[j] = s / rj[j];
        }
        double s = rr[r];
        for (int k = 0; k < r; ++k) s -= rr[k] * rr[k];
        if (!(s > 0.0)) throw NotPositiveDefinite("covariance factorization failed");
        rr[r] = std::sqrt(s);
    };
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        double* r0 = row(i);
        double* r1 = row(i + 1);
        double* r2 = row(i + 2);
        double* r3 = row(i + 3);
        double* r4 = row(i + 4);
        double* r5 = row(i + 5);
        double* r6 = row(i + 6);
        double* r7 = row(i + 7);
        for (int j = 0; j < i; ++j) {
            const double* rj = row(j);
            double s0 = r0[j], s1 = r1[j], s2 = r2[j], s3 = r3[j];
            double s4 = r4[j], s5 = r5[j], s6 = r6[j], s7 = r7[j];
            for (int k = 0; k < j; ++k) {
                const double v = rj[k];
                s0 -= r0[k] * v;
                s1 -= r1[k] * v;
                s2 -= r2[k] * v;
                s3 -= r3[k] * v;
                s4 -= r4[k] * v;
                s5 -= r5[k] * v;
                s6 -= r6[k] * v;
                s7 -= r7[k] * v;
            }
            const double d = 1.0 / rj[j];
            r0[j] = s0 * d;
            r1[j] = s1 * d;
            r2[j] = s2 * d;
            r3[j] = s3 * d;
            r4[j] = s4 * d;
            r5[j] = s5 * d;
            r6[j] = s6 * d;
            r7[j] = s7 * d;
        }
        for (int b = 0; b < 8; ++b) finish_row(i + b, i);
    }
    for (; i < n; ++i) finish_row(i, 0);
}

/// Matern Gaussian random field sampler. The covariance over the region's
/// nodes is assembled from a per-offset correlation table, factorized once,
/// and reused for every replicate drawn from the same specification.
class GrfSampler {
  public:
    explicit GrfSampler(const FieldSpec& spec) : spec_(spec) {
        spec.params.validate(std::max(spec.params.smoothness, 5.0));
        if (spec.n1 < 1 || spec.n2 < 1) throw DimensionMismatch("grf: empty grid");
        nodes_ = spec.region_nodes();
        const int n = static_cast<int>(nodes_.size());
        if (n > spec.max_nodes)
            throw DimensionMismatch("grf: region exceeds the dense-generation guard (" +
                                    std::to_string(n) + " > " + std::to_string(spec.max_nodes) +
                                    " nodes)");

        // correlation lookup over |row offset| x |col offset|
        const int orows = spec.n1, ocols = spec.n2;
        std::vector<double> corr(static_cast<std::size_t>(orows) * ocols);
        for (int dr = 0; dr < orows; ++dr)
            for (int dc = 0; dc < ocols; ++dc) {
                const double dy = dr * spec.spacing * spec.scale_y;
                const double dx = dc * spec.spacing * spec.scale_x;
                corr[static_cast<std::size_t>(dr) * ocols + dc] =
                    matern_correlation(std::hypot(dx, dy) / spec.params.range,
                                       spec.params.smoothness);
            }

        chol_.assign(static_cast<std::size_t>(n) * (n + 1) / 2, 0.0);
        double jitter = spec.jitter;
        for (;;) {
            std::size_t p = 0;
            for (int a = 0; a < n; ++a) {
                const int ra = nodes_[a] / spec.n2, ca = nodes_[a] % spec.n2;
                for (int b = 0; b <= a; ++b, ++p) {
                    const int rb = nodes_[b] / spec.n2, cb = nodes_[b] % spec.n2;
                    const int dr = std::abs(ra - rb), dc = std::abs(ca - cb);
                    double v = spec.params.partial_sill *
                               corr[static_cast<std::size_t>(dr) * ocols + dc];
                    if (a == b) v += spec.params.nugget + jitter;
                    chol_[p] = v;
                }
            }
            try {
                packed_cholesky(chol_, n);
                break;
            } catch (const NotPositiveDefinite&) {
                jitter *= 10.0;
                if (jitter > 1e-6) throw;
            }
        }
    }

    const FieldSpec& spec() const { return spec_; }

    /// One replicate on the full grid; nodes outside the region stay zero.
    std::vector<double> sample(RngState& rng) const {
        const int n = static_cast<int>(nodes_.size());
        std::vector<double> z(static_cast<std::size_t>(n));
        for (auto& zi : z) zi = rng.normal();
        std::vector<double> field(static_cast<std::size_t>(spec_.n1) * spec_.n2, 0.0);
        std::size_t p = 0;
        for (int a = 0; a < n; ++a) {
            double s = 0.0;
            for (int b = 0; b <= a; ++b, ++p) s += chol_[p] * z[b];
            field[nodes_[a]] = s;
        }
        return field;
    }

  private:
    FieldSpec spec_;
    std::vector<int> nodes_;
    std::vector<double> chol_;
};

inline std::vector<double> sample_grf(const FieldSpec& spec, RngState& rng) {
    return GrfSampler(spec).sample(rng);
}

/// Sum of equally sized fields plus white observation noise.
inline std::vector<double> compose(const std::vector<std::vector<double>>& fields, double noise_sd,
                                   RngState& rng) {
    if (fields.empty()) throw DimensionMismatch("compose: no fields");
    const std::size_t n = fields.front().size();
    for (const auto& f : fields)
        if (f.size() != n) throw DimensionMismatch("compose: field lengths differ");
    std::vector<double> out(n, 0.0);
    for (const auto& f : fields)
        for (std::size_t i = 0; i < n; ++i) out[i] += f[i];
    if (noise_sd > 0.0)
        for (auto& v : out) v += noise_sd * rng.normal();
    return out;
}

/// Clear the observation mask on a rectangular block; the nodes stay
/// active, so the sampler treats them as missing rather than excluded.
inline Lattice insert_missing_block(const Lattice& lat, int top_row, int left_col, int height,
                                    int width) {
    if (height < 0 || width < 0 || top_row < 0 || left_col < 0 || top_row + height > lat.n1 ||
        left_col + width > lat.n2)
        throw DimensionMismatch("insert_missing_block: block out of bounds");
    Lattice out = lat;
    for (int i = top_row; i < top_row + height; ++i)
        for (int j = left_col; j < left_col + width; ++j)
            out.observed[out.index(i, j)] = 0;
    return out;
}

}  // namespace featscale
