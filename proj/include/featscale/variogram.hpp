#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "featscale/errors.hpp"
#include "featscale/lattice.hpp"
#include "featscale/parallel.hpp"
#include "featscale/rng.hpp"
#include "featscale/scalespace.hpp"
#include "featscale/stats.hpp"

namespace featscale {

enum class Direction { omni, ew, ns };

inline const char* direction_name(Direction d) {
    switch (d) {
        case Direction::omni: return "omni";
        case Direction::ew: return "EW";
        default: return "NS";
    }
}

/// Matern correlation, rho(u) = 2^(1-nu)/Gamma(nu) * u^nu * K_nu(u) with
/// u = distance / range. The stated ranges of the synthetic setups are in
/// grid-spacing units under this convention.
inline double matern_correlation(double u, double nu) {
    if (u <= 1e-10) return 1.0;
    if (u > 700.0) return 0.0;  // K_nu underflows
    const double c = std::pow(2.0, 1.0 - nu) / std::tgamma(nu);
    const double r = c * std::pow(u, nu) * std::cyl_bessel_k(nu, u);
    return std::clamp(r, 0.0, 1.0);
}

/// Matern variogram parameters and the derived effective range (distance
/// at which the covariance has decayed to 5% of the partial sill).
struct MaternParams {
    double range = 1.0;          // theta_1
    double partial_sill = 1.0;   // theta_2
    double nugget = 0.0;         // theta_3
    double smoothness = 1.0;     // theta_4
    double effective_range = 0.0;

    void validate(double smoothness_cap = 5.0) const {
        if (!(range > 0.0) || !(partial_sill > 0.0) || nugget < 0.0 || !(smoothness > 0.0))
            throw DimensionMismatch("matern parameters out of domain");
        if (smoothness > smoothness_cap + 1e-12)
            throw DimensionMismatch("smoothness exceeds its cap");
    }
};

/// Semivariance gamma(h); gamma(0) = 0 by convention, the nugget is the
/// limit from above.
inline double matern_semivariance(double h, const MaternParams& p) {
    if (h < 0.0) throw DimensionMismatch("matern_semivariance: negative distance");
    if (h == 0.0) return 0.0;
    return p.nugget + p.partial_sill * (1.0 - matern_correlation(h / p.range, p.smoothness));
}

/// Distance where the correlation has dropped to 5%. Solved by bisection
/// in u = d/range, so scaling the range scales the result exactly.
inline double effective_range(const MaternParams& p) {
    if (!(p.partial_sill > 0.0)) throw DimensionMismatch("effective_range: partial sill must be > 0");
    const double target = 0.05;
    double hi = 1e3;
    while (matern_correlation(hi, p.smoothness) > target) {
        hi *= 10.0;
        if (hi > 1e9) throw BracketExhausted("effective_range: correlation does not reach 5%");
    }
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (matern_correlation(mid, p.smoothness) > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi) * p.range;
}

/// Binned Matheron estimator. Bins partition (0, max_lag] into n_bins
/// equal widths; a bin's reported lag is the mean distance of its pairs
/// (the nominal center is kept for empty bins, which carry pair_count 0
/// and an undefined semivariance).
struct VariogramBins {
    std::vector<double> lag_centers;
    std::vector<double> semivariances;
    std::vector<std::int64_t> pair_counts;
    Direction direction = Direction::omni;
    double lag_half_width = 0.0;
    double angle_tol_deg = 22.5;
    double max_lag = 0.0;

    int n_nonempty() const {
        int c = 0;
        for (auto p : pair_counts) c += (p > 0);
        return c;
    }
};

namespace detail {

/// Right-closed equal-width bins over (0, max_lag]: a pair at exactly a
/// bin's upper edge belongs to that bin.
inline int lag_bin(double dist, double width, int n_bins) {
    int b = static_cast<int>(std::ceil(dist / width)) - 1;
    if (b < 0) b = 0;
    if (b >= n_bins) b = n_bins - 1;
    return b;
}

struct Offset {
    int dr, dc, bin;
    double dist;
};

inline std::vector<Offset> lag_offsets(const Lattice& lat, Direction dir, double max_lag,
                                       int n_bins, double angle_tol_deg) {
    const double width = max_lag / n_bins;
    const int max_steps = static_cast<int>(std::floor(max_lag / lat.spacing)) + 1;
    std::vector<Offset> offsets;
    for (int dr = 0; dr <= std::min(max_steps, lat.n1 - 1); ++dr) {
        const int dc_lo = (dr == 0) ? 1 : -std::min(max_steps, lat.n2 - 1);
        for (int dc = dc_lo; dc <= std::min(max_steps, lat.n2 - 1); ++dc) {
            const double dist = lat.spacing * std::hypot(dr, dc);
            if (dist > max_lag || dist == 0.0) continue;
            if (dir == Direction::ew &&
                std::atan2(std::abs(dr), std::abs(dc)) * 180.0 / M_PI > angle_tol_deg)
                continue;
            if (dir == Direction::ns &&
                std::atan2(std::abs(dc), std::abs(dr)) * 180.0 / M_PI > angle_tol_deg)
                continue;
            offsets.push_back({dr, dc, lag_bin(dist, width, n_bins), dist});
        }
    }
    return offsets;
}

/// Full-grid value image with NaN at nodes excluded from pair counting.
inline std::vector<double> value_image(std::span<const double> field, const Lattice& lat) {
    if (static_cast<int>(field.size()) != lat.n_active())
        throw DimensionMismatch("variogram: field length != active node count");
    std::vector<double> img(static_cast<std::size_t>(lat.grid_size()),
                            std::numeric_limits<double>::quiet_NaN());
    int slot = 0;
    for (int g = 0; g < lat.grid_size(); ++g) {
        if (!lat.active[g]) continue;
        if (lat.observed[g]) img[g] = field[slot];
        ++slot;
    }
    return img;
}

}  // namespace detail

inline double default_max_lag(const Lattice& lat) {
    return lat.spacing * std::hypot(lat.n1 - 1, lat.n2 - 1) / 3.0;
}

inline VariogramBins empirical_variogram(std::span<const double> field, const Lattice& lat,
                                         Direction dir, double max_lag, int n_bins,
                                         double angle_tol_deg = 22.5) {
    if (n_bins < 1) throw DimensionMismatch("variogram: need at least one bin");
    if (max_lag <= 0.0) max_lag = default_max_lag(lat);
    if (!(max_lag > lat.spacing)) throw DimensionMismatch("variogram: max_lag must exceed the spacing");

    const auto img = detail::value_image(field, lat);
    const auto offsets = detail::lag_offsets(lat, dir, max_lag, n_bins, angle_tol_deg);

    std::vector<double> acc(static_cast<std::size_t>(n_bins), 0.0);
    std::vector<double> dist_sum(static_cast<std::size_t>(n_bins), 0.0);
    std::vector<std::int64_t> count(static_cast<std::size_t>(n_bins), 0);

    for (int r = 0; r < lat.n1; ++r) {
        for (int c = 0; c < lat.n2; ++c) {
            const double vi = img[static_cast<std::size_t>(r) * lat.n2 + c];
            if (std::isnan(vi)) continue;
            for (const auto& o : offsets) {
                const int r2 = r + o.dr, c2 = c + o.dc;
                if (r2 < 0 || r2 >= lat.n1 || c2 < 0 || c2 >= lat.n2) continue;
                const double vj = img[static_cast<std::size_t>(r2) * lat.n2 + c2];
                if (std::isnan(vj)) continue;
                const double d = vi - vj;
                acc[o.bin] += d * d;
                dist_sum[o.bin] += o.dist;
                count[o.bin]++;
            }
        }
    }

    VariogramBins bins;
    bins.direction = dir;
    bins.max_lag = max_lag;
    bins.lag_half_width = 0.5 * max_lag / n_bins;
    bins.angle_tol_deg = angle_tol_deg;
    bins.pair_counts = std::move(count);
    bins.lag_centers.resize(n_bins);
    bins.semivariances.resize(n_bins);
    const double width = max_lag / n_bins;
    for (int b = 0; b < n_bins; ++b) {
        if (bins.pair_counts[b] > 0) {
            bins.lag_centers[b] = dist_sum[b] / bins.pair_counts[b];
            bins.semivariances[b] = 0.5 * acc[b] / bins.pair_counts[b];
        } else {
            bins.lag_centers[b] = (b + 0.5) * width;
            bins.semivariances[b] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return bins;
}

/// Row (E-W) or column (N-S) transects partitioned into consecutive groups
/// of keep_one_of; one transect per group is retained uniformly at random.
inline std::vector<int> transect_subsample(const Lattice& lat, Direction dir, int keep_one_of,
                                           RngState& rng) {
    if (keep_one_of < 1) throw DimensionMismatch("transect_subsample: keep_one_of must be >= 1");
    if (dir == Direction::omni)
        throw DimensionMismatch("transect_subsample: requires a directional variogram");
    const int total = (dir == Direction::ew) ? lat.n1 : lat.n2;
    std::vector<int> kept;
    for (int start = 0; start < total; start += keep_one_of) {
        const int size = std::min(keep_one_of, total - start);
        kept.push_back(start + std::min(size - 1, static_cast<int>(rng.uniform() * size)));
    }
    return kept;
}

/// Directional variogram restricted to pairs within the listed transects
/// (rows for E-W, columns for N-S); pairs run exactly along the axis.
inline VariogramBins empirical_variogram_transects(std::span<const double> field, const Lattice& lat,
                                                   Direction dir, const std::vector<int>& transects,
                                                   double max_lag, int n_bins) {
    if (dir == Direction::omni)
        throw DimensionMismatch("transect variogram: requires a directional variogram");
    if (n_bins < 1) throw DimensionMismatch("variogram: need at least one bin");
    if (max_lag <= 0.0) max_lag = default_max_lag(lat);
    const auto img = detail::value_image(field, lat);

    std::vector<double> acc(static_cast<std::size_t>(n_bins), 0.0);
    std::vector<double> dist_sum(static_cast<std::size_t>(n_bins), 0.0);
    std::vector<std::int64_t> count(static_cast<std::size_t>(n_bins), 0);
    const double width = max_lag / n_bins;
    const int along = (dir == Direction::ew) ? lat.n2 : lat.n1;
    const int max_steps = std::min(static_cast<int>(std::floor(max_lag / lat.spacing)), along - 1);

    for (int t : transects) {
        for (int a = 0; a < along; ++a) {
            const int g1 = (dir == Direction::ew) ? t * lat.n2 + a : a * lat.n2 + t;
            const double vi = img[g1];
            if (std::isnan(vi)) continue;
            for (int step = 1; step <= max_steps && a + step < along; ++step) {
                const int g2 = (dir == Direction::ew) ? t * lat.n2 + (a + step)
                                                      : (a + step) * lat.n2 + t;
                const double vj = img[g2];
                if (std::isnan(vj)) continue;
                const double dist = lat.spacing * step;
                if (dist > max_lag) break;
                const int bin = detail::lag_bin(dist, width, n_bins);
                const double d = vi - vj;
                acc[bin] += d * d;
                dist_sum[bin] += dist;
                count[bin]++;
            }
        }
    }

    VariogramBins bins;
    bins.direction = dir;
    bins.max_lag = max_lag;
    bins.lag_half_width = 0.5 * width;
    bins.angle_tol_deg = 0.0;
    bins.pair_counts = std::move(count);
    bins.lag_centers.resize(n_bins);
    bins.semivariances.resize(n_bins);
    for (int b = 0; b < n_bins; ++b) {
        if (bins.pair_counts[b] > 0) {
            bins.lag_centers[b] = dist_sum[b] / bins.pair_counts[b];
            bins.semivariances[b] = 0.5 * acc[b] / bins.pair_counts[b];
        } else {
            bins.lag_centers[b] = (b + 0.5) * width;
            bins.semivariances[b] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return bins;
}

/// Nelder-Mead with restarts; returns best point found and whether the
/// simplex collapsed below tolerance.
struct NelderMeadResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
};

inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& fn,
                                    std::vector<double> x0, double step, int max_iter = 700,
                                    double ftol = 1e-12, int restarts = 1) {
    const int d = static_cast<int>(x0.size());
    NelderMeadResult best;
    best.x = x0;
    best.f = fn(x0);

    for (int round = 0; round <= restarts; ++round) {
        std::vector<std::vector<double>> simplex(d + 1, best.x);
        for (int i = 0; i < d; ++i) simplex[i + 1][i] += step / (round + 1);
        std::vector<double> fv(d + 1);
        for (int i = 0; i <= d; ++i) fv[i] = fn(simplex[i]);

        bool converged = false;
        for (int it = 0; it < max_iter; ++it) {
            std::vector<int> ord(d + 1);
            for (int i = 0; i <= d; ++i) ord[i] = i;
            std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fv[a] < fv[b]; });
            const int lo = ord[0], hi = ord[d], second_hi = ord[d - 1];
            const double spread = std::abs(fv[hi] - fv[lo]);
            if (spread <= ftol * (std::abs(fv[lo]) + ftol)) {
                converged = true;
                break;
            }
            std::vector<double> centroid(d, 0.0);
            for (int i = 0; i <= d; ++i) {
                if (i == hi) continue;
                for (int k = 0; k < d; ++k) centroid[k] += simplex[i][k];
            }
            for (int k = 0; k < d; ++k) centroid[k] /= d;

            auto blend = [&](double coef) {
                std::vector<double> p(d);
                for (int k = 0; k < d; ++k) p[k] = centroid[k] + coef * (simplex[hi][k] - centroid[k]);
                return p;
            };
            std::vector<double> refl = blend(-1.0);
            const double f_refl = fn(refl);
            if (f_refl < fv[lo]) {
                std::vector<double> exp_p = blend(-2.0);
                const double f_exp = fn(exp_p);
                if (f_exp < f_refl) {
                    simplex[hi] = std::move(exp_p);
                    fv[hi] = f_exp;
                } else {
                    simplex[hi] = std::move(refl);
                    fv[hi] = f_refl;
                }
            } else if (f_refl < fv[second_hi]) {
                simplex[hi] = std::move(refl);
                fv[hi] = f_refl;
            } else {
                std::vector<double> con = blend(f_refl < fv[hi] ? -0.5 : 0.5);
                const double f_con = fn(con);
                if (f_con < std::min(f_refl, fv[hi])) {
                    simplex[hi] = std::move(con);
                    fv[hi] = f_con;
                } else {
                    for (int i = 0; i <= d; ++i) {
                        if (i == lo) continue;
                        for (int k = 0; k < d; ++k)
                            simplex[i][k] = simplex[lo][k] + 0.5 * (simplex[i][k] - simplex[lo][k]);
                        fv[i] = fn(simplex[i]);
                    }
                }
            }
        }
        int lo = 0;
        for (int i = 1; i <= d; ++i)
            if (fv[i] < fv[lo]) lo = i;
        if (fv[lo] < best.f) {
            best.f = fv[lo];
            best.x = simplex[lo];
        }
        best.converged = best.converged || converged;
    }
    return best;
}

struct FitReport {
    MaternParams params;
    double weighted_sse = std::numeric_limits<double>::infinity();
    bool converged = false;
    bool cap_reached = false;  // smoothness pinned at its upper bound
    bool censored = false;     // effective range beyond the resolvable extent
    double max_resolvable = std::numeric_limits<double>::infinity();
    bool flagged = false;

    // filled by range_uncertainty
    int n_draws = 0;
    int n_failed = 0;
    std::vector<double> draw_range, draw_sill, draw_smoothness, draw_eff;
    double range_lo = 0, range_hi = 0;
    double sill_lo = 0, sill_hi = 0;
    double smoothness_lo = 0, smoothness_hi = 0;
    double eff_lo = 0, eff_hi = 0;
};

namespace detail {

inline double halton(int index, int base) {
    double f = 1.0, r = 0.0;
    int i = index;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

struct FitData {
    std::vector<double> h, g, w;
};

inline FitData fit_data(const VariogramBins& bins) {
    FitData d;
    for (std::size_t b = 0; b < bins.lag_centers.size(); ++b) {
        if (bins.pair_counts[b] <= 0) continue;
        d.h.push_back(bins.lag_centers[b]);
        d.g.push_back(bins.semivariances[b]);
        d.w.push_back(static_cast<double>(bins.pair_counts[b]) /
                      (bins.lag_centers[b] * bins.lag_centers[b]));
    }
    return d;
}

}  // namespace detail

/// Weighted least squares over the nonempty bins (weights N/h^2),
/// multistart Nelder-Mead in transformed coordinates: log range, log
/// partial sill, sqrt nugget, logit(smoothness/cap). Starts come from a
/// Halton sequence over boxes seeded by plateau/crossing heuristics. A
/// smoothness that lands at the cap is re-fit with it pinned there.
inline FitReport fit_matern(const VariogramBins& bins, double smoothness_cap = 5.0) {
    const detail::FitData data = detail::fit_data(bins);
    const int nb = static_cast<int>(data.h.size());
    if (nb < 4) throw TooFewBins("fit_matern: need at least 4 nonempty bins");

    FitReport report;
    const double gmax = *std::max_element(data.g.begin(), data.g.end());
    if (!(gmax > 0.0)) {
        report.flagged = true;  // flat variogram, nothing to fit
        report.params = MaternParams{1.0, 0.0, 0.0, 1.0, 0.0};
        return report;
    }
    double sill0 = 0.0;
    {
        const int tail = std::max(1, nb / 3);
        for (int b = nb - tail; b < nb; ++b) sill0 += data.g[b];
        sill0 /= tail;
        if (!(sill0 > 0.0)) sill0 = gmax;
    }
    double range0 = data.h[nb - 1] / 3.0;
    for (int b = 0; b < nb; ++b) {
        if (data.g[b] >= 0.63 * sill0) {
            range0 = std::max(data.h[b], data.h[0]);
            break;
        }
    }

    const auto to_params = [&](const std::vector<double>& t) {
        MaternParams p;
        p.range = std::exp(std::clamp(t[0], -50.0, 50.0));
        p.partial_sill = std::exp(std::clamp(t[1], -50.0, 50.0));
        p.nugget = t[2] * t[2];
        p.smoothness = smoothness_cap / (1.0 + std::exp(-std::clamp(t[3], -50.0, 50.0)));
        return p;
    };
    const auto objective = [&](const MaternParams& p) {
        double sse = 0.0;
        for (int b = 0; b < nb; ++b) {
            const double r = data.g[b] - matern_semivariance(data.h[b], p);
            sse += data.w[b] * r * r;
        }
        return std::isfinite(sse) ? sse : std::numeric_limits<double>::infinity();
    };
    const auto fn4 = [&](const std::vector<double>& t) { return objective(to_params(t)); };

    // eight deterministic low-discrepancy starts, screened by objective
    // value; local search runs only from the three most promising
    std::vector<std::pair<double, std::vector<double>>> starts;
    for (int s = 0; s < 8; ++s) {
        const double u1 = detail::halton(s + 1, 2);
        const double u2 = detail::halton(s + 1, 3);
        const double u3 = detail::halton(s + 1, 5);
        std::vector<double> t0(4);
        t0[0] = std::log(range0) + (u1 - 0.5) * 2.0 * std::log(8.0);
        t0[1] = std::log(sill0) + (u2 - 0.5) * 2.0 * std::log(3.0);
        t0[2] = 0.0;
        const double nu0 = 0.3 * std::pow(smoothness_cap * 0.9 / 0.3, u3);
        t0[3] = std::log(nu0 / (smoothness_cap - nu0));
        starts.emplace_back(fn4(t0), std::move(t0));
    }
    std::sort(starts.begin(), starts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    NelderMeadResult best;
    bool any_converged = false;
    for (int s = 0; s < 3 && s < static_cast<int>(starts.size()); ++s) {
        NelderMeadResult r = nelder_mead(fn4, starts[s].second, 0.5);
        any_converged = any_converged || r.converged;
        if (r.f < best.f) best = std::move(r);
    }
    best.converged = any_converged;

    MaternParams p = to_params(best.x);
    bool cap_reached = p.smoothness > 0.97 * smoothness_cap;
    if (cap_reached) {
        // pin smoothness and re-optimize the remaining three
        const auto fn3 = [&](const std::vector<double>& t) {
            MaternParams q = to_params({t[0], t[1], t[2], 50.0});
            q.smoothness = smoothness_cap;
            return objective(q);
        };
        NelderMeadResult r3 = nelder_mead(
            fn3, {std::log(p.range), std::log(p.partial_sill), std::sqrt(p.nugget)}, 0.4);
        p = to_params({r3.x[0], r3.x[1], r3.x[2], 50.0});
        p.smoothness = smoothness_cap;
        best.f = r3.f;
        best.converged = best.converged || r3.converged;
    }
    p.effective_range = effective_range(p);

    report.params = p;
    report.weighted_sse = best.f;
    report.converged = best.converged && std::isfinite(best.f);
    report.cap_reached = cap_reached;
    if (!report.converged) throw NonConvergence("fit_matern: no start met tolerance");
    return report;
}

struct VariogramConfig {
    Direction direction = Direction::omni;
    int n_bins = 40;
    double max_lag = 0.0;  // 0: one third of the domain diagonal
    double angle_tol_deg = 22.5;
    int subsample_keep_one_of = 1;  // 1: all transects
    std::uint64_t subsample_seed = 0;
    double smoothness_cap = 5.0;
};

inline VariogramBins variogram_for_config(std::span<const double> field, const Lattice& lat,
                                          const VariogramConfig& cfg,
                                          const std::vector<int>* transects = nullptr) {
    if (transects)
        return empirical_variogram_transects(field, lat, cfg.direction, *transects, cfg.max_lag,
                                             cfg.n_bins);
    return empirical_variogram(field, lat, cfg.direction, cfg.max_lag, cfg.n_bins,
                               cfg.angle_tol_deg);
}

/// Full pipeline (empirical variogram, Matern fit, effective range) for
/// the posterior-mean detail and every posterior draw of one level; 95%
/// empirical intervals per parameter. Draw-level non-convergence is
/// tolerated up to 10% of draws, beyond that the report is flagged.
inline FitReport range_uncertainty(const DetailStack& stack, int level, const Lattice& lat,
                                   const VariogramConfig& cfg, int threads = 1) {
    if (stack.n_draws < 20) throw DimensionMismatch("range_uncertainty: need at least 20 draws");
    const Lattice vlat = lat.fully_observed();

    std::optional<std::vector<int>> transects;
    if (cfg.direction != Direction::omni && cfg.subsample_keep_one_of > 1) {
        RngState rng(cfg.subsample_seed);
        transects = transect_subsample(vlat, cfg.direction, cfg.subsample_keep_one_of, rng);
    }
    const std::vector<int>* tr = transects ? &*transects : nullptr;

    FitReport report = fit_matern(variogram_for_config(stack.mean_detail(level), vlat, cfg, tr),
                                  cfg.smoothness_cap);
    report.max_resolvable =
        vlat.spacing * std::hypot(vlat.n1 - 1, vlat.n2 - 1);
    report.censored = report.params.effective_range > report.max_resolvable;

    report.n_draws = stack.n_draws;
    std::vector<std::optional<MaternParams>> per_draw(stack.n_draws);
    parallel_for(stack.n_draws, threads, [&](long s) {
        try {
            const FitReport r = fit_matern(
                variogram_for_config(stack.draw_detail(static_cast<int>(s), level), vlat, cfg, tr),
                cfg.smoothness_cap);
            per_draw[s] = r.params;
        } catch (const NonConvergence&) {
            per_draw[s] = std::nullopt;
        } catch (const TooFewBins&) {
            per_draw[s] = std::nullopt;
        }
    });
    for (const auto& pd : per_draw) {
        if (!pd) {
            report.n_failed++;
            continue;
        }
        report.draw_range.push_back(pd->range);
        report.draw_sill.push_back(pd->partial_sill);
        report.draw_smoothness.push_back(pd->smoothness);
        report.draw_eff.push_back(pd->effective_range);
    }
    if (report.n_failed > stack.n_draws / 10) report.flagged = true;

    if (!report.draw_range.empty()) {
        report.range_lo = quantile(report.draw_range, 0.025);
        report.range_hi = quantile(report.draw_range, 0.975);
        report.sill_lo = quantile(report.draw_sill, 0.025);
        report.sill_hi = quantile(report.draw_sill, 0.975);
        report.smoothness_lo = quantile(report.draw_smoothness, 0.025);
        report.smoothness_hi = quantile(report.draw_smoothness, 0.975);
        report.eff_lo = quantile(report.draw_eff, 0.025);
        report.eff_hi = quantile(report.draw_eff, 0.975);
        const auto inside = [](double v, double lo, double hi) {
            return v >= lo - 1e-12 && v <= hi + 1e-12;
        };
        if (!inside(report.params.range, report.range_lo, report.range_hi) ||
            !inside(report.params.effective_range, report.eff_lo, report.eff_hi))
            report.flagged = true;
    }
    return report;
}

}  // namespace featscale
