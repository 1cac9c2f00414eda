#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "featscale/cholesky.hpp"
#include "featscale/errors.hpp"
#include "featscale/parallel.hpp"
#include "featscale/sampler.hpp"
#include "featscale/sparse.hpp"
#include "featscale/stats.hpp"

namespace featscale {

constexpr double kLambdaInf = std::numeric_limits<double>::infinity();

enum class Norm { euclidean, maximum };

/// Log10-spaced evaluation grid for the smoothing scale.
struct ScaleGrid {
    double log_lo = -1.0;
    double log_hi = 5.0;
    int points_per_decade = 30;
    std::vector<double> lambdas;

    static ScaleGrid make(double log_lo, double log_hi, int points_per_decade) {
        if (!(log_hi > log_lo) || points_per_decade < 1)
            throw DimensionMismatch("scale grid: need log_hi > log_lo and at least 1 point per decade");
        ScaleGrid g;
        g.log_lo = log_lo;
        g.log_hi = log_hi;
        g.points_per_decade = points_per_decade;
        const int count = static_cast<int>(std::round((log_hi - log_lo) * points_per_decade)) + 1;
        if (count < 3) throw DimensionMismatch("scale grid: fewer than 3 points");
        g.lambdas.reserve(count);
        for (int i = 0; i < count; ++i)
            g.lambdas.push_back(std::pow(10.0, log_lo + static_cast<double>(i) / points_per_decade));
        return g;
    }
};

/// Selected smoothing scales: 0 = lambda_1 < ... < lambda_L = infinity.
struct ScaleSet {
    std::vector<double> lambdas;
    Norm source_norm = Norm::maximum;

    int levels() const { return static_cast<int>(lambdas.size()); }

    void validate() const {
        if (lambdas.size() < 2 || lambdas.front() != 0.0 || !std::isinf(lambdas.back()))
            throw DimensionMismatch("scale set must run from 0 to infinity");
        for (std::size_t i = 1; i + 1 < lambdas.size(); ++i)
            if (!(lambdas[i] > lambdas[i - 1]) || !std::isfinite(lambdas[i]))
                throw DimensionMismatch("interior scales must be finite and increasing");
    }
};

/// Roughness-penalty smoother family S_lambda = (I + lambda Q)^-1 with a
/// shared symbolic analysis and per-lambda numeric factor cache. The cache
/// is read-mostly: norm curves and per-draw decompositions hit the same
/// few lambdas thousands of times.
class Smoother {
  public:
    explicit Smoother(const SparseMatrix& Q) : q_(&Q) {
        if (Q.n < 1) throw DimensionMismatch("smoother: empty matrix");
        shifted_ = Q;
        diag_pos_.resize(static_cast<std::size_t>(Q.n));
        for (int i = 0; i < Q.n; ++i) {
            const int* first = Q.col_idx.data() + Q.row_ptr[i];
            const int* last = Q.col_idx.data() + Q.row_ptr[i + 1];
            const int* it = std::lower_bound(first, last, i);
            if (it == last || *it != i)
                throw DimensionMismatch("smoother: Q lacks an explicit diagonal entry");
            diag_pos_[i] = static_cast<int>(it - Q.col_idx.data());
        }
        symbolic_ = CholeskySymbolic(Q, Ordering::bandwidth_reducing);
        component_ = connected_components(Q, &n_components_);
    }

    const SparseMatrix& q() const { return *q_; }
    int dim() const { return q_->n; }
    int n_components() const { return n_components_; }
    const std::vector<int>& component_labels() const { return component_; }

    /// S_lambda x. lambda = 0 returns the input bitwise; lambda = infinity
    /// returns the per-connected-component mean.
    std::vector<double> smooth(std::span<const double> x, double lambda) const {
        if (static_cast<int>(x.size()) != dim()) throw DimensionMismatch("smooth: length mismatch");
        detail::check_finite(x, "smooth input");
        if (lambda < 0.0) throw DimensionMismatch("smooth: lambda must be nonnegative");
        if (lambda == 0.0) return {x.begin(), x.end()};
        if (std::isinf(lambda)) return component_mean(x);
        return factor_for(lambda)->solve(x);
    }

    /// D_lambda x = lambda (I + lambda Q)^-1 Q (I + lambda Q)^-1 x,
    /// two solves against one cached factorization.
    std::vector<double> scale_derivative(std::span<const double> x, double lambda) const {
        if (static_cast<int>(x.size()) != dim())
            throw DimensionMismatch("scale_derivative: length mismatch");
        detail::check_finite(x, "scale_derivative input");
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw DimensionMismatch("scale_derivative: lambda must be positive and finite");
        const auto F = factor_for(lambda);
        std::vector<double> u = F->solve(x);
        const std::vector<double> qu = matvec(*q_, u);
        std::vector<double> v = F->solve(qu);
        for (auto& vi : v) vi *= lambda;
        return v;
    }

    /// Per-component mean field (the lambda = infinity smooth).
    std::vector<double> component_mean(std::span<const double> x) const {
        std::vector<double> sum(static_cast<std::size_t>(n_components_), 0.0);
        std::vector<int> count(static_cast<std::size_t>(n_components_), 0);
        for (int i = 0; i < dim(); ++i) {
            sum[component_[i]] += x[i];
            count[component_[i]]++;
        }
        std::vector<double> out(static_cast<std::size_t>(dim()));
        for (int i = 0; i < dim(); ++i) out[i] = sum[component_[i]] / count[component_[i]];
        return out;
    }

    std::shared_ptr<const CholeskyFactor> factor_for(double lambda) const {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(lambda);
            if (it != cache_.end()) return it->second;
        }
        SparseMatrix shifted = shifted_;  // thread-local copy of the pattern
        for (std::size_t p = 0; p < shifted.values.size(); ++p)
            shifted.values[p] = lambda * q_->values[p];
        for (int i = 0; i < dim(); ++i) shifted.values[diag_pos_[i]] += 1.0;
        auto F = std::make_shared<CholeskyFactor>(symbolic_.factor(shifted));
        std::lock_guard<std::mutex> lock(mutex_);
        auto [it, inserted] = cache_.emplace(lambda, std::move(F));
        return it->second;
    }

  private:
    const SparseMatrix* q_;
    SparseMatrix shifted_;
    std::vector<int> diag_pos_;
    CholeskySymbolic symbolic_;
    std::vector<int> component_;
    int n_components_ = 0;
    mutable std::mutex mutex_;
    mutable std::map<double, std::shared_ptr<const CholeskyFactor>> cache_;
};

inline std::vector<double> smooth(std::span<const double> x, const SparseMatrix& Q, double lambda) {
    return Smoother(Q).smooth(x, lambda);
}

inline std::vector<double> scale_derivative(std::span<const double> x, const SparseMatrix& Q,
                                            double lambda) {
    return Smoother(Q).scale_derivative(x, lambda);
}

inline double vector_norm(std::span<const double> v, Norm norm) {
    if (norm == Norm::maximum) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// ||D_lambda x|| across the grid. Norms below roundoff of the input scale
/// collapse to zero, so a constant field reports an exactly flat curve.
inline std::vector<double> norm_curve(std::span<const double> x, const Smoother& smoother,
                                      const ScaleGrid& grid, Norm norm) {
    double xinf = 0.0;
    for (double v : x) xinf = std::max(xinf, std::abs(v));
    const double floor = 1e-14 * xinf;
    std::vector<double> curve(grid.lambdas.size());
    for (std::size_t i = 0; i < grid.lambdas.size(); ++i) {
        const double v = vector_norm(smoother.scale_derivative(x, grid.lambdas[i]), norm);
        curve[i] = v <= floor ? 0.0 : v;
    }
    return curve;
}

inline std::vector<double> norm_curve(std::span<const double> x, const SparseMatrix& Q,
                                      const ScaleGrid& grid, Norm norm) {
    Smoother s(Q);
    return norm_curve(x, s, grid, norm);
}

/// Interior strict local minima of a sampled curve, plateau-aware: a flat
/// run flanked on both sides by strictly larger values counts once, at the
/// run's middle index.
inline std::vector<int> local_minima_indices(std::span<const double> curve) {
    std::vector<int> minima;
    const int len = static_cast<int>(curve.size());
    int a = 0;
    while (a < len) {
        int b = a;
        while (b + 1 < len && curve[b + 1] == curve[a]) ++b;
        if (a > 0 && b < len - 1 && curve[a - 1] > curve[a] && curve[b + 1] > curve[a])
            minima.push_back((a + b) / 2);
        a = b + 1;
    }
    return minima;
}

inline ScaleSet select_scales(std::span<const double> curve, const ScaleGrid& grid,
                              Norm source_norm = Norm::maximum) {
    if (curve.size() != grid.lambdas.size())
        throw DimensionMismatch("select_scales: curve and grid lengths differ");
    ScaleSet set;
    set.source_norm = source_norm;
    set.lambdas.push_back(0.0);
    for (int idx : local_minima_indices(curve)) set.lambdas.push_back(grid.lambdas[idx]);
    set.lambdas.push_back(kLambdaInf);
    return set;
}

/// Additive scale components: z_l = S_{lambda_l} x - S_{lambda_l+1} x for
/// l < L and z_L = the per-component mean, so sum_l z_l telescopes back to
/// x. Per-draw details are retained when a chain is decomposed.
struct DetailStack {
    int n = 0;
    int levels = 0;
    int n_draws = 0;
    ScaleSet scales;
    std::vector<double> mean_details;  // levels x n
    std::vector<double> draw_details;  // n_draws x levels x n (optional)

    std::span<const double> mean_detail(int level) const {
        return {mean_details.data() + static_cast<std::size_t>(level) * n,
                static_cast<std::size_t>(n)};
    }
    std::span<const double> draw_detail(int draw, int level) const {
        return {draw_details.data() + (static_cast<std::size_t>(draw) * levels + level) * n,
                static_cast<std::size_t>(n)};
    }
};

namespace detail {

inline void decompose_into(std::span<const double> x, const Smoother& smoother,
                           const ScaleSet& scales, std::span<double> out) {
    const int n = smoother.dim();
    const int L = scales.levels();
    std::vector<double> prev(x.begin(), x.end());  // S_{lambda_1} x with lambda_1 = 0
    for (int l = 1; l < L; ++l) {
        std::vector<double> next = smoother.smooth(x, scales.lambdas[l]);
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(l - 1) * n + i] = prev[i] - next[i];
        prev = std::move(next);
    }
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(L - 1) * n + i] = prev[i];
}

}  // namespace detail

inline DetailStack decompose(std::span<const double> x, const Smoother& smoother,
                             const ScaleSet& scales) {
    scales.validate();
    DetailStack stack;
    stack.n = smoother.dim();
    stack.levels = scales.levels();
    stack.scales = scales;
    stack.mean_details.assign(static_cast<std::size_t>(stack.levels) * stack.n, 0.0);
    detail::decompose_into(x, smoother, scales, stack.mean_details);
    return stack;
}

inline DetailStack decompose(std::span<const double> x, const SparseMatrix& Q, const ScaleSet& scales) {
    Smoother s(Q);
    return decompose(x, s, scales);
}

inline DetailStack decompose(const PosteriorChain& chain, const Smoother& smoother,
                             const ScaleSet& scales, int threads = 1) {
    scales.validate();
    DetailStack stack;
    stack.n = smoother.dim();
    stack.levels = scales.levels();
    stack.n_draws = chain.n_samples();
    stack.scales = scales;
    if (chain.n != stack.n) throw DimensionMismatch("decompose: chain dimension != Q dimension");
    const std::size_t per_draw = static_cast<std::size_t>(stack.levels) * stack.n;
    stack.draw_details.assign(per_draw * stack.n_draws, 0.0);
    // prime the factor cache before fanning out
    for (int l = 1; l + 1 < stack.levels; ++l) smoother.factor_for(scales.lambdas[l]);
    parallel_for(stack.n_draws, threads, [&](long s) {
        detail::decompose_into(chain.draw(static_cast<int>(s)), smoother, scales,
                               std::span<double>(stack.draw_details.data() + per_draw * s, per_draw));
    });
    stack.mean_details.assign(per_draw, 0.0);
    for (int s = 0; s < stack.n_draws; ++s)
        for (std::size_t i = 0; i < per_draw; ++i)
            stack.mean_details[i] += stack.draw_details[per_draw * s + i];
    for (auto& v : stack.mean_details) v /= stack.n_draws;
    return stack;
}

/// Three-way pointwise credibility labels from detail draws.
struct CredibilityMap {
    std::vector<std::int8_t> labels;  // +1 credibly positive, -1 credibly negative, 0 not credible
    double alpha = 0.95;

    int count(int label) const {
        int c = 0;
        for (auto l : labels) c += (l == label);
        return c;
    }
};

/// draws: n_samples x n matrix of one detail level.
inline CredibilityMap credibility_map(std::span<const double> draws, int n_samples, int n,
                                      double alpha) {
    if (n_samples < 20) throw DimensionMismatch("credibility_map: need at least 20 draws");
    if (!(alpha > 0.5 && alpha < 1.0)) throw DimensionMismatch("credibility_map: alpha in (0.5, 1)");
    if (static_cast<std::size_t>(n_samples) * n != draws.size())
        throw DimensionMismatch("credibility_map: matrix shape mismatch");
    CredibilityMap map;
    map.alpha = alpha;
    map.labels.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        int pos = 0, neg = 0;
        for (int s = 0; s < n_samples; ++s) {
            const double v = draws[static_cast<std::size_t>(s) * n + i];
            pos += (v > 0.0);
            neg += (v < 0.0);
        }
        const double p_pos = static_cast<double>(pos) / n_samples;
        const double p_neg = static_cast<double>(neg) / n_samples;
        if (p_pos >= alpha)
            map.labels[i] = 1;
        else if (p_neg >= alpha)
            map.labels[i] = -1;
    }
    return map;
}

inline CredibilityMap credibility_map(const DetailStack& stack, int level, double alpha) {
    if (stack.n_draws == 0) throw DimensionMismatch("credibility_map: stack holds no draws");
    std::vector<double> draws(static_cast<std::size_t>(stack.n_draws) * stack.n);
    for (int s = 0; s < stack.n_draws; ++s) {
        const auto d = stack.draw_detail(s, level);
        std::copy(d.begin(), d.end(), draws.begin() + static_cast<std::size_t>(s) * stack.n);
    }
    return credibility_map(draws, stack.n_draws, stack.n, alpha);
}

/// Posterior spread of the selected scales: the posterior-mean curve fixes
/// the reference minima; each draw's minima are matched to them by nearest
/// log-lambda (each used at most once) and 95% empirical intervals are
/// reported per reference scale.
struct ScaleUncertainty {
    std::vector<double> point_lambdas;          // interior minima of the mean curve
    std::vector<double> lower, upper;           // 95% empirical interval per scale
    std::vector<int> matched_draws;             // matches contributing per scale
    double mismatch_fraction = 0.0;             // draws whose minima count differs
    std::vector<std::vector<double>> draw_lambdas;  // matched lambdas per scale
};

inline ScaleUncertainty scale_uncertainty(const PosteriorChain& chain, const Smoother& smoother,
                                          const ScaleGrid& grid, Norm norm, int threads = 1) {
    if (chain.n_samples() < 1) throw DimensionMismatch("scale_uncertainty: empty chain");
    const std::vector<double> mean = posterior_mean(chain);
    // prime the cache so parallel draws reuse factors
    for (double l : grid.lambdas) smoother.factor_for(l);
    const std::vector<double> mean_curve = norm_curve(mean, smoother, grid, norm);
    const std::vector<int> ref_idx = local_minima_indices(mean_curve);

    ScaleUncertainty out;
    for (int idx : ref_idx) out.point_lambdas.push_back(grid.lambdas[idx]);
    const int n_ref = static_cast<int>(ref_idx.size());
    out.draw_lambdas.assign(n_ref, {});
    out.matched_draws.assign(n_ref, 0);

    std::vector<std::vector<double>> per_draw_minima(chain.n_samples());
    parallel_for(chain.n_samples(), threads, [&](long s) {
        const auto curve = norm_curve(chain.draw(static_cast<int>(s)), smoother, grid, norm);
        for (int idx : local_minima_indices(curve))
            per_draw_minima[s].push_back(grid.lambdas[idx]);
    });

    int mismatched = 0;
    for (const auto& minima : per_draw_minima) {
        if (static_cast<int>(minima.size()) != n_ref) ++mismatched;
        if (minima.empty() || n_ref == 0) continue;
        // greedy nearest assignment in log lambda
        struct Pair {
            double dist;
            int ref, cand;
        };
        std::vector<Pair> pairs;
        for (int r = 0; r < n_ref; ++r)
            for (int c = 0; c < static_cast<int>(minima.size()); ++c)
                pairs.push_back({std::abs(std::log10(minima[c]) - std::log10(out.point_lambdas[r])),
                                 r, c});
        std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
            if (a.dist != b.dist) return a.dist < b.dist;
            return std::tie(a.ref, a.cand) < std::tie(b.ref, b.cand);
        });
        std::vector<char> ref_used(n_ref, 0), cand_used(minima.size(), 0);
        for (const auto& p : pairs) {
            if (ref_used[p.ref] || cand_used[p.cand]) continue;
            ref_used[p.ref] = 1;
            cand_used[p.cand] = 1;
            out.draw_lambdas[p.ref].push_back(minima[p.cand]);
            out.matched_draws[p.ref]++;
        }
    }
    out.mismatch_fraction = static_cast<double>(mismatched) / chain.n_samples();
    out.lower.resize(n_ref);
    out.upper.resize(n_ref);
    for (int r = 0; r < n_ref; ++r) {
        out.lower[r] = quantile(out.draw_lambdas[r], 0.025);
        out.upper[r] = quantile(out.draw_lambdas[r], 0.975);
    }
    return out;
}

}  // namespace featscale
