#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "featscale/cholesky.hpp"
#include "featscale/errors.hpp"
#include "featscale/lattice.hpp"
#include "featscale/rng.hpp"
#include "featscale/sparse.hpp"
#include "featscale/stats.hpp"

namespace featscale {

/// Gamma shape/rate pairs of the two precision priors.
struct HyperParams {
    double alpha_x = 1.0;
    double beta_x = 0.1;
    double alpha_y = 10.0;
    double beta_y = 1.0;

    void validate() const {
        if (!(alpha_x > 0.0 && beta_x > 0.0 && alpha_y > 0.0 && beta_y > 0.0))
            throw DimensionMismatch("hyperparameters must be strictly positive");
    }
};

enum class InitX { observed_zero_fill, neighbor_mean_fill };

struct ChainConfig {
    int burn_in = 0;
    int n_samples = 1;
    int thin = 1;
    std::uint64_t seed = 0;
    double init_kappa_x = 1.0;
    double init_kappa_y = 1.0;
    InitX init_x = InitX::observed_zero_fill;
    bool fix_kappas = false;  // debug mode: keep both precisions at their init values

    void validate() const {
        if (burn_in < 0 || n_samples < 1 || thin < 1)
            throw DimensionMismatch("chain config: burn_in >= 0, n_samples >= 1, thin >= 1");
        if (!(init_kappa_x > 0.0 && init_kappa_y > 0.0))
            throw DimensionMismatch("chain config: initial precisions must be positive");
    }
};

/// Post-burn-in, thinned draws of the latent field and the two precisions.
struct PosteriorChain {
    int n = 0;  // field dimension
    std::vector<double> x_draws;  // n_samples x n, row-major
    std::vector<double> kappa_x_draws;
    std::vector<double> kappa_y_draws;
    ChainConfig config;

    int n_samples() const { return static_cast<int>(kappa_x_draws.size()); }
    std::span<const double> draw(int s) const {
        return {x_draws.data() + static_cast<std::size_t>(s) * n, static_cast<std::size_t>(n)};
    }
};

namespace detail {

inline void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw NonFiniteInput(std::string(what) + " contains a non-finite value");
}

/// Shared Gibbs engine. The complete-data case is the m == n special case
/// with an identity selection operator; both public entry points funnel
/// here so they execute identical floating-point operations.
inline PosteriorChain gibbs_engine(std::span<const double> y, const SparseMatrix& Q,
                                   const SelectionOperator& H, const HyperParams& hp,
                                   const ChainConfig& cfg) {
    hp.validate();
    cfg.validate();
    const int n = Q.n;
    const int m = H.m();
    if (H.n != n) throw DimensionMismatch("gibbs: selection operator dimension != Q dimension");
    if (static_cast<int>(y.size()) != m) throw DimensionMismatch("gibbs: data length != observed count");
    check_finite(y, "y");

    // x0 enters through the first kappa updates only.
    std::vector<double> x = H.apply_transpose(y);
    if (cfg.init_x == InitX::neighbor_mean_fill && m < n) {
        std::vector<char> obs(static_cast<std::size_t>(n), 0);
        for (int r : H.kept_indices) obs[r] = 1;
        const double ybar = mean_of(y);
        for (int i = 0; i < n; ++i) {
            if (obs[i]) continue;
            double s = 0.0;
            int c = 0;
            for (int p = Q.row_ptr[i]; p < Q.row_ptr[i + 1]; ++p) {
                const int j = Q.col_idx[p];
                if (j != i && obs[j]) {
                    s += x[j];
                    ++c;
                }
            }
            x[i] = c > 0 ? s / c : ybar;
        }
    }

    RngState rng(cfg.seed);
    double kappa_x = cfg.init_kappa_x;
    double kappa_y = cfg.init_kappa_y;

    const CholeskySymbolic symbolic(Q, Ordering::bandwidth_reducing);
    SparseMatrix prec = Q;  // pattern reused; values rewritten each sweep
    std::vector<int> diag_pos(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int* first = Q.col_idx.data() + Q.row_ptr[i];
        const int* last = Q.col_idx.data() + Q.row_ptr[i + 1];
        const int* it = std::lower_bound(first, last, i);
        if (it == last || *it != i)
            throw DimensionMismatch("gibbs: Q lacks an explicit diagonal entry");
        diag_pos[i] = static_cast<int>(it - Q.col_idx.data());
    }
    std::vector<char> obs_flag(static_cast<std::size_t>(n), 0);
    for (int r : H.kept_indices) obs_flag[r] = 1;

    std::vector<double> b(static_cast<std::size_t>(n));
    std::vector<double> qx(static_cast<std::size_t>(n));

    PosteriorChain chain;
    chain.n = n;
    chain.config = cfg;
    chain.x_draws.reserve(static_cast<std::size_t>(cfg.n_samples) * n);
    chain.kappa_x_draws.reserve(cfg.n_samples);
    chain.kappa_y_draws.reserve(cfg.n_samples);

    const long total = static_cast<long>(cfg.burn_in) + static_cast<long>(cfg.n_samples) * cfg.thin;
    for (long it = 0; it < total; ++it) {
        if (!cfg.fix_kappas) {
            matvec_into(Q, x, qx);
            double quad = 0.0;
            for (int i = 0; i < n; ++i) quad += x[i] * qx[i];
            kappa_x = rng.gamma(hp.alpha_x + 0.5 * (m - 2), hp.beta_x + 0.5 * quad);
            double rss = 0.0;
            for (int r = 0; r < m; ++r) {
                const double d = y[r] - x[H.kept_indices[r]];
                rss += d * d;
            }
            kappa_y = rng.gamma(hp.alpha_y + 0.5 * m, hp.beta_y + 0.5 * rss);
        }

        for (std::size_t p = 0; p < prec.values.size(); ++p) prec.values[p] = kappa_x * Q.values[p];
        for (int i = 0; i < n; ++i)
            if (obs_flag[i]) prec.values[diag_pos[i]] += kappa_y;
        std::fill(b.begin(), b.end(), 0.0);
        for (int r = 0; r < m; ++r) b[H.kept_indices[r]] = kappa_y * y[r];

        CholeskyFactor F;
        try {
            F = symbolic.factor(prec);
        } catch (const NotPositiveDefinite&) {
            throw NotPositiveDefinite(
                "gibbs: conditional precision is singular; every connected component needs at "
                "least one observed node");
        }
        x = sample_canonical_normal(F, b, rng);

        const long past_burn = it - cfg.burn_in;
        if (past_burn >= 0 && past_burn % cfg.thin == cfg.thin - 1 &&
            chain.n_samples() < cfg.n_samples) {
            chain.x_draws.insert(chain.x_draws.end(), x.begin(), x.end());
            chain.kappa_x_draws.push_back(kappa_x);
            chain.kappa_y_draws.push_back(kappa_y);
        }
    }
    return chain;
}

}  // namespace detail

/// Conditional mean of the latent field at fixed precisions; the
/// deterministic core of one Gibbs sweep, exposed for oracle checks.
inline std::vector<double> conditional_mean(std::span<const double> y, const SparseMatrix& Q,
                                            const SelectionOperator& H, double kappa_x,
                                            double kappa_y) {
    SparseMatrix prec = Q;
    for (auto& v : prec.values) v *= kappa_x;
    for (int r : H.kept_indices) {
        double* d = prec.find(r, r);
        if (!d) throw DimensionMismatch("conditional_mean: missing diagonal entry");
        *d += kappa_y;
    }
    std::vector<double> b(static_cast<std::size_t>(Q.n), 0.0);
    for (int r = 0; r < H.m(); ++r) b[H.kept_indices[r]] = kappa_y * y[r];
    return cholesky(prec).solve(b);
}

/// Gibbs sampler for fully observed data on the active nodes.
inline PosteriorChain gibbs_complete(std::span<const double> y, const SparseMatrix& Q,
                                     const HyperParams& hp, const ChainConfig& cfg) {
    SelectionOperator H;
    H.n = Q.n;
    H.kept_indices.resize(static_cast<std::size_t>(Q.n));
    for (int i = 0; i < Q.n; ++i) H.kept_indices[i] = i;
    return detail::gibbs_engine(y, Q, H, hp, cfg);
}

/// Gibbs sampler with missing values: y holds the m observed values, the
/// selection operator maps the n active nodes onto them, and the returned
/// field draws cover all n nodes.
inline PosteriorChain gibbs_missing(std::span<const double> y, const SparseMatrix& Q,
                                    const SelectionOperator& H, const HyperParams& hp,
                                    const ChainConfig& cfg) {
    return detail::gibbs_engine(y, Q, H, hp, cfg);
}

inline std::vector<double> posterior_mean(const PosteriorChain& chain) {
    if (chain.n_samples() == 0) throw DimensionMismatch("posterior_mean: empty chain");
    std::vector<double> m(static_cast<std::size_t>(chain.n), 0.0);
    for (int s = 0; s < chain.n_samples(); ++s) {
        const auto d = chain.draw(s);
        for (int i = 0; i < chain.n; ++i) m[i] += d[i];
    }
    for (auto& v : m) v /= chain.n_samples();
    return m;
}

/// Per-series convergence summary: autocorrelations, effective sample
/// size (initial-positive-sequence truncation), and the raw trace.
struct SeriesDiagnostics {
    std::string name;
    std::vector<double> acf;  // lags 1..20
    double ess = 0.0;
    bool degenerate = false;
    std::vector<double> trace;
};

struct DiagnosticsReport {
    std::vector<SeriesDiagnostics> series;
};

inline SeriesDiagnostics diagnose_series(std::string name, std::vector<double> trace) {
    SeriesDiagnostics d;
    d.name = std::move(name);
    const int n = static_cast<int>(trace.size());
    const double m = mean_of(trace);
    // constant series up to roundoff: flag instead of propagating 0/0
    if (variance_of(trace) <= 1e-20 * (1.0 + m * m)) {
        d.degenerate = true;
        d.ess = 0.0;
        d.acf.assign(std::min(20, std::max(0, n - 1)), 0.0);
        d.trace = std::move(trace);
        return d;
    }
    d.acf = autocorrelation(trace, 20);
    double s = 0.0;
    for (double rho : d.acf) {
        if (rho < 0.0) break;
        s += rho;
    }
    d.ess = static_cast<double>(n) / (1.0 + 2.0 * s);
    d.trace = std::move(trace);
    return d;
}

inline DiagnosticsReport chain_diagnostics(const PosteriorChain& chain) {
    if (chain.n_samples() < 10) throw DimensionMismatch("chain_diagnostics: need at least 10 samples");
    DiagnosticsReport rep;
    rep.series.push_back(diagnose_series("kappa_x", chain.kappa_x_draws));
    rep.series.push_back(diagnose_series("kappa_y", chain.kappa_y_draws));
    const int probes = std::min(20, chain.n);
    for (int p = 0; p < probes; ++p) {
        const int node = static_cast<int>((static_cast<long>(p) * chain.n) / probes);
        std::vector<double> trace(static_cast<std::size_t>(chain.n_samples()));
        for (int s = 0; s < chain.n_samples(); ++s) trace[s] = chain.draw(s)[node];
        rep.series.push_back(diagnose_series("x[" + std::to_string(node) + "]", std::move(trace)));
    }
    return rep;
}

}  // namespace featscale
