#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace featscale {

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double variance_of(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

/// Empirical quantile with linear interpolation between order statistics
/// (the convention most statistics environments default to).
inline double quantile(std::vector<double> v, double p) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    if (p <= 0.0) return v.front();
    if (p >= 1.0) return v.back();
    const double pos = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

/// Autocorrelation at lags 1..max_lag (biased normalization by lag-0 sum).
inline std::vector<double> autocorrelation(std::span<const double> v, int max_lag) {
    const int n = static_cast<int>(v.size());
    const double m = mean_of(v);
    double denom = 0.0;
    for (double x : v) denom += (x - m) * (x - m);
    std::vector<double> acf;
    acf.reserve(static_cast<std::size_t>(max_lag));
    for (int k = 1; k <= max_lag && k < n; ++k) {
        double s = 0.0;
        for (int t = 0; t + k < n; ++t) s += (v[t] - m) * (v[t + k] - m);
        acf.push_back(denom > 0.0 ? s / denom : 0.0);
    }
    return acf;
}

}  // namespace featscale
