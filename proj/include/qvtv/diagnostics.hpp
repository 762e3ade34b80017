#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "qvtv/core.hpp"

namespace qvtv {

/// One-sample Kolmogorov-Smirnov distance sup |F_n - F|.
inline double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf) {
    if (x.empty()) throw std::invalid_argument("ks_distance: empty sample");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// Asymptotic p-value of sqrt(n_eff) * D (Kolmogorov distribution).
inline double ks_pvalue(double d, double n_eff) {
    const double sn = std::sqrt(n_eff);
    const double lam = (sn + 0.12 + 0.11 / sn) * d;
    if (lam < 1e-3) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
        sum += term;
        if (std::abs(term) < 1e-12) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

/// Batch-means Monte Carlo standard error of the chain mean.
inline double batch_means_mcse(const std::vector<double>& chain, int batches = 0) {
    const std::size_t n = chain.size();
    if (n < 4) throw std::invalid_argument("batch_means_mcse: chain too short");
    if (batches <= 0) batches = static_cast<int>(std::max<double>(2.0, std::floor(std::sqrt(static_cast<double>(n)))));
    const std::size_t len = n / static_cast<std::size_t>(batches);
    if (len < 1) throw std::invalid_argument("batch_means_mcse: more batches than draws");
    std::vector<double> means(static_cast<std::size_t>(batches), 0.0);
    double grand = 0.0;
    for (int b = 0; b < batches; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) s += chain[static_cast<std::size_t>(b) * len + i];
        means[static_cast<std::size_t>(b)] = s / static_cast<double>(len);
        grand += means[static_cast<std::size_t>(b)];
    }
    grand /= batches;
    double v = 0.0;
    for (double m : means) v += (m - grand) * (m - grand);
    v /= (batches - 1);
    return std::sqrt(v / batches);
}

/// Effective sample size implied by the batch-means error.
inline double effective_sample_size(const std::vector<double>& chain) {
    const double n = static_cast<double>(chain.size());
    double mean = 0.0;
    for (double x : chain) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : chain) var += (x - mean) * (x - mean);
    var /= (n - 1.0);
    const double se = batch_means_mcse(chain);
    if (se <= 0.0) return n;
    return std::min(n, var / (se * se));
}

inline double pearson_correlation(const Vec& a, const Vec& b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson_correlation: size mismatch");
    const Vec da = a.array() - a.mean(), db = b.array() - b.mean();
    const double den = std::sqrt(da.squaredNorm() * db.squaredNorm());
    return den > 0.0 ? da.dot(db) / den : 0.0;
}

}  // namespace qvtv
