#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "hfl/errors.hpp"

namespace hfl {

/// Gauss-Legendre rule on [-1, 1].
template <class Real>
struct GaussRule {
    std::vector<Real> x;
    std::vector<Real> w;
};

/// n-point Gauss-Legendre nodes and weights, Newton on the Legendre
/// recurrence at the working precision of Real.
template <class Real>
GaussRule<Real> gauss_legendre(int n) {
    if (n < 1) throw argument_error("gauss_legendre: n must be >= 1");
    using std::abs;
    GaussRule<Real> rule;
    rule.x.resize(n);
    rule.w.resize(n);
    const Real eps = std::numeric_limits<Real>::epsilon();
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        Real z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        Real dp;
        for (int it = 0; it < 100; ++it) {
            Real p0 = 1, p1 = z;
            for (int k = 2; k <= n; ++k) {
                Real p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1;
            dp = n * (z * p1 - p0) / (z * z - 1);
            Real dz = p1 / dp;
            z -= dz;
            if (abs(dz) <= 4 * eps) break;
        }
        // refresh derivative at the converged root
        Real p0 = 1, p1 = z;
        for (int k = 2; k <= n; ++k) {
            Real p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        if (n == 1) p0 = 1;
        dp = n * (z * p1 - p0) / (z * z - 1);
        Real wt = 2 / ((1 - z * z) * dp * dp);
        rule.x[i] = -z;
        rule.x[n - 1 - i] = z;
        rule.w[i] = wt;
        rule.w[n - 1 - i] = wt;
    }
    if (n % 2 == 1) rule.x[n / 2] = 0;
    return rule;
}

/// Process-wide cache of double-precision rules.
inline const GaussRule<double>& gauss_legendre_cached(int n) {
    static std::mutex mu;
    static std::map<int, GaussRule<double>> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_legendre<double>(n)).first;
    return it->second;
}

/// Sum of a panel rule mapped to [a, b].
template <class F>
double gauss_panel(F&& f, double a, double b, const GaussRule<double>& rule) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.x.size(); ++i) s += rule.w[i] * f(c + h * rule.x[i]);
    return s * h;
}

/// Pairwise (tree) summation; order-deterministic and accurate.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

}  // namespace hfl
