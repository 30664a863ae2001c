#pragma once

// Semicircle density, its closed-form CDF and quantiles, and the scaled
// family rho_sc^(a,b) describing the spectrum of a*W + b.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dbmlab {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

inline double rho_sc(double e) {
    if (e <= -2.0 || e >= 2.0) return 0.0;
    return std::sqrt(4.0 - e * e) / (2.0 * kPi);
}

inline double cdf_sc(double e) {
    if (e <= -2.0) return 0.0;
    if (e >= 2.0) return 1.0;
    return 0.5 + (e * std::sqrt(4.0 - e * e) + 4.0 * std::asin(0.5 * e)) / (4.0 * kPi);
}

// Solves cdf_sc(mu) = p by bisection polished with Newton.
inline double quantile_sc(double p) {
    if (p <= 0.0) return -2.0;
    if (p >= 1.0) return 2.0;
    double lo = -2.0, hi = 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf_sc(mid) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-13) break;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 8; ++it) {
        const double d = rho_sc(x);
        if (d <= 0.0) break;
        const double step = (cdf_sc(x) - p) / d;
        x -= step;
        if (x < lo) x = lo;
        if (x > hi) x = hi;
        if (std::abs(step) < 1e-15) break;
    }
    return x;
}

// Classical locations mu_i, i = 1..N, defined by cdf_sc(mu_i) = i/N.
inline std::vector<double> classical_locations_sc(std::size_t n) {
    if (n == 0) throw std::invalid_argument("classical_locations_sc: N must be >= 1");
    std::vector<double> mu(n);
    for (std::size_t i = 1; i <= n; ++i)
        mu[i - 1] = quantile_sc(static_cast<double>(i) / static_cast<double>(n));
    return mu;
}

inline double rho_sc_ab(double x, double a, double b) {
    if (a <= 0.0) throw std::invalid_argument("rho_sc_ab: scale a must be positive");
    const double u = (x - b) / a;
    if (u <= -2.0 || u >= 2.0) return 0.0;
    return std::sqrt(4.0 * a * a - (x - b) * (x - b)) / (2.0 * a * a * kPi);
}

// mu_k^(a,b) = a*mu_k + b, exact under the substitution u = (x-b)/a.
inline std::vector<double> classical_locations_sc_ab(std::size_t n, double a, double b) {
    if (a <= 0.0) throw std::invalid_argument("classical_locations_sc_ab: scale a must be positive");
    std::vector<double> mu = classical_locations_sc(n);
    for (double& m : mu) m = a * m + b;
    return mu;
}

} // namespace dbmlab
