#pragma once

// Deterministic initial data: the diagonal V with its regularity metadata
// (scales ell < G around the energy E0), built-in presets and file loading.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbmlab/errors.hpp"
#include "dbmlab/semicircle.hpp"

namespace dbmlab {

struct PotentialProfile {
    std::vector<double> entries; // sorted ascending
    double ell = 0.0;            // lower regularity scale, 1/N <= ell < G
    double window = 0.0;         // G
    double center = 0.0;         // E0
    double bound_exponent = 1.0; // B_V: max |V_i| <= N^{B_V}
    std::string id = "custom";

    std::size_t size() const { return entries.size(); }

    void validate() const {
        const std::size_t n = entries.size();
        if (n == 0) throw std::invalid_argument("PotentialProfile: empty entries");
        if (!std::is_sorted(entries.begin(), entries.end()))
            throw std::invalid_argument("PotentialProfile: entries must be sorted ascending");
        if (ell < 1.0 / static_cast<double>(n) || ell >= 1.0)
            throw std::invalid_argument("PotentialProfile: ell must lie in [1/N, 1)");
        if (window <= ell)
            throw std::invalid_argument("PotentialProfile: requires ell < G (regularity separation)");
        const double bound = std::pow(static_cast<double>(n), bound_exponent);
        for (double v : entries)
            if (std::abs(v) > bound)
                throw std::invalid_argument("PotentialProfile: |V_i| exceeds N^{B_V}");
    }

    // |{ i : V_i in [e - eta, e + eta] }|
    std::size_t count_in(double e, double eta) const {
        const auto lo = std::lower_bound(entries.begin(), entries.end(), e - eta);
        const auto hi = std::upper_bound(entries.begin(), entries.end(), e + eta);
        return static_cast<std::size_t>(hi - lo);
    }
};

namespace presets {

// Midpoint quantiles of the uniform density on [-1, 1].
inline PotentialProfile uniform(std::size_t n, double ell, double g, double e0 = 0.0) {
    PotentialProfile p;
    p.entries.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        p.entries[i] = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    p.ell = ell;
    p.window = g;
    p.center = e0;
    p.id = "uniform";
    p.validate();
    return p;
}

// Half the mass spread uniformly over [-1-w, -1+w], half over [1-w, 1+w].
// The smearing width w keeps Im m_V bounded above down to scale ell, which a
// literal pair of atoms would violate.
inline PotentialProfile two_atom(std::size_t n, double ell, double g, double e0 = 1.0,
                                 double half_width = 0.3) {
    if (half_width <= 0.0 || half_width >= 1.0)
        throw std::invalid_argument("two_atom: half_width must be in (0,1)");
    PotentialProfile p;
    p.entries.resize(n);
    const std::size_t n_left = n / 2;
    const std::size_t n_right = n - n_left;
    for (std::size_t i = 0; i < n_left; ++i)
        p.entries[i] = -1.0 + half_width * (2.0 * (static_cast<double>(i) + 0.5) /
                                                static_cast<double>(n_left) - 1.0);
    for (std::size_t i = 0; i < n_right; ++i)
        p.entries[n_left + i] = 1.0 + half_width * (2.0 * (static_cast<double>(i) + 0.5) /
                                                        static_cast<double>(n_right) - 1.0);
    p.ell = ell;
    p.window = g;
    p.center = e0;
    p.id = "two_atom";
    p.validate();
    return p;
}

// Quantiles of the density proportional to 1 + (1/2) sin(2 pi E / l') on
// [-1, 1], l' = ell * scale: an oscillation at the regularity scale itself.
inline PotentialProfile rough(std::size_t n, double ell, double g, double e0 = 0.0,
                              double scale = 1.0) {
    const double lp = ell * scale;
    if (lp <= 0.0) throw std::invalid_argument("rough: ell * scale must be positive");
    auto antideriv = [lp](double u) {
        return u - 0.5 * lp / (2.0 * kPi) * std::cos(2.0 * kPi * u / lp);
    };
    const double f_lo = antideriv(-1.0);
    const double total = antideriv(1.0) - f_lo;
    PotentialProfile p;
    p.entries.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double target = total * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        double lo = -1.0, hi = 1.0;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (antideriv(mid) - f_lo < target)
                lo = mid;
            else
                hi = mid;
        }
        p.entries[i] = 0.5 * (lo + hi);
    }
    std::sort(p.entries.begin(), p.entries.end());
    p.ell = ell;
    p.window = g;
    p.center = e0;
    p.id = "rough";
    p.validate();
    return p;
}

// V identically zero: the pure-noise ensemble. Fails the regularity check by
// construction (single atom); only its deformed law is of interest.
inline PotentialProfile goe(std::size_t n) {
    PotentialProfile p;
    p.entries.assign(n, 0.0);
    p.ell = 1.0 / static_cast<double>(n);
    p.window = 1.0;
    p.center = 0.0;
    p.id = "goe";
    return p;
}

} // namespace presets

// Single column of V entries, one per line; '#' starts a comment.
inline PotentialProfile load_profile(const std::string& path, double ell, double g, double e0) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open profile file: " + path);
    PotentialProfile p;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        double v;
        if (ss >> v) {
            p.entries.push_back(v);
            double extra;
            if (ss >> extra)
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": expected a single value per line");
        }
    }
    std::sort(p.entries.begin(), p.entries.end());
    p.ell = ell;
    p.window = g;
    p.center = e0;
    p.id = path;
    p.validate();
    return p;
}

} // namespace dbmlab
