#pragma once

// GOE and deformed-GOE sampling, exact in law at fixed times, plus the
// empirical spectral observables derived from one realization.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dbmlab/eigen_symmetric.hpp"
#include "dbmlab/freeconv.hpp"
#include "dbmlab/potential.hpp"
#include "dbmlab/rng.hpp"

namespace dbmlab {

struct EnsembleSample {
    std::vector<double> eigenvalues; // sorted ascending
    double time = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t sample_index = 0;
    std::string profile_id;
};

// Symmetric, off-diagonal variance 1/N, diagonal variance 2/N, entries
// independent above the diagonal.
inline SymMatrix sample_goe(std::size_t n, RngStream& rng) {
    SymMatrix w(n);
    const double off = 1.0 / std::sqrt(static_cast<double>(n));
    const double diag = std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        w(i, i) = diag * rng.gaussian();
        for (std::size_t j = i + 1; j < n; ++j) {
            const double x = off * rng.gaussian();
            w(i, j) = x;
            w(j, i) = x;
        }
    }
    return w;
}

// Eigenvalues of c V + sqrt(s) W for one fresh GOE draw.
inline EnsembleSample sample_deformed(const PotentialProfile& profile, const TimeParam& tp,
                                      RngStream& rng) {
    const std::size_t n = profile.size();
    EnsembleSample out;
    out.time = tp.t;
    out.seed = rng.master_seed();
    out.sample_index = rng.sample_index();
    out.profile_id = profile.id;
    if (tp.s == 0.0) {
        out.eigenvalues = profile.entries; // already sorted
        for (double& v : out.eigenvalues) v *= tp.c;
        return out;
    }
    SymMatrix h = sample_goe(n, rng);
    const double root_s = std::sqrt(tp.s);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) h(i, j) *= root_s;
        h(i, i) += tp.c * profile.entries[i];
    }
    out.eigenvalues = eigenvalues_symmetric(std::move(h));
    return out;
}

inline std::complex<double> empirical_stieltjes(const EnsembleSample& sample, SpectralPoint z) {
    if (z.eta <= 0.0) throw std::invalid_argument("empirical_stieltjes: eta must be positive");
    double sum_re = 0.0, sum_im = 0.0;
    for (double lam : sample.eigenvalues) {
        const double ar = lam - z.energy;
        const double inv = 1.0 / (ar * ar + z.eta * z.eta);
        sum_re += ar * inv;
        sum_im += z.eta * inv;
    }
    const double n = static_cast<double>(sample.eigenvalues.size());
    return {sum_re / n, sum_im / n};
}

// Fraction of eigenvalues <= E (right-continuous).
inline double counting_function(const EnsembleSample& sample, double e) {
    const auto it = std::upper_bound(sample.eigenvalues.begin(), sample.eigenvalues.end(), e);
    return static_cast<double>(it - sample.eigenvalues.begin()) /
           static_cast<double>(sample.eigenvalues.size());
}

} // namespace dbmlab
