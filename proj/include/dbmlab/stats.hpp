#pragma once

// Statistical observables: bulk index sets, local-law and rigidity errors,
// level-repulsion exponent fits, counting-function errors, gap-universality
// distances and averaged correlation comparisons. Estimators are pure
// reductions over sample collections; bootstrap bands use their own stream.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dbmlab/ensembles.hpp"
#include "dbmlab/errors.hpp"
#include "dbmlab/freeconv.hpp"
#include "dbmlab/rng.hpp"
#include "dbmlab/semicircle.hpp"

namespace dbmlab {

struct BulkIndexSet {
    double q = 0.0;
    std::size_t first = 0; // first index with gamma_i strictly inside the window
    std::size_t count = 0;

    bool empty() const { return count == 0; }
    std::size_t last() const { return first + count - 1; }
    bool contains(std::size_t i) const { return i >= first && i < first + count; }
};

// { i : gamma_i in (E0 - qG, E0 + qG) }; contiguous by monotonicity.
inline BulkIndexSet bulk_index_set(const std::vector<double>& gamma, double e0, double g,
                                   double q) {
    if (q <= 0.0 || q >= 1.0) throw std::invalid_argument("bulk_index_set: q must be in (0,1)");
    BulkIndexSet out;
    out.q = q;
    const double lo = e0 - q * g, hi = e0 + q * g;
    const auto begin = std::upper_bound(gamma.begin(), gamma.end(), lo);
    const auto end = std::lower_bound(gamma.begin(), gamma.end(), hi);
    out.first = static_cast<std::size_t>(begin - gamma.begin());
    out.count = (end > begin) ? static_cast<std::size_t>(end - begin) : 0;
    return out;
}

inline BulkIndexSet bulk_index_set(const FreeConvolution& fc, const PotentialProfile& profile,
                                   double q) {
    return bulk_index_set(fc.classical_locations, profile.center, profile.window, q);
}

// Two-sample Kolmogorov-Smirnov distance.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InsufficientSamples("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double d = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double x = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] <= x) ++ia;
        while (ib < b.size() && b[ib] <= x) ++ib;
        d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
    }
    return d;
}

struct KsNullBand {
    double median = 0.0;
    double q95 = 0.0;
};

// Permutation null: pool the two samples, reshuffle into the original sizes.
// Calibrates the KS scale including any within-sample dependence carried by
// the pooled draw.
inline KsNullBand ks_null_band(const std::vector<double>& a, const std::vector<double>& b,
                               std::size_t reps, RngStream& rng) {
    std::vector<double> pool(a);
    pool.insert(pool.end(), b.begin(), b.end());
    std::vector<double> stats(reps);
    std::vector<double> left(a.size()), right(b.size());
    for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t i = pool.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.raw() % i);
            std::swap(pool[i - 1], pool[j]);
        }
        std::copy(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(a.size()), left.begin());
        std::copy(pool.begin() + static_cast<std::ptrdiff_t>(a.size()), pool.end(), right.begin());
        stats[r] = ks_distance(left, right);
    }
    std::sort(stats.begin(), stats.end());
    KsNullBand band;
    band.median = stats[stats.size() / 2];
    band.q95 = stats[static_cast<std::size_t>(0.95 * static_cast<double>(stats.size() - 1))];
    return band;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw InsufficientSamples("median_of: empty");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double quantile_of(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(p * static_cast<double>(v.size() - 1));
    return v[idx];
}

struct LocalLawRow {
    double energy = 0.0;
    double eta = 0.0;
    double median_abs_dm = 0.0;
    double max_scaled = 0.0; // max over samples of N eta |m_N - m_fc|
};

struct LocalLawReport {
    double sup_scaled_error = 0.0;
    double slope = 0.0; // log-log slope of median |dm| vs eta, median over energies
    std::vector<LocalLawRow> table;
    bool pass_sup = false;
    bool pass_slope = false;
};

/// sup over the (E, eta) grid and samples of N eta |m_N(z) - m_fc(z)|, plus
/// the decay slope of |dm| in eta at fixed energy.
inline LocalLawReport local_law_check(const PotentialProfile& profile, const TimeParam& tp,
                                      const std::vector<EnsembleSample>& samples,
                                      const std::vector<double>& energies,
                                      std::vector<double> etas, double sup_threshold,
                                      double slope_center = -1.0, double slope_tol = 0.3,
                                      const SolverOpts& opts = {}) {
    if (samples.empty()) throw InsufficientSamples("local_law_check: no samples");
    std::sort(etas.begin(), etas.end(), std::greater<>());
    const double n = static_cast<double>(profile.size());

    LocalLawReport rep;
    std::vector<double> slopes;
    for (double e : energies) {
        std::optional<std::complex<double>> warm;
        double eta_prev = 1.0;
        std::vector<double> log_eta, log_med;
        for (double eta : etas) {
            // continuation from above keeps the solver on the physical branch
            for (double h = eta_prev; h > eta; h = std::max(eta, 0.7 * h))
                warm = solve_mfc(profile, tp, {e, h}, opts, warm);
            const std::complex<double> mfc = solve_mfc(profile, tp, {e, eta}, opts, warm);
            warm = mfc;
            eta_prev = eta;

            LocalLawRow row;
            row.energy = e;
            row.eta = eta;
            std::vector<double> dms(samples.size());
            for (std::size_t s = 0; s < samples.size(); ++s) {
                const double dm = std::abs(empirical_stieltjes(samples[s], {e, eta}) - mfc);
                dms[s] = dm;
                row.max_scaled = std::max(row.max_scaled, n * eta * dm);
            }
            row.median_abs_dm = median_of(dms);
            rep.sup_scaled_error = std::max(rep.sup_scaled_error, row.max_scaled);
            rep.table.push_back(row);
            log_eta.push_back(std::log(eta));
            log_med.push_back(std::log(std::max(row.median_abs_dm, 1e-300)));
        }
        if (log_eta.size() >= 2) {
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            const double cnt = static_cast<double>(log_eta.size());
            for (std::size_t i = 0; i < log_eta.size(); ++i) {
                sx += log_eta[i];
                sy += log_med[i];
                sxx += log_eta[i] * log_eta[i];
                sxy += log_eta[i] * log_med[i];
            }
            slopes.push_back((cnt * sxy - sx * sy) / (cnt * sxx - sx * sx));
        }
    }
    rep.slope = slopes.empty() ? 0.0 : median_of(slopes);
    rep.pass_sup = rep.sup_scaled_error <= sup_threshold;
    rep.pass_slope = std::abs(rep.slope - slope_center) <= slope_tol;
    return rep;
}

struct ScaledErrorReport {
    std::vector<double> per_sample; // one scaled error per sample
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double max = 0.0;
    bool pass = false;
};

/// Per sample, max over bulk indices of N |lambda_i - gamma_i|.
inline ScaledErrorReport rigidity_check(const std::vector<EnsembleSample>& samples,
                                        const std::vector<double>& gamma,
                                        const BulkIndexSet& bulk, double threshold) {
    if (samples.empty()) throw InsufficientSamples("rigidity_check: no samples");
    if (bulk.empty()) throw IndexOutOfBulk("rigidity_check: empty bulk set");
    ScaledErrorReport rep;
    const double n = static_cast<double>(gamma.size());
    for (const auto& s : samples) {
        double worst = 0.0;
        for (std::size_t i = bulk.first; i < bulk.first + bulk.count; ++i)
            worst = std::max(worst, n * std::abs(s.eigenvalues[i] - gamma[i]));
        rep.per_sample.push_back(worst);
    }
    rep.median = median_of(rep.per_sample);
    rep.q25 = quantile_of(rep.per_sample, 0.25);
    rep.q75 = quantile_of(rep.per_sample, 0.75);
    rep.max = quantile_of(rep.per_sample, 1.0);
    rep.pass = rep.median <= threshold;
    return rep;
}

/// Per sample, sup over the window of N |n_t(E) - n_fc(E)|; the sup of the
/// step-vs-smooth difference is attained at eigenvalues or window ends.
inline ScaledErrorReport counting_error(const std::vector<EnsembleSample>& samples,
                                        const std::function<double(double)>& n_fc, double e_lo,
                                        double e_hi, double threshold) {
    if (samples.empty()) throw InsufficientSamples("counting_error: no samples");
    ScaledErrorReport rep;
    for (const auto& s : samples) {
        const double n = static_cast<double>(s.eigenvalues.size());
        double worst = std::max(std::abs(counting_function(s, e_lo) - n_fc(e_lo)),
                                std::abs(counting_function(s, e_hi) - n_fc(e_hi)));
        const auto lo = std::lower_bound(s.eigenvalues.begin(), s.eigenvalues.end(), e_lo);
        const auto hi = std::upper_bound(s.eigenvalues.begin(), s.eigenvalues.end(), e_hi);
        for (auto it = lo; it != hi; ++it) {
            const auto i = static_cast<double>(it - s.eigenvalues.begin());
            const double f = n_fc(*it);
            worst = std::max(worst, std::abs((i + 1.0) / n - f)); // right limit
            worst = std::max(worst, std::abs(i / n - f));        // left limit
        }
        rep.per_sample.push_back(n * worst);
    }
    rep.median = median_of(rep.per_sample);
    rep.q25 = quantile_of(rep.per_sample, 0.25);
    rep.q75 = quantile_of(rep.per_sample, 0.75);
    rep.max = quantile_of(rep.per_sample, 1.0);
    rep.pass = rep.median <= threshold;
    return rep;
}

struct RepulsionReport {
    std::vector<double> eps_grid;
    std::vector<double> gap_cdf;     // P[N * nearest gap <= eps]
    std::vector<double> k2_prob;     // P[#eigenvalues in [E -eps/N, E +eps/N] >= 2]
    double fitted_exponent = 0.0;    // log-log slope of gap_cdf over the grid
    std::size_t observations = 0;
    bool pass = false;
};

/// Empirical small-gap tail over consecutive bulk gaps and the k = 2
/// interval observable at a fixed bulk energy. The exponent fit uses grid
/// points backed by at least min_count events.
inline RepulsionReport level_repulsion_fit(const std::vector<EnsembleSample>& samples,
                                           const BulkIndexSet& bulk,
                                           const std::vector<double>& eps_grid, double e_center,
                                           double exponent_lo = 1.7, double exponent_hi = 2.3,
                                           std::size_t min_observations = 10000,
                                           std::size_t min_count = 5) {
    if (bulk.empty() || bulk.count < 2)
        throw IndexOutOfBulk("level_repulsion_fit: bulk set too small");
    std::vector<double> gaps;
    for (const auto& s : samples) {
        const double n = static_cast<double>(s.eigenvalues.size());
        for (std::size_t i = bulk.first; i + 1 <= bulk.last(); ++i)
            gaps.push_back(n * (s.eigenvalues[i + 1] - s.eigenvalues[i]));
    }
    if (gaps.size() < min_observations)
        throw InsufficientSamples("level_repulsion_fit: need >= " +
                                  std::to_string(min_observations) + " gap observations, have " +
                                  std::to_string(gaps.size()));
    std::sort(gaps.begin(), gaps.end());

    RepulsionReport rep;
    rep.eps_grid = eps_grid;
    rep.observations = gaps.size();
    const double total = static_cast<double>(gaps.size());
    for (double eps : eps_grid) {
        const auto it = std::upper_bound(gaps.begin(), gaps.end(), eps);
        rep.gap_cdf.push_back(static_cast<double>(it - gaps.begin()) / total);
    }

    for (double eps : eps_grid) {
        std::size_t hits = 0;
        for (const auto& s : samples) {
            const double n = static_cast<double>(s.eigenvalues.size());
            const auto lo = std::lower_bound(s.eigenvalues.begin(), s.eigenvalues.end(),
                                             e_center - eps / n);
            const auto hi = std::upper_bound(s.eigenvalues.begin(), s.eigenvalues.end(),
                                             e_center + eps / n);
            if (hi - lo >= 2) ++hits;
        }
        rep.k2_prob.push_back(static_cast<double>(hits) / static_cast<double>(samples.size()));
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        const double count = rep.gap_cdf[i] * total;
        if (count < static_cast<double>(min_count)) continue;
        const double lx = std::log(eps_grid[i]);
        const double ly = std::log(rep.gap_cdf[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++used;
    }
    if (used < 3) throw InsufficientSamples("level_repulsion_fit: too few populated grid points");
    const double cnt = static_cast<double>(used);
    rep.fitted_exponent = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    rep.pass = rep.fitted_exponent >= exponent_lo && rep.fitted_exponent <= exponent_hi;
    return rep;
}

struct GapUniversalityReport {
    double ks = 0.0;
    KsNullBand null_band;
    std::size_t n_deformed = 0;
    std::size_t n_goe = 0;
    bool pass = false;
};

/// KS distance between density-rescaled central gaps of the deformed
/// ensemble (index k0, scale rho_fc(gamma_k0)) and the GOE (index j0, scale
/// rho_sc(mu_j0)), with a permutation null band.
inline GapUniversalityReport gap_universality_distance(
    const std::vector<EnsembleSample>& deformed, const std::vector<EnsembleSample>& goe,
    std::size_t k0, std::size_t j0, double rho_fc_at_gamma, double rho_sc_at_mu,
    double ks_threshold, RngStream& rng, std::size_t min_samples = 200,
    std::size_t boot_reps = 200) {
    if (deformed.size() < min_samples || goe.size() < min_samples)
        throw InsufficientSamples("gap_universality_distance: need >= " +
                                  std::to_string(min_samples) + " samples per ensemble");
    std::vector<double> def_gaps, goe_gaps;
    for (const auto& s : deformed) {
        const std::size_t n = s.eigenvalues.size();
        if (k0 + 1 >= n) throw IndexOutOfBulk("gap_universality_distance: k0 at edge");
        def_gaps.push_back(static_cast<double>(n) * rho_fc_at_gamma *
                           (s.eigenvalues[k0 + 1] - s.eigenvalues[k0]));
    }
    for (const auto& s : goe) {
        const std::size_t n = s.eigenvalues.size();
        if (j0 + 1 >= n) throw IndexOutOfBulk("gap_universality_distance: j0 at edge");
        goe_gaps.push_back(static_cast<double>(n) * rho_sc_at_mu *
                           (s.eigenvalues[j0 + 1] - s.eigenvalues[j0]));
    }
    GapUniversalityReport rep;
    rep.n_deformed = def_gaps.size();
    rep.n_goe = goe_gaps.size();
    rep.ks = ks_distance(def_gaps, goe_gaps);
    rep.null_band = ks_null_band(def_gaps, goe_gaps, boot_reps, rng);
    rep.pass = rep.ks <= ks_threshold && rep.ks <= 2.0 * rep.null_band.q95;
    return rep;
}

// Smooth compactly supported bump, support (-3, 3), max 1 at 0.
inline double bump_test_function(double a) {
    const double u = a / 3.0;
    if (u <= -1.0 || u >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

struct CorrelationCompareReport {
    double deformed_value = 0.0;
    double goe_value = 0.0;
    double difference = 0.0;
    double bootstrap_sigma = 0.0;
    bool pass = false;
};

namespace detail {

// Energy-averaged n-point observable: mean over E' in [e-b, e+b] of
// sum over eigenvalue n-tuples of the product bump at N rho (lambda - E').
inline double correlation_estimate(const EnsembleSample& s, double e, double b, double rho,
                                   int n_point) {
    const double n = static_cast<double>(s.eigenvalues.size());
    constexpr int kWindowPoints = 21;
    double acc = 0.0;
    for (int w = 0; w < kWindowPoints; ++w) {
        const double ep = e - b + 2.0 * b * static_cast<double>(w) /
                                      static_cast<double>(kWindowPoints - 1);
        // only eigenvalues with |N rho (lambda - ep)| < 3 contribute
        const double reach = 3.0 / (n * rho);
        const auto lo = std::lower_bound(s.eigenvalues.begin(), s.eigenvalues.end(), ep - reach);
        const auto hi = std::upper_bound(s.eigenvalues.begin(), s.eigenvalues.end(), ep + reach);
        double sum = 0.0;
        if (n_point == 1) {
            for (auto it = lo; it != hi; ++it) sum += bump_test_function(n * rho * (*it - ep));
        } else {
            for (auto it = lo; it != hi; ++it)
                for (auto jt = lo; jt != hi; ++jt) {
                    if (it == jt) continue;
                    sum += bump_test_function(n * rho * (*it - ep)) *
                           bump_test_function(n * rho * (*jt - ep));
                }
        }
        acc += sum;
    }
    return acc / static_cast<double>(kWindowPoints);
}

} // namespace detail

/// Difference of energy-averaged n-point observables (n = 1 or 2) between
/// the deformed ensemble around e_def and the GOE around e_goe, with a
/// bootstrap standard error from resampling whole matrices.
inline CorrelationCompareReport averaged_correlation_compare(
    const std::vector<EnsembleSample>& deformed, const std::vector<EnsembleSample>& goe,
    double e_def, double rho_def, double e_goe, double rho_goe, double b, int n_point,
    double window_lo, double window_hi, RngStream& rng, std::size_t boot_reps = 200) {
    if (n_point != 1 && n_point != 2)
        throw std::invalid_argument("averaged_correlation_compare: n must be 1 or 2");
    if (e_def - b < window_lo || e_def + b > window_hi)
        throw WindowOutsideBulk("averaged_correlation_compare: averaging window leaves the bulk");
    if (deformed.empty() || goe.empty())
        throw InsufficientSamples("averaged_correlation_compare: empty ensemble");

    std::vector<double> vals_def(deformed.size()), vals_goe(goe.size());
    for (std::size_t i = 0; i < deformed.size(); ++i)
        vals_def[i] = detail::correlation_estimate(deformed[i], e_def, b, rho_def, n_point);
    for (std::size_t i = 0; i < goe.size(); ++i)
        vals_goe[i] = detail::correlation_estimate(goe[i], e_goe, b, rho_goe, n_point);

    auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    CorrelationCompareReport rep;
    rep.deformed_value = mean(vals_def);
    rep.goe_value = mean(vals_goe);
    rep.difference = rep.deformed_value - rep.goe_value;

    std::vector<double> boot(boot_reps);
    for (std::size_t r = 0; r < boot_reps; ++r) {
        double md = 0.0, mg = 0.0;
        for (std::size_t i = 0; i < vals_def.size(); ++i)
            md += vals_def[rng.raw() % vals_def.size()];
        for (std::size_t i = 0; i < vals_goe.size(); ++i)
            mg += vals_goe[rng.raw() % vals_goe.size()];
        boot[r] = md / static_cast<double>(vals_def.size()) -
                  mg / static_cast<double>(vals_goe.size());
    }
    const double bm = std::accumulate(boot.begin(), boot.end(), 0.0) /
                      static_cast<double>(boot_reps);
    double var = 0.0;
    for (double x : boot) var += (x - bm) * (x - bm);
    rep.bootstrap_sigma = std::sqrt(var / static_cast<double>(boot_reps - 1));
    rep.pass = std::abs(rep.difference) <= 3.0 * rep.bootstrap_sigma;
    return rep;
}

} // namespace dbmlab
