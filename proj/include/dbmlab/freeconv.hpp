#pragma once

// Deformed semicircle law: damped fixed-point / Newton solver for the
// self-consistent Stieltjes transform, density and quantile recovery on a
// spectral grid, GOE matching parameters, and the stability functionals.
//
// All particle and quantile indices in this library are 0-based: the i-th
// classical location gamma_i satisfies (i+1)/N = integral of the density up
// to gamma_i.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dbmlab/errors.hpp"
#include "dbmlab/pchip.hpp"
#include "dbmlab/potential.hpp"
#include "dbmlab/semicircle.hpp"

namespace dbmlab {

struct SpectralPoint {
    double energy = 0.0;
    double eta = 0.0; // strictly positive (upper half plane)
};

// One canonical evolution parameter. Internally everything runs in the
// t-form H_t = c V + sqrt(s) W with c = exp(-t/2), s = 1 - exp(-t); the
// T-form is exposed through the map T -> t = -log(1 - T), under which the
// two models agree in law up to the vanishing contraction of V.
struct TimeParam {
    double t = 0.0;
    double s = 0.0; // noise variance, in [0, 1]
    double c = 1.0; // potential coefficient exp(-t/2)

    static TimeParam from_t(double t) {
        if (t < 0.0) throw std::invalid_argument("TimeParam: t must be >= 0");
        TimeParam p;
        p.t = t;
        p.s = -std::expm1(-t);
        p.c = std::exp(-0.5 * t);
        return p;
    }

    static TimeParam from_T(double cap_t) {
        if (cap_t < 0.0 || cap_t > 1.0)
            throw std::invalid_argument("TimeParam: T must lie in [0, 1]");
        TimeParam p;
        p.t = (cap_t < 1.0) ? -std::log1p(-cap_t) : std::numeric_limits<double>::infinity();
        p.s = cap_t;
        p.c = std::sqrt(1.0 - cap_t);
        return p;
    }
};

struct SolverOpts {
    double tol = 1e-12;
    int max_iter = 2000;
    double theta_min = 0.1; // damping floor
};

inline std::complex<double> stieltjes_v(const PotentialProfile& profile, SpectralPoint z) {
    if (z.eta <= 0.0) throw std::invalid_argument("stieltjes_v: eta must be positive");
    double sum_re = 0.0, sum_im = 0.0;
    for (double v : profile.entries) {
        const double ar = v - z.energy;
        const double inv = 1.0 / (ar * ar + z.eta * z.eta);
        sum_re += ar * inv;
        sum_im += z.eta * inv;
    }
    const double n = static_cast<double>(profile.size());
    return {sum_re / n, sum_im / n};
}

namespace detail {

// One pass over the entries: the fixed-point map F(m) = mean 1/(cV - z - sm)
// and, when requested, R2(m) = mean 1/(cV - z - sm)^2 for Newton steps.
inline void mfc_map(const PotentialProfile& profile, const TimeParam& tp, SpectralPoint z,
                    std::complex<double> m, std::complex<double>& f_out,
                    std::complex<double>* r2_out) {
    const double br = -z.energy - tp.s * m.real();
    const double bi = -z.eta - tp.s * m.imag();
    double f_re = 0.0, f_im = 0.0, r2_re = 0.0, r2_im = 0.0;
    if (r2_out) {
        for (double v : profile.entries) {
            const double ar = tp.c * v + br;
            const double inv = 1.0 / (ar * ar + bi * bi);
            const double gr = ar * inv, gi = -bi * inv;
            f_re += gr;
            f_im += gi;
            r2_re += gr * gr - gi * gi;
            r2_im += 2.0 * gr * gi;
        }
    } else {
        for (double v : profile.entries) {
            const double ar = tp.c * v + br;
            const double inv = 1.0 / (ar * ar + bi * bi);
            f_re += ar * inv;
            f_im += -bi * inv;
        }
    }
    const double n = static_cast<double>(profile.size());
    f_out = {f_re / n, f_im / n};
    if (r2_out) *r2_out = {r2_re / n, r2_im / n};
}

} // namespace detail

/// Unique upper-half-plane solution m of m = mean 1/(cV_i - z - s m).
/// Damped Picard iteration with residual-monotone step control and a Newton
/// polish once the residual is small; the iterate never leaves the upper
/// half plane (the map itself is Herglotz, so undamped steps are safe).
inline std::complex<double> solve_mfc(const PotentialProfile& profile, const TimeParam& tp,
                                      SpectralPoint z, const SolverOpts& opts = {},
                                      std::optional<std::complex<double>> warm = {}) {
    if (z.eta <= 0.0) throw std::invalid_argument("solve_mfc: eta must be positive");
    std::complex<double> m = warm.value_or(std::complex<double>(0.0, std::min(1.0, 1.0 / z.eta)));
    if (m.imag() <= 0.0) m = {m.real(), 1e-12};

    double theta = 1.0;
    std::complex<double> f, r2;
    detail::mfc_map(profile, tp, z, m, f, &r2);
    double resid = std::abs(f - m);

    for (int it = 0; it < opts.max_iter; ++it) {
        if (resid <= opts.tol) return m;

        if (resid < 1e-4) {
            // Newton on g(m) = F(m) - m; g'(m) = s R2 - 1.
            const std::complex<double> denom = 1.0 - tp.s * r2;
            if (std::abs(denom) > 1e-14) {
                const std::complex<double> m_new = m + (f - m) / denom;
                if (m_new.imag() > 0.0) {
                    std::complex<double> f_new, r2_new;
                    detail::mfc_map(profile, tp, z, m_new, f_new, &r2_new);
                    const double resid_new = std::abs(f_new - m_new);
                    if (resid_new < resid) {
                        m = m_new;
                        f = f_new;
                        r2 = r2_new;
                        resid = resid_new;
                        continue;
                    }
                }
            }
        }

        const std::complex<double> m_trial = (1.0 - theta) * m + theta * f;
        std::complex<double> f_trial, r2_trial;
        detail::mfc_map(profile, tp, z, m_trial, f_trial, &r2_trial);
        const double resid_trial = std::abs(f_trial - m_trial);
        if (resid_trial <= resid || theta <= opts.theta_min) {
            m = m_trial;
            f = f_trial;
            r2 = r2_trial;
            resid = resid_trial;
            theta = std::min(1.0, theta * 1.2);
        } else {
            theta = std::max(opts.theta_min, 0.5 * theta);
        }
    }
    if (resid <= opts.tol) return m;
    throw NonConvergence(resid, z.energy, z.eta);
}

struct FreeConvolution {
    TimeParam time;
    std::vector<double> grid;                    // energies E_k, ascending
    std::vector<std::complex<double>> m_values;  // m_fc(E_k + i eta_floor)
    std::vector<double> density;                 // Im m / pi
    std::vector<double> cdf;                     // trapezoid cumulative of density
    std::vector<double> classical_locations;     // gamma_i, i = 0..N-1
    double eta_floor = 0.0;
    double total_mass = 0.0;

    MonotoneCubic cdf_interp;
    MonotoneCubic density_interp;
    MonotoneCubic re_m_interp;

    double density_at(double e) const {
        if (e <= grid.front() || e >= grid.back()) return 0.0;
        return std::max(0.0, density_interp(e));
    }

    // Normalized counting function n_fc(E) in [0, 1].
    double cdf_at(double e) const {
        if (e <= grid.front()) return 0.0;
        if (e >= grid.back()) return 1.0;
        return std::clamp(cdf_interp(e) / total_mass, 0.0, 1.0);
    }

    double re_m_at(double e) const {
        return re_m_interp(std::clamp(e, grid.front(), grid.back()));
    }
};

inline double default_eta_floor(const TimeParam& tp) {
    return 1e-3 * std::min(1.0, std::max(tp.t, 1e-6));
}

// Linear grid covering the support of the deformed law (support is contained
// in the Minkowski sum of c*[V_min, V_max] and [-2 sqrt(s), 2 sqrt(s)]).
inline std::vector<double> support_grid(const PotentialProfile& profile, const TimeParam& tp,
                                        std::size_t n_points) {
    const double r = 2.0 * std::sqrt(tp.s);
    const double pad = 0.25 * std::sqrt(tp.s) + 0.02;
    const double lo = tp.c * profile.entries.front() - r - pad;
    const double hi = tp.c * profile.entries.back() + r + pad;
    std::vector<double> g(n_points);
    for (std::size_t k = 0; k < n_points; ++k)
        g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_points - 1);
    return g;
}

/// Continuation in eta: solve at eta = 1 and sweep geometrically down to
/// eta_floor with warm starts, per grid energy. Density and quantiles are
/// read off at eta_floor itself, not extrapolated to eta -> 0.
inline FreeConvolution solve_mfc_grid(const PotentialProfile& profile, const TimeParam& tp,
                                      std::vector<double> grid, double eta_floor,
                                      const SolverOpts& opts = {}) {
    if (eta_floor <= 0.0) throw std::invalid_argument("solve_mfc_grid: eta_floor must be positive");
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw std::invalid_argument("solve_mfc_grid: grid must be sorted");
    if (grid.size() < 8) throw std::invalid_argument("solve_mfc_grid: grid too small");

    FreeConvolution fc;
    fc.time = tp;
    fc.grid = std::move(grid);
    fc.eta_floor = eta_floor;
    const std::size_t npts = fc.grid.size();
    fc.m_values.resize(npts);
    fc.density.resize(npts);

    int failed = 0;
    double fail_e = 0.0, fail_eta = 0.0, fail_resid = 0.0;
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(npts); ++k) {
        const double e = fc.grid[static_cast<std::size_t>(k)];
        std::optional<std::complex<double>> warm;
        double eta = 1.0;
        try {
            while (true) {
                warm = solve_mfc(profile, tp, {e, eta}, opts, warm);
                if (eta == eta_floor) break;
                eta = std::max(eta_floor, 0.7 * eta);
            }
            fc.m_values[static_cast<std::size_t>(k)] = *warm;
            fc.density[static_cast<std::size_t>(k)] = std::max(0.0, warm->imag() / kPi);
        } catch (const NonConvergence& err) {
#pragma omp critical
            {
                failed = 1;
                fail_e = err.energy;
                fail_eta = err.eta;
                fail_resid = err.residual;
            }
        }
    }
    if (failed) throw NonConvergence(fail_resid, fail_e, fail_eta);

    fc.cdf.resize(npts);
    fc.cdf[0] = 0.0;
    for (std::size_t k = 1; k < npts; ++k)
        fc.cdf[k] = fc.cdf[k - 1] +
                    0.5 * (fc.density[k] + fc.density[k - 1]) * (fc.grid[k] - fc.grid[k - 1]);
    fc.total_mass = fc.cdf.back();

    // The cumulative must be strictly increasing for interpolation; nudge
    // flat stretches (density gaps) by a negligible slope.
    std::vector<double> cdf_strict = fc.cdf;
    for (std::size_t k = 1; k < npts; ++k)
        if (cdf_strict[k] <= cdf_strict[k - 1])
            cdf_strict[k] = cdf_strict[k - 1] + 1e-16 * fc.total_mass;

    fc.cdf_interp = MonotoneCubic(fc.grid, cdf_strict);
    fc.density_interp = MonotoneCubic(fc.grid, fc.density);
    std::vector<double> re_m(npts);
    for (std::size_t k = 0; k < npts; ++k) re_m[k] = fc.m_values[k].real();
    fc.re_m_interp = MonotoneCubic(fc.grid, re_m);

    const std::size_t n = profile.size();
    fc.classical_locations.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double target =
            fc.total_mass * static_cast<double>(i + 1) / static_cast<double>(n);
        fc.classical_locations[i] = fc.cdf_interp.invert(target, 1e-12);
    }
    return fc;
}

struct RegularityReport {
    double c_v = 0.0; // empirical min of Im m_V over the scan window
    double big_c_v = 0.0; // empirical max
    bool pass = false;
};

struct RegularityOpts {
    double lower_threshold = 0.05;
    double upper_threshold = 20.0;
    int n_energy = 41;
    int n_eta = 31;
};

// Scans Im m_V over E in (E0 - qG, E0 + qG) and eta log-spaced in [ell, 10].
inline RegularityReport check_regularity(const PotentialProfile& profile, double q,
                                         const RegularityOpts& opts = {}) {
    profile.validate();
    if (q <= 0.0 || q >= 1.0) throw std::invalid_argument("check_regularity: q must be in (0,1)");
    RegularityReport rep;
    rep.c_v = std::numeric_limits<double>::infinity();
    rep.big_c_v = 0.0;
    const double half = q * profile.window;
    for (int ie = 0; ie < opts.n_energy; ++ie) {
        const double e = profile.center - half +
                         2.0 * half * static_cast<double>(ie) / static_cast<double>(opts.n_energy - 1);
        for (int ih = 0; ih < opts.n_eta; ++ih) {
            const double frac = static_cast<double>(ih) / static_cast<double>(opts.n_eta - 1);
            const double eta = profile.ell * std::pow(10.0 / profile.ell, frac);
            const double im = stieltjes_v(profile, {e, eta}).imag();
            rep.c_v = std::min(rep.c_v, im);
            rep.big_c_v = std::max(rep.big_c_v, im);
        }
    }
    rep.pass = rep.c_v >= opts.lower_threshold && rep.big_c_v <= opts.upper_threshold;
    return rep;
}

struct MatchingParams {
    double a = 1.0;       // rho_sc(mu_j0) / rho_fc(gamma_k0)
    double b = 0.0;       // gamma_k0 - a mu_j0
    std::size_t k0 = 0;   // bulk index into the deformed ensemble
    std::size_t j0 = 0;   // bulk index into the GOE
    double sweep_max = 0.0; // max_|j| N |a mu_{j0+j} + b - gamma_{k0+j}|
};

/// Local affine match of semicircle quantiles onto the deformed law around
/// (k0, j0), with a verification sweep over |j| <= sqrt(N t).
inline MatchingParams matching_params(const FreeConvolution& fc, const PotentialProfile& profile,
                                      double q, std::size_t k0, std::size_t j0,
                                      double alpha = 0.05) {
    const std::size_t n = fc.classical_locations.size();
    if (k0 >= n || j0 >= n) throw IndexOutOfBulk("matching_params: index exceeds N");
    const double gamma0 = fc.classical_locations[k0];
    if (std::abs(gamma0 - profile.center) >= q * profile.window)
        throw IndexOutOfBulk("matching_params: gamma_{k0} outside the bulk window");
    const double nd = static_cast<double>(n);
    if (static_cast<double>(j0 + 1) < alpha * nd || static_cast<double>(j0 + 1) > (1.0 - alpha) * nd)
        throw IndexOutOfBulk("matching_params: j0 outside the GOE bulk");

    const std::vector<double> mu = classical_locations_sc(n);
    const double rho_fc0 = fc.density_at(gamma0);
    if (rho_fc0 <= 0.0) throw IndexOutOfBulk("matching_params: vanishing density at gamma_{k0}");

    MatchingParams mp;
    mp.k0 = k0;
    mp.j0 = j0;
    mp.a = rho_sc(mu[j0]) / rho_fc0;
    mp.b = gamma0 - mp.a * mu[j0];

    const double t_eff = std::min(std::isfinite(fc.time.t) ? fc.time.t : 4.0, 4.0);
    auto jmax = static_cast<std::ptrdiff_t>(std::floor(std::sqrt(nd * t_eff)));
    for (std::ptrdiff_t j = -jmax; j <= jmax; ++j) {
        const std::ptrdiff_t ik = static_cast<std::ptrdiff_t>(k0) + j;
        const std::ptrdiff_t ij = static_cast<std::ptrdiff_t>(j0) + j;
        if (ik < 0 || ij < 0 || ik >= static_cast<std::ptrdiff_t>(n) ||
            ij >= static_cast<std::ptrdiff_t>(n))
            continue;
        const double predicted = mp.a * mu[static_cast<std::size_t>(ij)] + mp.b;
        const double err = nd * std::abs(predicted -
                                         fc.classical_locations[static_cast<std::size_t>(ik)]);
        mp.sweep_max = std::max(mp.sweep_max, err);
    }
    return mp;
}

struct StabilityFunctionals {
    std::complex<double> m;
    std::complex<double> r2;
    std::complex<double> r3;
    std::complex<double> one_minus_tr2; // 1 - s R2, bounded away from 0 in the bulk
    double g_abs_avg = 0.0;             // mean |g_i|, O(log N) for regular data
};

inline StabilityFunctionals stability_functionals(const PotentialProfile& profile,
                                                  const TimeParam& tp, SpectralPoint z,
                                                  const SolverOpts& opts = {}) {
    StabilityFunctionals out;
    out.m = solve_mfc(profile, tp, z, opts);
    std::complex<double> sum2{0.0, 0.0}, sum3{0.0, 0.0};
    double sum_abs = 0.0;
    const std::complex<double> shift(z.energy + tp.s * out.m.real(),
                                     z.eta + tp.s * out.m.imag());
    for (double v : profile.entries) {
        const std::complex<double> g = 1.0 / (tp.c * v - shift);
        const std::complex<double> g2 = g * g;
        sum2 += g2;
        sum3 += g2 * g;
        sum_abs += std::abs(g);
    }
    const double n = static_cast<double>(profile.size());
    out.r2 = sum2 / n;
    out.r3 = sum3 / n;
    out.one_minus_tr2 = 1.0 - tp.s * out.r2;
    out.g_abs_avg = sum_abs / n;
    return out;
}

// d(gamma_i)/dt = -Re m_fc(gamma_i + i eta_floor) - gamma_i / 2.
inline double gamma_time_derivative(const FreeConvolution& fc, std::size_t i) {
    if (i >= fc.classical_locations.size())
        throw std::out_of_range("gamma_time_derivative: index exceeds N");
    const double gamma = fc.classical_locations[i];
    return -fc.re_m_at(gamma) - 0.5 * gamma;
}

} // namespace dbmlab
