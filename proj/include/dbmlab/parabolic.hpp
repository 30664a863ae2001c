#pragma once

// Discrete parabolic system attached to a coupled trajectory: the kernel
// B_{jl}(t) = 1/((x_j - x_l + eps_{jl})(y_j - y_l + eps_{jl})) on the window
// |j|, |l| <= K, the contraction flow dv = -L v with L the graph Laplacian
// of B, its propagator, and the Hoelder / Duhamel diagnostics.
//
// Time stepping is Crank-Nicolson with substep <= 0.5 / max_j L_jj, which
// preserves row sums exactly and keeps every propagator entry nonnegative
// ((I - aL) stays entrywise nonnegative and (I + aL) is an M-matrix).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dbmlab/dbm.hpp"
#include "dbmlab/errors.hpp"
#include "dbmlab/linalg.hpp"

namespace dbmlab {

class ParabolicKernel {
public:
    // Kernel harvested from a coupled trajectory around (k0, j0).
    ParabolicKernel(const CoupledTrajectory& ct, std::size_t window, double eps_micro)
        : window_(window), eps_(eps_micro) {
        const std::size_t n = ct.n_particles();
        const auto kk = static_cast<std::ptrdiff_t>(window);
        if (window < 1 || window > n / 2)
            throw std::invalid_argument("ParabolicKernel: need 1 <= K <= N/2");
        if (static_cast<std::ptrdiff_t>(ct.k0) < kk ||
            static_cast<std::ptrdiff_t>(ct.k0) + kk >= static_cast<std::ptrdiff_t>(n) ||
            static_cast<std::ptrdiff_t>(ct.j0) < kk ||
            static_cast<std::ptrdiff_t>(ct.j0) + kk >= static_cast<std::ptrdiff_t>(n))
            throw std::invalid_argument("ParabolicKernel: window exceeds particle range");
        const std::size_t m = ct.n_times();
        times_.resize(m);
        x_.assign(m, std::vector<double>(2 * window + 1));
        y_.assign(m, std::vector<double>(2 * window + 1));
        for (std::size_t s = 0; s < m; ++s) {
            times_[s] = ct.micro_time(s);
            for (std::ptrdiff_t j = -kk; j <= kk; ++j) {
                x_[s][static_cast<std::size_t>(j + kk)] = ct.micro_x(s, j);
                y_[s][static_cast<std::size_t>(j + kk)] = ct.micro_y(s, j);
            }
        }
    }

    // Synthetic kernel from explicit window paths (testing and calibration).
    ParabolicKernel(std::vector<double> micro_times, std::vector<std::vector<double>> x_window,
                    std::vector<std::vector<double>> y_window, double eps_micro)
        : times_(std::move(micro_times)), x_(std::move(x_window)), y_(std::move(y_window)),
          eps_(eps_micro) {
        if (times_.size() != x_.size() || times_.size() != y_.size() || times_.size() < 2)
            throw std::invalid_argument("ParabolicKernel: inconsistent path data");
        if (x_.front().size() % 2 == 0)
            throw std::invalid_argument("ParabolicKernel: window width must be odd (2K+1)");
        window_ = (x_.front().size() - 1) / 2;
    }

    std::size_t window() const { return window_; }
    std::size_t width() const { return 2 * window_ + 1; }
    double epsilon() const { return eps_; }
    const std::vector<double>& times() const { return times_; }
    double time_begin() const { return times_.front(); }
    double time_end() const { return times_.back(); }

    double b(std::size_t snap, std::ptrdiff_t j, std::ptrdiff_t l) const {
        const auto kk = static_cast<std::ptrdiff_t>(window_);
        const std::size_t wj = static_cast<std::size_t>(j + kk);
        const std::size_t wl = static_cast<std::size_t>(l + kk);
        const double ejl = (j > l) ? eps_ : -eps_;
        const double gx = x_[snap][wj] - x_[snap][wl] + ejl;
        const double gy = y_[snap][wj] - y_[snap][wl] + ejl;
        const double val = 1.0 / (gx * gy);
        if (!std::isfinite(val))
            throw KernelSingular("kernel entry not finite at snapshot " + std::to_string(snap));
        return val;
    }

    // Row-major graph Laplacian of B at one snapshot: L_jj = sum_l B_jl,
    // L_jl = -B_jl.
    void laplacian(std::size_t snap, std::vector<double>& lap) const {
        const std::size_t w = width();
        const auto kk = static_cast<std::ptrdiff_t>(window_);
        lap.assign(w * w, 0.0);
        for (std::ptrdiff_t j = -kk; j <= kk; ++j) {
            const std::size_t wj = static_cast<std::size_t>(j + kk);
            double diag = 0.0;
            for (std::ptrdiff_t l = -kk; l <= kk; ++l) {
                if (l == j) continue;
                const double bjl = b(snap, j, l);
                lap[wj * w + static_cast<std::size_t>(l + kk)] = -bjl;
                diag += bjl;
            }
            lap[wj * w + wj] = diag;
        }
    }

private:
    std::size_t window_ = 0;
    std::vector<double> times_;
    std::vector<std::vector<double>> x_, y_;
    double eps_ = 0.0;

    friend class PropagatorBuilder;
};

struct PropagatorMatrix {
    std::size_t window = 0;
    std::vector<double> entries; // row-major (2K+1)^2, v(t) = U v(s)

    double operator()(std::ptrdiff_t a, std::ptrdiff_t p) const {
        const auto kk = static_cast<std::ptrdiff_t>(window);
        const std::size_t w = 2 * window + 1;
        return entries[static_cast<std::size_t>(a + kk) * w + static_cast<std::size_t>(p + kk)];
    }

    double row_sum(std::ptrdiff_t a) const {
        const auto kk = static_cast<std::ptrdiff_t>(window);
        const std::size_t w = 2 * window + 1;
        double s = 0.0;
        for (std::size_t p = 0; p < w; ++p)
            s += entries[static_cast<std::size_t>(a + kk) * w + p];
        return s;
    }

    double min_entry() const {
        double m = std::numeric_limits<double>::infinity();
        for (double e : entries) m = std::min(m, e);
        return m;
    }
};

namespace detail {

// Shared driver: walks the kernel's piecewise-constant intervals from s to t
// and hands each substep batch to the visitor.
template <typename Visit>
inline void cn_walk(const ParabolicKernel& kernel, double s, double t, Visit&& visit) {
    if (t < s) throw std::invalid_argument("parabolic evolution: t < s");
    if (s < kernel.time_begin() - 1e-12 || t > kernel.time_end() + 1e-12)
        throw std::invalid_argument("parabolic evolution: [s,t] outside kernel range");
    if (t == s) return;
    const auto& times = kernel.times();
    std::vector<double> lap;
    for (std::size_t m = 0; m + 1 < times.size(); ++m) {
        const double lo = std::max(s, times[m]);
        const double hi = std::min(t, times[m + 1]);
        if (hi <= lo) continue;
        kernel.laplacian(m, lap);
        double max_diag = 0.0;
        const std::size_t w = kernel.width();
        for (std::size_t i = 0; i < w; ++i) max_diag = std::max(max_diag, lap[i * w + i]);
        const double cap = (max_diag > 0.0) ? 0.5 / max_diag
                                            : std::numeric_limits<double>::infinity();
        const auto nsub = static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / cap)));
        visit(lap, (hi - lo) / static_cast<double>(nsub), nsub);
    }
}

} // namespace detail

/// v(t) from dv = -L(tau) v, v(s) = v0, by Crank-Nicolson over the kernel's
/// snapshot intervals. Preserves constants to solver roundoff and contracts
/// the sup norm.
inline std::vector<double> evolve_parabolic(const ParabolicKernel& kernel,
                                            std::vector<double> v0, double s, double t) {
    const std::size_t w = kernel.width();
    if (v0.size() != w) throw std::invalid_argument("evolve_parabolic: v0 has wrong length");
    std::vector<double> rhs(w), factor;
    detail::cn_walk(kernel, s, t, [&](const std::vector<double>& lap, double h, std::size_t nsub) {
        const double a = 0.5 * h;
        factor.resize(w * w);
        for (std::size_t i = 0; i < w * w; ++i) factor[i] = a * lap[i];
        for (std::size_t i = 0; i < w; ++i) factor[i * w + i] += 1.0;
        lin::cholesky(factor, w);
        for (std::size_t sub = 0; sub < nsub; ++sub) {
            for (std::size_t i = 0; i < w; ++i) {
                double acc = v0[i];
                const double* lrow = &lap[i * w];
                for (std::size_t j = 0; j < w; ++j) acc -= a * lrow[j] * v0[j];
                rhs[i] = acc;
            }
            lin::chol_solve(factor, w, rhs.data());
            std::swap(v0, rhs);
        }
    });
    return v0;
}

// Same flow, recording v at each requested time (sorted, within [s, t_max]).
inline std::vector<std::vector<double>> evolve_parabolic_multi(const ParabolicKernel& kernel,
                                                               std::vector<double> v0, double s,
                                                               const std::vector<double>& record) {
    std::vector<std::vector<double>> out;
    out.reserve(record.size());
    double cur = s;
    std::vector<double> v = std::move(v0);
    for (double target : record) {
        if (target < cur - 1e-12)
            throw std::invalid_argument("evolve_parabolic_multi: record times must be sorted");
        if (target > cur) {
            v = evolve_parabolic(kernel, std::move(v), cur, target);
            cur = target;
        }
        out.push_back(v);
    }
    return out;
}

/// Time-ordered propagator U(s,t); U(s,s) is the identity, rows sum to one,
/// entries stay nonnegative up to solver roundoff.
inline PropagatorMatrix propagator(const ParabolicKernel& kernel, double s, double t) {
    const std::size_t w = kernel.width();
    PropagatorMatrix u;
    u.window = kernel.window();
    u.entries.assign(w * w, 0.0);
    for (std::size_t i = 0; i < w; ++i) u.entries[i * w + i] = 1.0;

    std::vector<double> step(w * w), factor, col(w), tmp;
    detail::cn_walk(kernel, s, t, [&](const std::vector<double>& lap, double h, std::size_t nsub) {
        const double a = 0.5 * h;
        factor.resize(w * w);
        for (std::size_t i = 0; i < w * w; ++i) factor[i] = a * lap[i];
        for (std::size_t i = 0; i < w; ++i) factor[i * w + i] += 1.0;
        lin::cholesky(factor, w);
        // step = (I + aL)^{-1} (I - aL), built column by column
        for (std::size_t j = 0; j < w; ++j) {
            for (std::size_t i = 0; i < w; ++i)
                col[i] = (i == j ? 1.0 : 0.0) - a * lap[i * w + j];
            lin::chol_solve(factor, w, col.data());
            for (std::size_t i = 0; i < w; ++i) step[i * w + j] = col[i];
        }
        // U <- step^nsub * U by binary exponentiation
        std::size_t e = nsub;
        std::vector<double> pw = step;
        std::vector<double> result;
        bool first = true;
        while (e > 0) {
            if (e & 1) {
                if (first) {
                    result = pw;
                    first = false;
                } else {
                    lin::matmul(pw, result, tmp, w);
                    std::swap(result, tmp);
                }
            }
            e >>= 1;
            if (e > 0) {
                lin::matmul(pw, pw, tmp, w);
                std::swap(pw, tmp);
            }
        }
        lin::matmul(result, u.entries, tmp, w);
        std::swap(u.entries, tmp);
    });
    return u;
}

struct HolderReport {
    std::vector<double> sigmas;
    std::vector<double> ratios; // sup_{|j|+|j'| <= sigma^{2/3}} |v_j - v_j'| / ||v0||_inf
    double fitted_exponent = 0.0; // decay exponent of ratio ~ sigma^{-a}
    bool passes = false;
};

/// Local flatness of the parabolic flow: evolves v0 and measures the
/// normalized oscillation over |j| + |j'| <= sigma^{2/3} at times in
/// [sigma - sigma^{1/3}, sigma], then fits the decay exponent across sigmas.
inline HolderReport holder_check(const ParabolicKernel& kernel, const std::vector<double>& v0,
                                 std::vector<double> sigmas, double c3 = 0.1,
                                 double min_exponent = 0.05) {
    if (sigmas.empty()) throw std::invalid_argument("holder_check: need at least one sigma");
    std::sort(sigmas.begin(), sigmas.end());
    const double k = static_cast<double>(kernel.window());
    const double lo = std::pow(k, c3), hi = std::pow(k, 1.0 - c3);
    for (double s : sigmas)
        if (s < lo * (1.0 - 1e-9) || s > hi * (1.0 + 1e-9))
            throw std::invalid_argument("holder_check: sigma outside [K^c3, K^{1-c3}]");

    double v0_norm = 0.0;
    for (double v : v0) v0_norm = std::max(v0_norm, std::abs(v));
    if (v0_norm == 0.0) v0_norm = 1.0;

    // One forward pass: each sigma contributes a handful of sample times.
    constexpr int kTimesPerSigma = 5;
    std::vector<double> record;
    for (double s : sigmas) {
        const double t_lo = s - std::cbrt(s);
        for (int i = 0; i < kTimesPerSigma; ++i)
            record.push_back(t_lo + (s - t_lo) * static_cast<double>(i) /
                                        static_cast<double>(kTimesPerSigma - 1));
    }
    std::sort(record.begin(), record.end());
    const auto states = evolve_parabolic_multi(kernel, v0, 0.0, record);

    HolderReport rep;
    rep.sigmas = sigmas;
    const auto kk = static_cast<std::ptrdiff_t>(kernel.window());
    for (double s : sigmas) {
        const double t_lo = s - std::cbrt(s);
        const auto label_max = static_cast<std::ptrdiff_t>(std::pow(s, 2.0 / 3.0));
        double osc = 0.0;
        for (std::size_t m = 0; m < record.size(); ++m) {
            if (record[m] < t_lo - 1e-12 || record[m] > s + 1e-12) continue;
            double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
            for (std::ptrdiff_t j = -std::min(label_max, kk); j <= std::min(label_max, kk); ++j) {
                const double v = states[m][static_cast<std::size_t>(j + kk)];
                vmin = std::min(vmin, v);
                vmax = std::max(vmax, v);
            }
            osc = std::max(osc, vmax - vmin);
        }
        rep.ratios.push_back(osc / v0_norm);
    }

    // oscillation below the row-sum preservation budget is pure roundoff
    bool all_tiny = true;
    for (double r : rep.ratios)
        if (r > 1e-10) all_tiny = false;
    if (all_tiny) {
        rep.fitted_exponent = std::numeric_limits<double>::infinity();
        rep.passes = true;
        return rep;
    }
    if (sigmas.size() >= 2) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        const double cnt = static_cast<double>(sigmas.size());
        for (std::size_t i = 0; i < sigmas.size(); ++i) {
            const double lx = std::log(sigmas[i]);
            const double ly = std::log(std::max(rep.ratios[i], 1e-300));
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        rep.fitted_exponent = -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    }
    rep.passes = rep.fitted_exponent > min_exponent;
    return rep;
}

struct DuhamelReport {
    std::size_t window = 0;
    double tau_end = 0.0;
    double residual_sup = 0.0;     // sup_{|a| <= sqrt(K), tau} |u_a - v_a|
    double residual_central = 0.0; // same for a = 0
    double xi_sup = 0.0;           // sup of the cutoff forcing magnitude
    double u0_norm = 0.0;          // ||u(0)||_inf
};

/// Checks the Duhamel picture: u built from the short-range coupled
/// difference, v from the homogeneous parabolic flow with v(0) = u(0); the
/// gap between them is driven only by the cutoff forcing xi.
inline DuhamelReport duhamel_residual(const CoupledTrajectory& ct, std::size_t window,
                                      double eps_micro) {
    const auto sres = integrate_shortrange(ct, window, eps_micro);
    const ParabolicKernel kernel(ct, window, eps_micro);
    const std::size_t m = ct.n_times();
    const std::size_t w = 2 * window + 1;
    const auto kk = static_cast<std::ptrdiff_t>(window);
    const double nd = static_cast<double>(ct.n_particles());

    std::vector<std::vector<double>> u(m, std::vector<double>(w));
    for (std::size_t step = 0; step < m; ++step) {
        const double damp = std::exp(ct.micro_time(step) / (2.0 * nd));
        for (std::ptrdiff_t a = -kk; a <= kk; ++a) {
            const std::size_t wa = static_cast<std::size_t>(a + kk);
            const double diff = (ct.micro_x(step, a) - ct.micro_y(step, a)) +
                                sres.x_tilde_dev[step][wa] - sres.y_tilde_dev[step][wa];
            u[step][wa] = damp * diff;
        }
    }

    const auto v = evolve_parabolic_multi(kernel, u[0], 0.0, kernel.times());

    DuhamelReport rep;
    rep.window = window;
    rep.tau_end = kernel.time_end();
    for (double x : u[0]) rep.u0_norm = std::max(rep.u0_norm, std::abs(x));
    const auto amax = static_cast<std::ptrdiff_t>(std::sqrt(static_cast<double>(window)));
    for (std::size_t step = 0; step < m; ++step) {
        for (std::ptrdiff_t a = -amax; a <= amax; ++a) {
            const std::size_t wa = static_cast<std::size_t>(a + kk);
            const double r = std::abs(u[step][wa] - v[step][wa]);
            rep.residual_sup = std::max(rep.residual_sup, r);
            if (a == 0) rep.residual_central = std::max(rep.residual_central, r);
        }
    }

    // Forcing xi_a = -e^{tau/2N} sum_l B_al [ (qtil^y_a - qtil^y_l) -
    // (qtil^x_a - qtil^x_l) ], evaluated on the stored snapshots.
    for (std::size_t step = 0; step + 1 < m; ++step) {
        const double damp = std::exp(ct.micro_time(step) / (2.0 * nd));
        for (std::ptrdiff_t a = -kk; a <= kk; ++a) {
            const std::size_t wa = static_cast<std::size_t>(a + kk);
            double xi = 0.0;
            for (std::ptrdiff_t l = -kk; l <= kk; ++l) {
                if (l == a) continue;
                const std::size_t wl = static_cast<std::size_t>(l + kk);
                const double dy = sres.y_tilde_dev[step][wa] - sres.y_tilde_dev[step][wl];
                const double dx = sres.x_tilde_dev[step][wa] - sres.x_tilde_dev[step][wl];
                xi -= kernel.b(step, a, l) * (dy - dx);
            }
            rep.xi_sup = std::max(rep.xi_sup, std::abs(damp * xi));
        }
    }
    return rep;
}

} // namespace dbmlab
