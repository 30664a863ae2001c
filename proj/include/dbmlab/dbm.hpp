#pragma once

// Euler-Maruyama integration of Dyson Brownian motion, the coupled pair of
// DBMs driven by one Brownian family (the second process reads its noise at
// a shifted index), and the regularized / short-range-cutoff companion
// processes whose drifts are evaluated on a stored path.
//
// Step acceptance requires (a) strict particle ordering and (b) every move
// bounded by half the smaller adjacent gap. A rejected step is redone at
// half the step size on both halves, with the Gaussian increment split
// exactly: dB over dt decomposes into two increments over dt/2 with the
// correct joint law, which preserves the coupling between processes.
//
// At beta = 1 the gap process is log-recurrent, so the path dips to
// arbitrarily small gaps at a steady rate and no bounded refinement depth
// can traverse every dip explicitly (the admissible move shrinks linearly
// with the gap while halving shrinks the noise only by sqrt 2). When the
// refinement floor is reached, the step is taken implicitly instead: the
// drift is the gradient of a potential that is convex on the ordered cone,
// so the backward-Euler step with the same Brownian increment has a unique,
// automatically ordered solution. StepCollapse is reserved for failure of
// that implicit solve.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dbmlab/errors.hpp"
#include "dbmlab/linalg.hpp"
#include "dbmlab/rng.hpp"

namespace dbmlab {

struct DriftOpts {
    double noise_scale = 1.0; // 0 turns the SDE into its drift ODE (test hook)
    int max_halvings = 20;
    bool move_cap = true;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states; // states[m][i], strictly increasing in i
    bool ties_perturbed = false;

    std::size_t n_particles() const { return states.empty() ? 0 : states.front().size(); }
    std::size_t n_times() const { return times.size(); }
    const std::vector<double>& final_state() const { return states.back(); }
};

namespace detail {

// drift_i = (1/N) sum_{k != i} 1/(x_i - x_k) - x_i / 2, accumulated over
// pairs so the interaction is exactly antisymmetric.
inline void dbm_drift(const std::vector<double>& x, std::vector<double>& out) {
    const std::size_t n = x.size();
    out.assign(n, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        double acc = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double w = inv_n / (xi - x[j]);
            acc += w;
            out[j] -= w;
        }
        out[i] += acc - 0.5 * xi;
    }
}

inline bool strictly_increasing(const std::vector<double>& x) {
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) return false;
    return true;
}

inline bool moves_within_cap(const std::vector<double>& x, const std::vector<double>& next) {
    const std::size_t n = x.size();
    if (n < 2) return true;
    for (std::size_t i = 0; i < n; ++i) {
        double gap = std::numeric_limits<double>::infinity();
        if (i > 0) gap = std::min(gap, x[i] - x[i - 1]);
        if (i + 1 < n) gap = std::min(gap, x[i + 1] - x[i]);
        if (std::abs(next[i] - x[i]) > 0.5 * gap) return false;
    }
    return true;
}

// dB over dt splits into dB1 (over dt/2) = dB/2 + (sqrt(dt)/2) zeta and
// dB2 = dB - dB1; the pair has the exact Brownian joint law.
inline void split_increment(const std::vector<double>& db, double dt, RngStream& rng,
                            std::vector<double>& db1, std::vector<double>& db2) {
    const std::size_t m = db.size();
    db1.resize(m);
    db2.resize(m);
    const double half_sd = 0.5 * std::sqrt(dt);
    for (std::size_t i = 0; i < m; ++i) {
        const double mid = 0.5 * db[i] + half_sd * rng.gaussian();
        db1[i] = mid;
        db2[i] = db[i] - mid;
    }
}

struct SingleStepper {
    std::size_t n;
    double noise_coeff; // sqrt(2/N) * noise_scale
    std::vector<double> drift;
    std::vector<double> jac, g, target;

    bool try_step(const std::vector<double>& x, double dt, const std::vector<double>& db,
                  const DriftOpts& opts, std::vector<double>& next) {
        dbm_drift(x, drift);
        next.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            next[i] = x[i] + drift[i] * dt + noise_coeff * db[i];
        if (!strictly_increasing(next)) return false;
        if (opts.move_cap && !moves_within_cap(x, next)) return false;
        return true;
    }

    // Backward-Euler step with the same increment: solve
    //   y - dt b(y) = x + noise. The drift is -grad U with U convex on the
    //   ordered cone, so the solution exists, is unique and stays ordered;
    //   damped Newton with a fraction-to-boundary rule finds it.
    void implicit_step(const std::vector<double>& x, double dt, const std::vector<double>& db,
                       std::vector<double>& next, double t_report) {
        const double inv_n = 1.0 / static_cast<double>(n);
        target.resize(n);
        double scale = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            target[i] = x[i] + noise_coeff * db[i];
            scale = std::max(scale, std::abs(target[i]));
        }
        next = x;
        g.resize(n);
        for (int iter = 0; iter < 100; ++iter) {
            dbm_drift(next, drift);
            double resid = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                g[i] = next[i] - dt * drift[i] - target[i];
                resid = std::max(resid, std::abs(g[i]));
            }
            if (resid <= 1e-12 * scale) return;

            // Jacobian (1 + dt/2) I + dt L, L the Laplacian of (1/N)/gap^2
            jac.assign(n * n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                double diag = 0.0;
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double d = next[i] - next[j];
                    const double w = dt * inv_n / (d * d);
                    jac[i * n + j] -= w;
                    jac[j * n + i] -= w;
                    jac[j * n + j] += w;
                    diag += w;
                }
                jac[i * n + i] += diag + 1.0 + 0.5 * dt;
            }
            lin::cholesky(jac, n);
            for (std::size_t i = 0; i < n; ++i) g[i] = -g[i];
            lin::chol_solve(jac, n, g.data());

            double alpha = 1.0;
            for (std::size_t i = 1; i < n; ++i) {
                const double dgap = g[i] - g[i - 1];
                if (dgap < 0.0) {
                    const double gap = next[i] - next[i - 1];
                    alpha = std::min(alpha, -0.9 * gap / dgap);
                }
            }
            if (!(alpha > 0.0)) throw StepCollapse(t_report);
            for (std::size_t i = 0; i < n; ++i) next[i] += alpha * g[i];
        }
        throw StepCollapse(t_report);
    }
};

} // namespace detail

/// Path of d lambda_i = sqrt(2/N) dB_i + ((1/N) sum_{k!=i} 1/(lambda_i -
/// lambda_k) - lambda_i/2) dt from strictly increasing initial data.
/// Ties in the initial data are broken by an i * 1e-12 * spread perturbation
/// and flagged on the returned trajectory.
inline Trajectory integrate_dbm(std::vector<double> initial, double t_end, double dt,
                                RngStream& rng, const DriftOpts& opts = {}) {
    if (initial.empty()) throw std::invalid_argument("integrate_dbm: empty initial data");
    if (dt <= 0.0 || t_end < 0.0) throw std::invalid_argument("integrate_dbm: bad time step");
    if (!std::is_sorted(initial.begin(), initial.end()))
        throw std::invalid_argument("integrate_dbm: initial data must be sorted");

    Trajectory traj;
    const std::size_t n = initial.size();
    bool has_tie = false;
    for (std::size_t i = 1; i < n; ++i)
        if (initial[i] == initial[i - 1]) has_tie = true;
    if (has_tie) {
        const double spread = std::max(initial.back() - initial.front(), 1.0);
        for (std::size_t i = 0; i < n; ++i)
            initial[i] += static_cast<double>(i) * 1e-12 * spread;
        traj.ties_perturbed = true;
    }

    detail::SingleStepper stepper;
    stepper.n = n;
    stepper.noise_coeff = std::sqrt(2.0 / static_cast<double>(n)) * opts.noise_scale;

    std::vector<double> x = std::move(initial);
    traj.times.push_back(0.0);
    traj.states.push_back(x);

    std::vector<double> db(n), next, db1, db2;
    double t = 0.0;
    while (t < t_end - 1e-15 * std::max(1.0, t_end)) {
        const double step = std::min(dt, t_end - t);
        const double sd = std::sqrt(step);
        for (std::size_t i = 0; i < n; ++i) db[i] = sd * rng.gaussian();

        // Depth-first refinement: advance the step as a stack of halves.
        struct Seg { double dt; std::vector<double> db; int depth; };
        std::vector<Seg> stack;
        stack.push_back({step, db, 0});
        while (!stack.empty()) {
            Seg seg = std::move(stack.back());
            stack.pop_back();
            if (stepper.try_step(x, seg.dt, seg.db, opts, next)) {
                x = next;
                t += seg.dt;
                continue;
            }
            if (seg.depth >= opts.max_halvings) {
                stepper.implicit_step(x, seg.dt, seg.db, next, t);
                x = next;
                t += seg.dt;
                continue;
            }
            detail::split_increment(seg.db, seg.dt, rng, db1, db2);
            stack.push_back({0.5 * seg.dt, db2, seg.depth + 1});
            stack.push_back({0.5 * seg.dt, db1, seg.depth + 1});
        }
        traj.times.push_back(t);
        traj.states.push_back(x);
    }
    return traj;
}

struct CoupledTrajectory {
    Trajectory x; // deformed-side process, times relative to t0
    Trajectory y; // GOE-side process, same time grid, same Brownian family
    std::size_t k0 = 0;
    std::size_t j0 = 0;
    double t0 = 0.0;

    std::size_t n_particles() const { return x.n_particles(); }
    std::size_t n_times() const { return x.n_times(); }

    // Microscopic views: x_j(tau) = N * lambda_{k0+j}(t0 + tau/N).
    double micro_time(std::size_t m) const {
        return static_cast<double>(n_particles()) * x.times[m];
    }
    double micro_x(std::size_t m, std::ptrdiff_t j) const {
        const auto i = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(k0) + j);
        return static_cast<double>(n_particles()) * x.states[m][i];
    }
    double micro_y(std::size_t m, std::ptrdiff_t j) const {
        const auto i = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(j0) + j);
        return static_cast<double>(n_particles()) * y.states[m][i];
    }
};

/// Two DBMs consuming one Brownian family: particle i of the x process reads
/// increment i, particle i of the y process reads increment i + (k0 - j0).
/// A step is accepted only when both processes satisfy the ordering and move
/// constraints, so the shared increments stay aligned under refinement.
inline CoupledTrajectory integrate_coupled(const std::vector<double>& x0,
                                           const std::vector<double>& y0, std::size_t k0,
                                           std::size_t j0, double t_end, double dt,
                                           RngStream& rng, const DriftOpts& opts = {},
                                           double t0 = 0.0) {
    if (x0.size() != y0.size()) throw std::invalid_argument("integrate_coupled: size mismatch");
    if (x0.empty()) throw std::invalid_argument("integrate_coupled: empty initial data");
    if (!detail::strictly_increasing(x0) || !detail::strictly_increasing(y0))
        throw std::invalid_argument("integrate_coupled: initial data must be strictly increasing");
    const std::size_t n = x0.size();
    if (k0 >= n || j0 >= n) throw std::invalid_argument("integrate_coupled: bad bulk indices");

    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k0) - static_cast<std::ptrdiff_t>(j0);
    const std::size_t m_inc = n + static_cast<std::size_t>(shift < 0 ? -shift : shift);
    const std::size_t x_off = static_cast<std::size_t>(shift < 0 ? -shift : 0);
    const std::size_t y_off = static_cast<std::size_t>(shift < 0 ? 0 : shift);

    detail::SingleStepper stepper;
    stepper.n = n;
    stepper.noise_coeff = std::sqrt(2.0 / static_cast<double>(n)) * opts.noise_scale;

    CoupledTrajectory ct;
    ct.k0 = k0;
    ct.j0 = j0;
    ct.t0 = t0;
    std::vector<double> x = x0, y = y0;
    ct.x.times.push_back(0.0);
    ct.x.states.push_back(x);
    ct.y.times.push_back(0.0);
    ct.y.states.push_back(y);

    std::vector<double> db(m_inc), dbx(n), dby(n), next_x, next_y, db1, db2;
    std::vector<double> drift_y;
    double t = 0.0;
    while (t < t_end - 1e-15 * std::max(1.0, t_end)) {
        const double step = std::min(dt, t_end - t);
        const double sd = std::sqrt(step);
        for (std::size_t i = 0; i < m_inc; ++i) db[i] = sd * rng.gaussian();

        struct Seg { double dt; std::vector<double> db; int depth; };
        std::vector<Seg> stack;
        stack.push_back({step, db, 0});
        while (!stack.empty()) {
            Seg seg = std::move(stack.back());
            stack.pop_back();
            for (std::size_t i = 0; i < n; ++i) {
                dbx[i] = seg.db[i + x_off];
                dby[i] = seg.db[i + y_off];
            }
            const bool ok_x = stepper.try_step(x, seg.dt, dbx, opts, next_x);
            bool ok = ok_x;
            if (ok_x) {
                std::swap(next_x, next_y); // reuse buffers: next_y now holds x proposal
                ok = stepper.try_step(y, seg.dt, dby, opts, next_x);
                std::swap(next_x, next_y);
            }
            if (ok) {
                x = next_x;
                y = next_y;
                t += seg.dt;
                continue;
            }
            if (seg.depth >= opts.max_halvings) {
                // refinement floor: advance each process implicitly where the
                // explicit proposal fails, on the same increments
                if (!stepper.try_step(x, seg.dt, dbx, opts, next_x))
                    stepper.implicit_step(x, seg.dt, dbx, next_x, t0 + t);
                if (!stepper.try_step(y, seg.dt, dby, opts, next_y))
                    stepper.implicit_step(y, seg.dt, dby, next_y, t0 + t);
                x = next_x;
                y = next_y;
                t += seg.dt;
                continue;
            }
            detail::split_increment(seg.db, seg.dt, rng, db1, db2);
            stack.push_back({0.5 * seg.dt, db2, seg.depth + 1});
            stack.push_back({0.5 * seg.dt, db1, seg.depth + 1});
        }
        ct.x.times.push_back(t);
        ct.x.states.push_back(x);
        ct.y.times.push_back(t);
        ct.y.states.push_back(y);
    }
    return ct;
}

struct RegularizedResult {
    // deviation[m][i] = xhat_i - x_i at times[m]; same grid as the input path
    std::vector<std::vector<double>> deviation;
    double sup_abs_deviation = 0.0;
};

/// Companion process with the pair interaction shifted by eps * sign(k - j),
/// driven by the same noise and with drift evaluated on the stored path; the
/// Brownian term cancels in the deviation, which is integrated directly.
inline RegularizedResult integrate_regularized(const Trajectory& traj, double epsilon) {
    if (epsilon < 0.0) throw std::invalid_argument("integrate_regularized: eps must be >= 0");
    const std::size_t n = traj.n_particles();
    const std::size_t m = traj.n_times();
    RegularizedResult out;
    out.deviation.assign(m, std::vector<double>(n, 0.0));
    if (epsilon == 0.0 || m < 2) return out;

    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> q(n, 0.0), dq(n);
    for (std::size_t step = 1; step < m; ++step) {
        const double dt = traj.times[step] - traj.times[step - 1];
        const std::vector<double>& x = traj.states[step - 1];
        dq.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = x[i];
            double acc = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                // i < j: eps_{ij} = -eps from particle i's side, +eps from j's.
                const double d = xi - x[j];
                const double di = inv_n * (1.0 / (d - epsilon) - 1.0 / d);
                const double dj = inv_n * (1.0 / (-d + epsilon) - 1.0 / (-d));
                acc += di;
                dq[j] += dj;
            }
            dq[i] += acc;
        }
        for (std::size_t i = 0; i < n; ++i) {
            q[i] += (dq[i] - 0.5 * q[i]) * dt;
            out.deviation[step][i] = q[i];
            out.sup_abs_deviation = std::max(out.sup_abs_deviation, std::abs(q[i]));
        }
    }
    return out;
}

struct ShortRangeResult {
    std::size_t window = 0; // K
    std::vector<double> micro_times;
    // Microscopic deviations indexed [time][j + K], j in [-K, K]:
    std::vector<std::vector<double>> x_hat_dev;   // xhat - x
    std::vector<std::vector<double>> y_hat_dev;   // yhat - y
    std::vector<std::vector<double>> x_tilde_dev; // xtilde - x
    std::vector<std::vector<double>> y_tilde_dev; // ytilde - y
    // sup over t and |a| <= |b| <= K of the weighted cutoff error
    // |(xhat_a - xhat_b) - (xtilde_a - xtilde_b)| sqrt(K-|a|+1) sqrt(K-|b|+1) / |a-b|
    double weighted_observable = 0.0;
    double central_gap_error = 0.0; // raw error for (a,b) = (0,1)
    double edge_gap_error = 0.0;    // raw error for (a,b) = (K-1,K)
};

namespace detail {

// Deviation dynamics on the stored microscopic path: full-range regularized
// (tail = all l) and short-range (interaction restricted to |l| <= K).
inline void shortrange_one_side(const CoupledTrajectory& ct, bool use_y, std::size_t window,
                                double eps, std::vector<std::vector<double>>& hat_dev,
                                std::vector<std::vector<double>>& tilde_dev) {
    const std::size_t n = ct.n_particles();
    const std::size_t m = ct.n_times();
    const std::size_t center = use_y ? ct.j0 : ct.k0;
    const auto kk = static_cast<std::ptrdiff_t>(window);
    const std::size_t width = 2 * window + 1;
    const double nd = static_cast<double>(n);

    hat_dev.assign(m, std::vector<double>(width, 0.0));
    tilde_dev.assign(m, std::vector<double>(width, 0.0));
    std::vector<double> qhat(width, 0.0), qtil(width, 0.0);

    for (std::size_t step = 1; step < m; ++step) {
        const double dtau = nd * ((use_y ? ct.y.times[step] : ct.x.times[step]) -
                                  (use_y ? ct.y.times[step - 1] : ct.x.times[step - 1]));
        const std::vector<double>& st = use_y ? ct.y.states[step - 1] : ct.x.states[step - 1];
        for (std::ptrdiff_t j = -kk; j <= kk; ++j) {
            const auto ij = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(center) + j);
            const double xj = nd * st[ij];
            double full_shift = 0.0; // sum_l [1/(dx + eps_jl) - 1/dx]
            double tail = 0.0;       // sum_{|l| > K} 1/(dx + eps_jl)
            for (std::size_t il = 0; il < n; ++il) {
                if (il == ij) continue;
                const std::ptrdiff_t l =
                    static_cast<std::ptrdiff_t>(il) - static_cast<std::ptrdiff_t>(center);
                const double dx = xj - nd * st[il];
                const double ejl = (j > l) ? eps : -eps;
                const double reg = 1.0 / (dx + ejl);
                full_shift += reg - 1.0 / dx;
                if (l < -kk || l > kk) tail += reg;
            }
            const std::size_t w = static_cast<std::size_t>(j + kk);
            qhat[w] += (full_shift - qhat[w] / (2.0 * nd)) * dtau;
            qtil[w] += (full_shift - tail - qtil[w] / (2.0 * nd)) * dtau;
        }
        hat_dev[step] = qhat;
        tilde_dev[step] = qtil;
    }
}

} // namespace detail

/// Short-range cutoff: interaction restricted to labels |l| <= K around the
/// coupled window, drift on the stored paths. Reports the deviation from the
/// regularized full-range process and its edge-weighted supremum.
inline ShortRangeResult integrate_shortrange(const CoupledTrajectory& ct, std::size_t window,
                                             double eps_micro) {
    const std::size_t n = ct.n_particles();
    if (window < 1 || window > n / 2)
        throw std::invalid_argument("integrate_shortrange: need 1 <= K <= N/2");
    const auto kk = static_cast<std::ptrdiff_t>(window);
    if (static_cast<std::ptrdiff_t>(ct.k0) < kk ||
        static_cast<std::ptrdiff_t>(ct.k0) + kk >= static_cast<std::ptrdiff_t>(n) ||
        static_cast<std::ptrdiff_t>(ct.j0) < kk ||
        static_cast<std::ptrdiff_t>(ct.j0) + kk >= static_cast<std::ptrdiff_t>(n))
        throw std::invalid_argument("integrate_shortrange: window exceeds particle range");

    ShortRangeResult out;
    out.window = window;
    const std::size_t m = ct.n_times();
    out.micro_times.resize(m);
    for (std::size_t i = 0; i < m; ++i) out.micro_times[i] = ct.micro_time(i);

    detail::shortrange_one_side(ct, false, window, eps_micro, out.x_hat_dev, out.x_tilde_dev);
    detail::shortrange_one_side(ct, true, window, eps_micro, out.y_hat_dev, out.y_tilde_dev);

    for (std::size_t step = 0; step < m; ++step) {
        const auto& qh = out.x_hat_dev[step];
        const auto& qt = out.x_tilde_dev[step];
        for (std::ptrdiff_t a = -kk; a <= kk; ++a) {
            for (std::ptrdiff_t b = a + 1; b <= kk; ++b) {
                if (std::abs(a) > std::abs(b)) continue;
                const std::size_t wa = static_cast<std::size_t>(a + kk);
                const std::size_t wb = static_cast<std::size_t>(b + kk);
                const double err = std::abs((qh[wa] - qh[wb]) - (qt[wa] - qt[wb]));
                const double ka = static_cast<double>(kk - std::abs(a) + 1);
                const double kb = static_cast<double>(kk - std::abs(b) + 1);
                const double weighted =
                    err * std::sqrt(ka) * std::sqrt(kb) / static_cast<double>(b - a);
                out.weighted_observable = std::max(out.weighted_observable, weighted);
                if (a == 0 && b == 1)
                    out.central_gap_error = std::max(out.central_gap_error, err);
                if (a == kk - 1 && b == kk)
                    out.edge_gap_error = std::max(out.edge_gap_error, err);
            }
        }
    }
    return out;
}

} // namespace dbmlab
