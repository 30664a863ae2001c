#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dbmlab/parabolic.hpp"
#include "dbmlab/rng.hpp"

using namespace dbmlab;

namespace {

// Static synthetic kernel: unit-spaced particles for both processes, so
// B_{jl} = 1/(j - l)^2, constant in time over [0, t_end].
ParabolicKernel unit_kernel(std::size_t window, double t_end) {
    const std::size_t w = 2 * window + 1;
    std::vector<double> xs(w);
    for (std::size_t i = 0; i < w; ++i)
        xs[i] = static_cast<double>(i) - static_cast<double>(window);
    return ParabolicKernel({0.0, t_end}, {xs, xs}, {xs, xs}, 0.0);
}

} // namespace

TEST_CASE("constant data is a fixed point and t = s is the identity") {
    const auto kernel = unit_kernel(16, 10.0);
    std::vector<double> v0(33, 0.7);
    const auto v = evolve_parabolic(kernel, v0, 0.0, 5.0);
    for (double x : v) REQUIRE(x == Catch::Approx(0.7).margin(1e-11));

    const auto u = propagator(kernel, 2.0, 2.0);
    for (std::ptrdiff_t a = -16; a <= 16; ++a)
        for (std::ptrdiff_t p = -16; p <= 16; ++p)
            REQUIRE(u(a, p) == ((a == p) ? 1.0 : 0.0));
}

TEST_CASE("propagator rows sum to one, entries stay nonnegative, sup norm contracts") {
    const auto kernel = unit_kernel(24, 8.0);
    const auto u = propagator(kernel, 0.0, 6.0);
    for (std::ptrdiff_t a = -24; a <= 24; ++a)
        REQUIRE(u.row_sum(a) == Catch::Approx(1.0).margin(1e-10));
    REQUIRE(u.min_entry() >= -1e-12);

    RngStream rng(21, 0);
    std::vector<double> v0(49);
    for (double& v : v0) v = 2.0 * rng.uniform() - 1.0;
    const auto v = evolve_parabolic(kernel, v0, 0.0, 6.0);
    double n0 = 0.0, n1 = 0.0;
    for (std::size_t i = 0; i < v0.size(); ++i) {
        n0 = std::max(n0, std::abs(v0[i]));
        n1 = std::max(n1, std::abs(v[i]));
    }
    REQUIRE(n1 <= n0 * (1.0 + 1e-10));
}

TEST_CASE("propagator decays in label distance") {
    const std::size_t window = 64;
    const auto kernel = unit_kernel(window, 3.0);
    const double tau = std::pow(static_cast<double>(window), 0.1);
    const auto u = propagator(kernel, 0.0, tau);

    std::vector<double> xs, ys;
    const auto kk = static_cast<std::ptrdiff_t>(window);
    for (std::ptrdiff_t d = 1; d <= 2 * kk; ++d) {
        double env = 0.0;
        for (std::ptrdiff_t a = -kk; a <= kk; ++a) {
            if (a + d > kk) break;
            env = std::max(env, std::abs(u(a, a + d)));
            env = std::max(env, std::abs(u(a + d, a)));
        }
        if (env > 1e-14) {
            xs.push_back(static_cast<double>(d + 1));
            ys.push_back(env);
        }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double cnt = static_cast<double>(xs.size());
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    REQUIRE(slope <= -0.8);
}

TEST_CASE("kernel rejects singular configurations") {
    std::vector<double> xs = {0.0, 0.0, 1.0}; // coincident pair, eps = 0
    REQUIRE_THROWS_AS(ParabolicKernel({0.0, 1.0}, {xs, xs}, {xs, xs}, 0.0).b(0, -1, 0),
                      KernelSingular);
}

TEST_CASE("holder check: constant data has zero ratio; oscillations flatten") {
    const std::size_t window = 128;
    const double k = static_cast<double>(window);
    const auto kernel = unit_kernel(window, std::pow(k, 0.8) * 1.05);

    std::vector<double> flat(2 * window + 1, 1.0);
    const auto rep_flat =
        holder_check(kernel, flat, {std::pow(k, 0.2), std::pow(k, 0.8)}, 0.1);
    REQUIRE(rep_flat.ratios[0] <= 1e-12); // constant data: solver roundoff only
    REQUIRE(rep_flat.ratios[1] <= 1e-12);
    REQUIRE(rep_flat.passes);

    RngStream rng(22, 0);
    std::vector<double> v0(2 * window + 1);
    for (double& v : v0) v = (rng.uniform() < 0.5) ? -1.0 : 1.0;
    const auto rep =
        holder_check(kernel, v0, {std::pow(k, 0.2), std::pow(k, 0.5), std::pow(k, 0.8)}, 0.1);
    REQUIRE(rep.ratios[2] < rep.ratios[0]); // later sigma, flatter field
    REQUIRE(rep.fitted_exponent > 0.05);

    REQUIRE_THROWS_AS(holder_check(kernel, v0, {0.5}, 0.1), std::invalid_argument);
}

TEST_CASE("duhamel residual vanishes when the two processes coincide") {
    // synthetic coupled trajectory with y identical to x
    const std::size_t n = 41;
    CoupledTrajectory ct;
    ct.k0 = 20;
    ct.j0 = 20;
    ct.t0 = 0.0;
    std::vector<double> state(n);
    for (std::size_t i = 0; i < n; ++i)
        state[i] = (static_cast<double>(i) - 20.0) / static_cast<double>(n);
    for (int m = 0; m <= 20; ++m) {
        const double t = 0.05 * m / static_cast<double>(n);
        auto s = state;
        for (std::size_t i = 0; i < n; ++i)
            s[i] += 0.01 * std::sin(0.3 * static_cast<double>(i) + 2.0 * t);
        ct.x.times.push_back(t);
        ct.x.states.push_back(s);
        ct.y.times.push_back(t);
        ct.y.states.push_back(s);
    }
    const auto rep = duhamel_residual(ct, 10, 1e-8);
    REQUIRE(rep.u0_norm == 0.0);
    REQUIRE(rep.residual_sup == 0.0);
    REQUIRE(rep.xi_sup == 0.0);
}
