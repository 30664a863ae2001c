// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Monte Carlo criteria run at desk scale with fixed seeds; each
// threshold is pinned in code next to the check it gates.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dbmlab/experiments.hpp"

using namespace dbmlab;
using cd = std::complex<double>;

namespace {

int g_failures = 0;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void record(int index, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[%s] %2d. %-22s %s (%.1f s)\n", pass ? "PASS" : "FAIL", index, name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

cd semicircle_m(cd z) {
    const cd r = std::sqrt(z * z - 4.0);
    cd m = (-z + r) / 2.0;
    if (m.imag() < 0.0) m = (-z - r) / 2.0;
    return m;
}

// 1. solve_mfc with V = 0, T = 1 matches the closed form to 1e-10 on a
//    100-point bulk grid with eta >= 1e-3, in under a second.
void criterion_semicircle() {
    Timer timer;
    const auto p = presets::goe(8);
    const auto tp = TimeParam::from_T(1.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double e = -1.9 + 3.8 * k / 99.0;
        std::optional<cd> warm;
        for (double eta = 1.0; eta > 1e-3; eta = std::max(1e-3, 0.7 * eta))
            warm = solve_mfc(p, tp, {e, eta}, {}, warm);
        const cd got = solve_mfc(p, tp, {e, 1e-3}, {}, warm);
        worst = std::max(worst, std::abs(got - semicircle_m(cd(e, 1e-3))));
    }
    const double secs = timer.seconds();
    record(1, "semicircle-closed-form", worst <= 1e-10 && secs < 1.0,
           fmt("max |m - closed| = %.2e <= 1e-10", worst), secs);
}

// 2. T = 0: solve_mfc equals stieltjes_v to 1e-12 on all test profiles.
void criterion_t0_identity() {
    Timer timer;
    const auto tp = TimeParam::from_T(0.0);
    double worst = 0.0;
    for (const auto& p : {presets::uniform(200, 0.005, 0.3), presets::two_atom(200, 0.005, 0.25, 1.0),
                          presets::rough(200, 0.01, 0.3)}) {
        for (double e : {-1.5, -0.5, 0.0, 0.75, 1.5})
            for (double eta : {1e-3, 1e-2, 0.1, 1.0})
                worst = std::max(worst,
                                 std::abs(solve_mfc(p, tp, {e, eta}) - stieltjes_v(p, {e, eta})));
    }
    record(2, "t0-identity", worst <= 1e-12, fmt("max deviation = %.2e <= 1e-12", worst),
           timer.seconds());
}

// 3. SDE-integrated DBM at N = 200, dt = 1e-2 t, 200 paths matches direct
//    H_t sampling: bulk-gap KS <= 0.05.
void criterion_law_equivalence() {
    Timer timer;
    const std::size_t n = 200;
    const double t = 0.1;
    const auto p = presets::uniform(n, 0.005, 0.25);
    const auto tp = TimeParam::from_t(t);
    const auto fc = solve_mfc_grid(p, tp, support_grid(p, tp, 1024), default_eta_floor(tp));
    const auto bulk = bulk_index_set(fc, p, 0.5);
    const std::size_t paths = 200;

    std::vector<std::vector<double>> sde(paths), direct(paths);
    std::string error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t path = 0; path < static_cast<std::ptrdiff_t>(paths); ++path) {
        try {
            const auto up = static_cast<std::uint64_t>(path);
            RngStream rng_sde(1001, up, 1);
            const auto traj = integrate_dbm(p.entries, t, 0.01 * t, rng_sde);
            RngStream rng_dir(1001, up, 2);
            const auto s = sample_deformed(p, tp, rng_dir);
            const double nd = static_cast<double>(n);
            for (std::size_t i = bulk.first; i + 1 <= bulk.last(); ++i) {
                sde[up].push_back(nd * (traj.final_state()[i + 1] - traj.final_state()[i]));
                direct[up].push_back(nd * (s.eigenvalues[i + 1] - s.eigenvalues[i]));
            }
        } catch (const std::exception& e) {
#pragma omp critical
            error = e.what();
        }
    }
    if (!error.empty()) {
        record(3, "law-equivalence", false, "integration failed: " + error, timer.seconds());
        return;
    }
    std::vector<double> all_sde, all_direct;
    for (std::size_t path = 0; path < paths; ++path) {
        all_sde.insert(all_sde.end(), sde[path].begin(), sde[path].end());
        all_direct.insert(all_direct.end(), direct[path].begin(), direct[path].end());
    }
    const double ks = ks_distance(all_sde, all_direct);
    record(3, "law-equivalence", ks <= 0.05,
           fmt("bulk-gap KS = %.4f <= 0.05 (%zu gaps/side)", ks, all_sde.size()),
           timer.seconds());
}

// Shared sample set for criteria 4 and 5.
struct RigiditySetting {
    PotentialProfile profile;
    TimeParam tp;
    FreeConvolution fc;
    std::vector<EnsembleSample> samples;
};

RigiditySetting make_rigidity_setting() {
    RigiditySetting s{presets::two_atom(300, 0.004, 0.25, 1.0), TimeParam::from_t(0.1), {}, {}};
    s.fc = solve_mfc_grid(s.profile, s.tp, support_grid(s.profile, s.tp, 2048),
                          default_eta_floor(s.tp));
    s.samples = draw_samples(s.profile, s.tp, 100, 1004, salts::deformed);
    return s;
}

// 4. Rigidity at N = 300, two-atom V, t = 0.1, q = 0.5, 100 samples:
//    median of max bulk N |lambda - gamma| <= (log N)^3.
void criterion_rigidity(const RigiditySetting& s) {
    Timer timer;
    const double threshold = polylog_threshold(300, 3.0);
    const auto bulk = bulk_index_set(s.fc, s.profile, 0.5);
    const auto rep = rigidity_check(s.samples, s.fc.classical_locations, bulk, threshold);
    record(4, "rigidity", rep.pass,
           fmt("median scaled error = %.2f <= %.2f (bulk size %zu)", rep.median, threshold,
               bulk.count),
           timer.seconds());
}

// 5. Local law on the same setting: sup N eta |m_N - m_fc| <= (log N)^3 over
//    eta in [10/N, 1], and |dm| ~ eta^{-1} with slope -1 +- 0.3.
void criterion_local_law(const RigiditySetting& s) {
    Timer timer;
    const double threshold = polylog_threshold(300, 3.0);
    std::vector<double> energies;
    for (int i = 0; i < 5; ++i)
        energies.push_back(1.0 - 0.125 + 0.25 * (static_cast<double>(i) + 0.5) / 5.0);
    std::vector<double> etas;
    for (int i = 0; i < 12; ++i)
        etas.push_back(10.0 / 300.0 *
                       std::pow(30.0, static_cast<double>(i) / 11.0)); // up to eta = 1
    const auto rep = local_law_check(s.profile, s.tp, s.samples, energies, etas, threshold);
    record(5, "local-law", rep.pass_sup && rep.pass_slope,
           fmt("sup = %.2f <= %.2f, slope = %.2f in [-1.3,-0.7]", rep.sup_scaled_error,
               threshold, rep.slope),
           timer.seconds());
}

// 6. Level repulsion: fitted nearest-gap exponent in [1.7, 2.3] over
//    eps in [0.05, 0.5], GOE N = 100 with 1e4 samples, then the deformed
//    ensemble at t = 20 ell.
void criterion_repulsion() {
    {
        Timer timer;
        auto cfg = validate_config(
            "kind = repulsion\nN = 100\nT = 1\nprofile = goe\nq = 0.5\nsamples = 10000\n"
            "eps_min = 0.05\neps_max = 0.5\neps_count = 9\nseed = 13\n"
            "out = acceptance_out/repulsion_goe\n");
        const auto rep = run(cfg);
        const double expo = rep.metrics["exponent"].get<double>();
        record(6, "repulsion-goe", rep.pass, fmt("fitted exponent = %.3f in [1.7, 2.3]", expo),
               timer.seconds());
    }
    {
        Timer timer;
        auto cfg = validate_config(
            "kind = repulsion\nN = 100\nt = 0.2\nprofile = two_atom\nell = 0.01\nG = 0.25\n"
            "E0 = 1.0\nq = 0.5\nsamples = 10000\neps_min = 0.05\neps_max = 0.5\n"
            "eps_count = 9\nseed = 14\nout = acceptance_out/repulsion_two_atom\n");
        const auto rep = run(cfg);
        const double expo = rep.metrics["exponent"].get<double>();
        record(6, "repulsion-deformed", rep.pass,
               fmt("fitted exponent = %.3f in [1.7, 2.3] at t = 20 ell", expo), timer.seconds());
    }
}

// 7. Gap universality: KS between rescaled central gaps of the deformed and
//    GOE ensembles <= 0.1 and within 2x of the permutation null band.
void criterion_gap_universality() {
    Timer timer;
    auto cfg = validate_config(
        "kind = gapstats\nN = 300\nt = 0.1\nprofile = two_atom\nell = 0.004\nG = 0.25\n"
        "E0 = 1.0\nq = 0.5\nsamples = 400\nks_threshold = 0.1\nseed = 15\n"
        "out = acceptance_out/gapstats\n");
    const auto rep = run(cfg);
    const double ks = rep.metrics["ks"].get<double>();
    const double q95 = rep.metrics["null_band"]["q95"].get<double>();
    record(7, "gap-universality", rep.pass,
           fmt("KS = %.4f <= 0.1 and <= 2 x null q95 = %.4f", ks, 2.0 * q95), timer.seconds());
}

// 8. Coupling contraction: median sup_{|j|,|j'|<=5} N |gap difference|
//    decreases by >= 3x between t0+ and the theorem's time window.
void criterion_coupling() {
    Timer timer;
    auto cfg = validate_config(
        "kind = couple\nN = 500\nt = 0.05\nprofile = two_atom\nell = 0.004\nG = 0.25\n"
        "E0 = 1.0\nq = 0.5\nK = 32\ndt = 0.02\npaths = 50\ncontraction_factor = 3.0\n"
        "seed = 16\nout = acceptance_out/couple\n");
    const auto rep = run(cfg);
    const auto& c = rep.metrics["contraction"];
    record(8, "coupling-contraction", c["pass"].get<bool>(),
           fmt("median sup: %.3f -> %.3f, ratio = %.2f >= 3", c["sup_initial_median"].get<double>(),
               c["sup_window_median"].get<double>(), c["ratio"].get<double>()),
           timer.seconds());
}

// 9. Propagator: rows sum to 1 +- 1e-10, entries >= -1e-12, sup-norm
//    contraction, and envelope decay exponent <= -0.8 at K = 64.
void criterion_propagator() {
    Timer timer;
    const std::size_t n = 500, window = 64;
    const auto p = presets::uniform(n, 0.004, 0.25);
    const auto tp0 = TimeParam::from_t(0.05);
    const auto fc = solve_mfc_grid(p, tp0, support_grid(p, tp0, 2048), default_eta_floor(tp0));
    const std::size_t k0 = n / 2, j0 = n / 2;
    const auto mp = matching_params(fc, p, 0.5, k0, j0);

    RngStream rng_h(1009, 0, 1), rng_w(1009, 0, 2), rng_b(1009, 0, 3);
    const auto x0 = sample_deformed(p, tp0, rng_h).eigenvalues;
    auto y0 = eigenvalues_symmetric(sample_goe(n, rng_w));
    for (double& v : y0) v = mp.a * v + mp.b;
    const double nd = static_cast<double>(n);
    const double tau = std::pow(static_cast<double>(window), 0.1);
    const auto ct = integrate_coupled(x0, y0, k0, j0, tau * 1.02 / nd, 0.02 / nd, rng_b, {},
                                      0.05);
    const ParabolicKernel kernel(ct, window, 1e-12 * nd);

    const auto id = propagator(kernel, 0.0, 0.0);
    const auto u = propagator(kernel, 0.0, tau);
    const auto kk = static_cast<std::ptrdiff_t>(window);
    bool identity_ok = true;
    double row_err = 0.0;
    for (std::ptrdiff_t a = -kk; a <= kk; ++a) {
        for (std::ptrdiff_t q = -kk; q <= kk; ++q)
            if (id(a, q) != ((a == q) ? 1.0 : 0.0)) identity_ok = false;
        row_err = std::max(row_err, std::abs(u.row_sum(a) - 1.0));
    }
    const double min_entry = u.min_entry();

    RngStream rng_v(1009, 0, 4);
    const std::size_t width = 2 * window + 1;
    std::vector<double> v0(width);
    for (double& v : v0) v = 2.0 * rng_v.uniform() - 1.0;
    double n_in = 0.0, n_out = 0.0;
    for (std::size_t a = 0; a < width; ++a) {
        double acc = 0.0;
        for (std::size_t q = 0; q < width; ++q) acc += u.entries[a * width + q] * v0[q];
        n_out = std::max(n_out, std::abs(acc));
        n_in = std::max(n_in, std::abs(v0[a]));
    }

    std::vector<double> xs, ys;
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
    const double slope = detail::fit_loglog_slope(xs, ys);

    const bool pass = identity_ok && row_err <= 1e-10 && min_entry >= -1e-12 &&
                      n_out <= n_in * (1.0 + 1e-10) && slope <= -0.8;
    record(9, "propagator", pass,
           fmt("row-sum err = %.1e, min entry = %.1e, decay slope = %.2f <= -0.8", row_err,
               min_entry, slope),
           timer.seconds());
}

// 10. Hoelder decay: fitted exponent > 0.05 across three sigma values,
//     median over 20 harvested kernels.
void criterion_holder() {
    Timer timer;
    auto cfg = validate_config(
        "kind = holder\nN = 300\nt = 0.05\nprofile = uniform\nell = 0.004\nG = 0.25\n"
        "q = 0.5\nK = 32\ndt = 0.02\nkernels = 20\nseed = 17\nout = acceptance_out/holder\n");
    const auto rep = run(cfg);
    record(10, "holder-decay", rep.pass,
           fmt("median fitted exponent = %.3f > 0.05",
               rep.metrics["median_exponent"].get<double>()),
           timer.seconds());
}

// 11. Determinism: identical (config, seed) reproduces the JSON report
//     byte-for-byte.
void criterion_determinism() {
    Timer timer;
    const std::string rigidity_cfg =
        "kind = rigidity\nN = 60\nt = 0.15\nprofile = uniform\nell = 0.017\nG = 0.3\n"
        "samples = 12\nseed = 21\ngrid_points = 512\nout = acceptance_out/det\n";
    const auto r1 = run(validate_config(rigidity_cfg));
    const auto r2 = run(validate_config(rigidity_cfg));
    const std::string freeconv_cfg =
        "kind = freeconv\nN = 64\nT = 1\nprofile = goe\ngrid_points = 257\neta_floor = 1e-3\n"
        "seed = 5\nout = acceptance_out/det\n";
    const auto f1 = run(validate_config(freeconv_cfg));
    const auto f2 = run(validate_config(freeconv_cfg));
    const bool pass = r1.to_string() == r2.to_string() && f1.to_string() == f2.to_string();
    record(11, "determinism", pass, "rigidity + freeconv reports byte-identical across reruns",
           timer.seconds());
}

} // namespace

int main() {
    std::printf("acceptance suite (threads: %d)\n",
#ifdef _OPENMP
                omp_get_max_threads()
#else
                1
#endif
    );
    criterion_semicircle();
    criterion_t0_identity();
    criterion_law_equivalence();
    {
        const auto setting = make_rigidity_setting();
        criterion_rigidity(setting);
        criterion_local_law(setting);
    }
    criterion_repulsion();
    criterion_gap_universality();
    criterion_coupling();
    criterion_propagator();
    criterion_holder();
    criterion_determinism();
    if (g_failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d criterion(s) FAILED\n", g_failures);
    return g_failures;
}
