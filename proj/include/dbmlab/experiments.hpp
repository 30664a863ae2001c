#pragma once

// Experiment runner: composes the freeconv / ensembles / dbm / stats modules
// into the named experiments, writes CSV artifacts and the JSON report, and
// optionally emits SVG plots derived from the same data.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dbmlab/config.hpp"
#include "dbmlab/csv.hpp"
#include "dbmlab/dbm.hpp"
#include "dbmlab/ensembles.hpp"
#include "dbmlab/parabolic.hpp"
#include "dbmlab/report.hpp"
#include "dbmlab/stats.hpp"
#include "dbmlab/svg.hpp"

namespace dbmlab {

namespace salts {
inline constexpr std::uint64_t deformed = 1;
inline constexpr std::uint64_t goe = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t v0 = 4;
inline constexpr std::uint64_t boot = 5;
inline constexpr std::uint64_t marginal = 6;
} // namespace salts

// Classical locations plus density/counting functions for one ensemble; the
// pure GOE case uses the semicircle closed forms instead of the grid solver.
struct SpectralLaw {
    std::vector<double> gamma;
    std::function<double(double)> density;
    std::function<double(double)> cdf;
    std::optional<FreeConvolution> fc;
};

inline double polylog_threshold(std::size_t n, double power) {
    return std::pow(std::log(static_cast<double>(n)), power);
}

inline double auto_eta_floor(const ExperimentConfig& cfg, const TimeParam& tp) {
    return cfg.eta_floor > 0.0 ? cfg.eta_floor : default_eta_floor(tp);
}

inline SpectralLaw make_law(const PotentialProfile& profile, const TimeParam& tp,
                            const ExperimentConfig& cfg) {
    SpectralLaw law;
    if (profile.id == "goe" && tp.s == 1.0) {
        law.gamma = classical_locations_sc(profile.size());
        law.density = [](double e) { return rho_sc(e); };
        law.cdf = [](double e) { return cdf_sc(e); };
        return law;
    }
    auto fc = solve_mfc_grid(profile, tp, support_grid(profile, tp, cfg.grid_points),
                             auto_eta_floor(cfg, tp));
    law.gamma = fc.classical_locations;
    law.fc = std::move(fc);
    const FreeConvolution* p = &*law.fc;
    law.density = [p](double e) { return p->density_at(e); };
    law.cdf = [p](double e) { return p->cdf_at(e); };
    return law;
}

inline std::vector<EnsembleSample> draw_samples(const PotentialProfile& profile,
                                                const TimeParam& tp, std::size_t count,
                                                std::uint64_t seed, std::uint64_t salt) {
    std::vector<EnsembleSample> out(count);
    std::string error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
        try {
            RngStream rng(seed, static_cast<std::uint64_t>(i), salt);
            out[static_cast<std::size_t>(i)] = sample_deformed(profile, tp, rng);
        } catch (const std::exception& e) {
#pragma omp critical
            error = e.what();
        }
    }
    if (!error.empty()) throw std::runtime_error("sampling failed: " + error);
    return out;
}

inline void write_spectra_csv(const std::string& path,
                              const std::vector<EnsembleSample>& samples) {
    CsvWriter csv(path, {"sample_index", "i", "lambda"});
    for (std::size_t s = 0; s < samples.size(); ++s)
        for (std::size_t i = 0; i < samples[s].eigenvalues.size(); ++i)
            csv.row({static_cast<double>(s), static_cast<double>(i), samples[s].eigenvalues[i]});
}

namespace detail {

inline double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (ys[i] <= 0.0 || xs[i] <= 0.0) continue;
        const double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++used;
    }
    if (used < 2) return 0.0;
    const double cnt = static_cast<double>(used);
    return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

// sup over |j|,|j'| <= 5 of |(x_j - x_j') - (y_j - y_j')| = spread of x - y.
inline double gap_difference_sup(const CoupledTrajectory& ct, std::size_t snap,
                                 std::ptrdiff_t half_window) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::ptrdiff_t j = -half_window; j <= half_window; ++j) {
        const double d = ct.micro_x(snap, j) - ct.micro_y(snap, j);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return hi - lo;
}

inline std::size_t quantile_index(const std::vector<double>& gamma, double energy) {
    const auto it = std::lower_bound(gamma.begin(), gamma.end(), energy);
    if (it == gamma.begin()) return 0;
    if (it == gamma.end()) return gamma.size() - 1;
    const auto hi = static_cast<std::size_t>(it - gamma.begin());
    return (energy - gamma[hi - 1] < gamma[hi] - energy) ? hi - 1 : hi;
}

} // namespace detail

// ---------------------------------------------------------------------------
// freeconv: density table, classical locations, regularity diagnostics
// ---------------------------------------------------------------------------

inline ExperimentReport run_freeconv(const ExperimentConfig& cfg) {
    const PotentialProfile profile = make_profile(cfg);
    const TimeParam tp = cfg.time_param();
    const double eta_floor = auto_eta_floor(cfg, tp);
    const auto fc =
        solve_mfc_grid(profile, tp, support_grid(profile, tp, cfg.grid_points), eta_floor);

    const std::string dir = ensure_out_dir(cfg.out_dir);
    {
        CsvWriter csv(dir + "/density.csv", {"E", "re_m", "im_m", "rho"});
        for (std::size_t k = 0; k < fc.grid.size(); ++k)
            csv.row({fc.grid[k], fc.m_values[k].real(), fc.m_values[k].imag(), fc.density[k]});
    }
    {
        CsvWriter csv(dir + "/locations.csv", {"i", "gamma"});
        for (std::size_t i = 0; i < fc.classical_locations.size(); ++i)
            csv.row({static_cast<double>(i), fc.classical_locations[i]});
    }

    bool herglotz = true;
    for (const auto& m : fc.m_values)
        if (!(m.imag() > 0.0)) herglotz = false;
    bool monotone = true;
    for (std::size_t i = 1; i < fc.classical_locations.size(); ++i)
        if (fc.classical_locations[i] < fc.classical_locations[i - 1]) monotone = false;

    double bulk_min = std::numeric_limits<double>::infinity(), bulk_max = 0.0;
    for (std::size_t k = 0; k < fc.grid.size(); ++k) {
        if (std::abs(fc.grid[k] - profile.center) >= cfg.q * profile.window) continue;
        bulk_min = std::min(bulk_min, fc.density[k]);
        bulk_max = std::max(bulk_max, fc.density[k]);
    }

    ExperimentReport rep;
    rep.config = config_to_json(cfg);
    rep.seed = cfg.seed;
    rep.metrics["eta_floor"] = eta_floor;
    rep.metrics["normalization"] = fc.total_mass;
    rep.metrics["rho_at_E0"] = fc.density_at(profile.center);
    rep.metrics["bulk_density_min"] = std::isfinite(bulk_min) ? bulk_min : 0.0;
    rep.metrics["bulk_density_max"] = bulk_max;
    rep.metrics["herglotz_ok"] = herglotz;
    rep.metrics["locations_monotone"] = monotone;
    if (profile.id != "goe") {
        const auto reg = check_regularity(profile, cfg.q);
        rep.metrics["regularity"] = {{"c_V", reg.c_v}, {"C_V", reg.big_c_v}, {"pass", reg.pass}};
    }
    rep.pass = herglotz && monotone && fc.total_mass >= 0.99 && fc.total_mass <= 1.01;

    if (cfg.plots) {
        SvgPlot plot("deformed density", "E", "rho");
        plot.add_series("rho_fc", fc.grid, fc.density);
        plot.write(dir + "/density.svg");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// locallaw: sup of N eta |m_N - m_fc| over the spectral grid and samples
// ---------------------------------------------------------------------------

inline ExperimentReport run_locallaw(const ExperimentConfig& cfg) {
    const PotentialProfile profile = make_profile(cfg);
    const TimeParam tp = cfg.time_param();
    const auto samples = draw_samples(profile, tp, cfg.samples, cfg.seed, salts::deformed);

    std::vector<double> energies(cfg.energy_count);
    const double half = cfg.q * profile.window;
    for (std::size_t i = 0; i < cfg.energy_count; ++i)
        energies[i] = profile.center - half +
                      2.0 * half * (static_cast<double>(i) + 0.5) /
                          static_cast<double>(cfg.energy_count);
    std::vector<double> etas(cfg.eta_count);
    const double eta_lo = 10.0 / static_cast<double>(cfg.n);
    for (std::size_t i = 0; i < cfg.eta_count; ++i)
        etas[i] = eta_lo * std::pow(1.0 / eta_lo, static_cast<double>(i) /
                                                      static_cast<double>(cfg.eta_count - 1));

    const double threshold = polylog_threshold(cfg.n, cfg.polylog_power);
    const auto rep_ll =
        local_law_check(profile, tp, samples, energies, etas, threshold, -1.0, cfg.slope_tol);

    const std::string dir = ensure_out_dir(cfg.out_dir);
    {
        CsvWriter csv(dir + "/locallaw.csv", {"E", "eta", "median_abs_dm", "max_scaled"});
        for (const auto& row : rep_ll.table)
            csv.row({row.energy, row.eta, row.median_abs_dm, row.max_scaled});
    }
    if (cfg.export_spectra) write_spectra_csv(dir + "/spectra.csv", samples);

    ExperimentReport rep;
    rep.config = config_to_json(cfg);
    rep.seed = cfg.seed;
    rep.metrics["sup_scaled_error"] = rep_ll.sup_scaled_error;
    rep.metrics["threshold"] = threshold;
    rep.metrics["slope"] = rep_ll.slope;
    rep.metrics["slope_tol"] = cfg.slope_tol;
    rep.metrics["pass_sup"] = rep_ll.pass_sup;
    rep.metrics["pass_slope"] = rep_ll.pass_slope;
    rep.pass = rep_ll.pass_sup && rep_ll.pass_slope;

    if (cfg.plots) {
        SvgPlot plot("local law error decay", "eta", "median |m_N - m_fc|", true, true);
        for (std::size_t e = 0; e < energies.size() && e < 3; ++e) {
            std::vector<double> xs, ys;
            for (const auto& row : rep_ll.table)
                if (row.energy == energies[e]) {
                    xs.push_back(row.eta);
                    ys.push_back(row.median_abs_dm);
                }
            plot.add_series("E=" + format_double(energies[e]).substr(0, 6), xs, ys);
        }
        plot.write(dir + "/locallaw.svg");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// rigidity: N |lambda_i - gamma_i| over the bulk, plus the counting error
// ---------------------------------------------------------------------------

inline ExperimentReport run_rigidity(const ExperimentConfig& cfg) {
    const PotentialProfile profile = make_profile(cfg);
    const TimeParam tp = cfg.time_param();
    const SpectralLaw law = make_law(profile, tp, cfg);
    const auto bulk = bulk_index_set(law.gamma, profile.center, profile.window, cfg.q);
    if (bulk.empty()) throw IndexOutOfBulk("rigidity: empty bulk index set");

    const auto samples = draw_samples(profile, tp, cfg.samples, cfg.seed, salts::deformed);
    const double threshold = polylog_threshold(cfg.n, cfg.polylog_power);
    const auto rig = rigidity_check(samples, law.gamma, bulk, threshold);
    const auto cnt = counting_error(samples, law.cdf, profile.center - cfg.q * profile.window,
                                    profile.center + cfg.q * profile.window, threshold);

    const std::string dir = ensure_out_dir(cfg.out_dir);
    {
        CsvWriter csv(dir + "/rigidity.csv",
                      {"sample_index", "max_scaled_rigidity", "sup_scaled_counting"});
        for (std::size_t i = 0; i < rig.per_sample.size(); ++i)
            csv.row({static_cast<double>(i), rig.per_sample[i], cnt.per_sample[i]});
    }
    if (cfg.export_spectra) write_spectra_csv(dir + "/spectra.csv", samples);

    ExperimentReport rep;
    rep.config = config_to_json(cfg);
    rep.seed = cfg.seed;
    rep.metrics["threshold"] = threshold;
    rep.metrics["bulk_first"] = bulk.first;
    rep.metrics["bulk_count"] = bulk.count;
    rep.metrics["rigidity"] = {{"median", rig.median}, {"q25", rig.q25},   {"q75", rig.q75},
                               {"max", rig.max},       {"pass", rig.pass}};
    rep.metrics["counting"] = {{"median", cnt.median}, {"q25", cnt.q25},   {"q75", cnt.q75},
                               {"max", cnt.max},       {"pass", cnt.pass}};
    rep.pass = rig.pass && cnt.pass;

    if (cfg.plots) {
        std::vector<double> xs(rig.per_sample.size());
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
        SvgPlot plot("rigidity scaled errors", "sample", "N * max |lambda - gamma|");
        plot.add_series("per sample", xs, rig.per_sample);
        plot.write(dir + "/rigidity.svg");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// repulsion: small-gap tail exponent and the k = 2 interval observable
// ---------------------------------------------------------------------------

inline ExperimentReport run_repulsion(const ExperimentConfig& cfg) {
    const PotentialProfile profile = make_profile(cfg);
    const TimeParam tp = cfg.time_param();
    const SpectralLaw law = make_law(profile, tp, cfg);
    const auto bulk = bulk_index_set(law.gamma, profile.center, profile.window, cfg.q);
    if (bulk.empty() || bulk.count < 2) throw IndexOutOfBulk("repulsion: bulk set too small");

    const auto samples = draw_samples(profile, tp, cfg.samples, cfg.seed, salts::deformed);
    std::vector<double> eps_grid(cfg.eps_count);
    for (std::size_t i = 0; i < cfg.eps_count; ++i)
        eps_grid[i] = cfg.eps_min * std::pow(cfg.eps_max / cfg.eps_min,
                                             static_cast<double>(i) /
                                                 static_cast<double>(cfg.eps_count - 1));
    const double e_center = law.gamma[bulk.first + bulk.count / 2];
    const auto fit = level_repulsion_fit(samples, bulk, eps_grid, e_center, cfg.exponent_lo,
                                         cfg.exponent_hi);

    const std::string dir = ensure_out_dir(cfg.out_dir);
    {
        CsvWriter csv(dir + "/repulsion.csv", {"eps", "gap_cdf", "k2_prob"});
        for (std::size_t i = 0; i < eps_grid.size(); ++i)
            csv.row({eps_grid[i], fit.gap_cdf[i], fit.k2_prob[i]});
    }
    if (cfg.export_spectra) write_spectra_csv(dir + "/spectra.csv", samples);

    ExperimentReport rep;
    rep.config = config_to_json(cfg);
    rep.seed = cfg.seed;
    rep.metrics["exponent"] = fit.fitted_exponent;
    rep.metrics["exponent_window"] = {cfg.exponent_lo, cfg.exponent_hi};
    rep.metrics["observations"] = fit.observations;
    rep.metrics["e_center"] = e_center;
    rep.pass = fit.pass;

    if (cfg.plots) {
        SvgPlot plot("level repulsion", "eps", "P[N gap <= eps]", true, true);
        plot.add_series("gap cdf", eps_grid, fit.gap_cdf);
        plot.add_series("k2 observable", eps_grid, fit.k2_prob);
        plot.write(dir + "/repulsion.svg");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// couple: coupled DBM pair, gap-difference contraction, propagator and
// cutoff diagnostics on the first path
// ---------------------------------------------------------------------------

inline ExperimentReport run_couple(const ExperimentConfig& cfg) {
    if (!cfg.t) throw ConfigInvalid("t", "couple experiment needs the DBM time t (= t0)");
    const PotentialProfile profile = make_profile(cfg);
    const TimeParam tp0 = cfg.time_param();
    const double eta_floor = auto_eta_floor(cfg, tp0);
    const auto fc =
        solve_mfc_grid(profile, tp0, support_grid(profile, tp0, cfg.grid_points), eta_floor);

    const std::size_t n = cfg.n;
    const std::size_t k0 = detail::quantile_index(fc.classical_locations, profile.center);
    const std::size_t j0 = n / 2;
    const auto mp = matching_params(fc, profile, cfg.q, k0, j0);
    const std::vector<double> mu = classical_locations_sc(n);

    const double kd = static_cast<double>(cfg.window_k);
    const double tau1 = std::pow(kd, 0.2);          // N^{omega'/10} with K = N^{omega'/2}
    const double tau_lo = tau1 - std::pow(kd, 1.0 / 15.0);
    const double t_end = tau1 / static_cast<double>(n);
    const double dt_macro = cfg.dt_micro / static_cast<double>(n);
    const double eps_micro = cfg.epsilon * static_cast<double>(n);

    std::vector<double> s_initial(cfg.paths), s_window(cfg.paths);
    CoupledTrajectory first_path;
    std::string error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(cfg.paths); ++p) {
        try {
            const auto up = static_cast<std::uint64_t>(p);
            RngStream rng_h(cfg.seed, up, salts::deformed);
            RngStream rng_w(cfg.seed, up, salts::goe);
            RngStream rng_b(cfg.seed, up, salts::noise);
            const auto x0 = sample_deformed(profile, tp0, rng_h).eigenvalues;
            auto y0 = eigenvalues_symmetric(sample_goe(n, rng_w));
            for (double& v : y0) v = mp.a * v + mp.b;
            auto ct = integrate_coupled(x0, y0, k0, j0, t_end, dt_macro, rng_b, {}, *cfg.t);

            s_initial[up] = detail::gap_difference_sup(ct, 0, 5);
            std::vector<double> sw;
            for (std::size_t m = 0; m < ct.n_times(); ++m) {
                const double tau = ct.micro_time(m);
                if (tau >= tau_lo && tau <= tau1 + 1e-9) {
                    sw.push_back(detail::gap_difference_sup(ct, m, 5));
                }
            }
            s_window[up] = sw.empty() ? detail::gap_difference_sup(ct, ct.n_times() - 1, 5)
                                      : median_of(sw);
            if (p == 0) {
#pragma omp critical
                first_path = std::move(ct);
            }
        } catch (const std::exception& e) {
#pragma omp critical
            error = e.what();
        }
    }
    if (!error.empty()) throw std::runtime_error("coupled integration failed: " + error);

    const double s0_med = median_of(s_initial);
    const double s1_med = median_of(s_window);
    const double ratio = s0_med / std::max(s1_med, 1e-300);
    const bool pass_contraction = ratio >= cfg.contraction_factor;

    // Kernel-level diagnostics on the first path.
    const ParabolicKernel kernel(first_path, cfg.window_k, eps_micro);
    const double tau_prop = std::min(std::pow(kd, 0.1), kernel.time_end());
    const auto prop = propagator(kernel, 0.0, tau_prop);
    double row_err = 0.0;
    const auto kk = static_cast<std::ptrdiff_t>(cfg.window_k);
    for (std::ptrdiff_t a = -kk; a <= kk; ++a)
        row_err = std::max(row_err, std::abs(prop.row_sum(a) - 1.0));
    const double min_entry = prop.min_entry();

    RngStream rng_v(cfg.seed, 0, salts::v0);
    std::vector<double> vtest(2 * cfg.window_k + 1);
    for (double& v : vtest) v = (rng_v.uniform() < 0.5) ? -1.0 : 1.0;
    double vin = 0.0, vout = 0.0;
    {
        std::vector<double> w(vtest.size(), 0.0);
        const std::size_t width = vtest.size();
        for (std::size_t a = 0; a < width; ++a) {
            double acc = 0.0;
            for (std::size_t pq = 0; pq < width; ++pq)
                acc += prop.entries[a * width + pq] * vtest[pq];
            w[a] = acc;
        }
        for (std::size_t a = 0; a < width; ++a) {
            vin = std::max(vin, std::abs(vtest[a]));
            vout = std::max(vout, std::abs(w[a]));
        }
    }

    std::vector<double> env_d, env_v;
    for (std::ptrdiff_t d = 1; d <= 2 * kk; ++d) {
        double env = 0.0;
        for (std::ptrdiff_t a = -kk; a <= kk; ++a) {
            const std::ptrdiff_t p = a + d;
            if (p > kk) break;
            env = std::max(env, std::abs(prop(a, p)));
            env = std::max(env, std::abs(prop(p, a)));
        }
        if (env > 1e-14) {
            env_d.push_back(static_cast<double>(d + 1));
            env_v.push_back(env);
        }
    }
    const double decay_exponent = detail::fit_loglog_slope(env_d, env_v);
    const bool pass_prop = row_err <= 1e-10 && min_entry >= -1e-12 &&
                           vout <= vin * (1.0 + 1e-10) &&
                           decay_exponent <= cfg.decay_exponent_max;

    const auto sres = integrate_shortrange(first_path, cfg.window_k, eps_micro);
    const auto duh = duhamel_residual(first_path, cfg.window_k, eps_micro);
    const auto reg = integrate_regularized(first_path.x, cfg.epsilon);

    const std::string dir = ensure_out_dir(cfg.out_dir);
    {
        CsvWriter csv(dir + "/trajectory.csv", {"time", "j", "x", "y"});
        for (std::size_t m = 0; m < first_path.n_times(); ++m)
            for (std::ptrdiff_t j = -kk; j <= kk; ++j)
                csv.row({first_path.micro_time(m), static_cast<double>(j),
                         first_path.micro_x(m, j), first_path.micro_y(m, j)});
    }
    {
        CsvWriter csv(dir + "/contraction.csv", {"path", "sup_initial", "sup_window"});
        for (std::size_t p = 0; p < cfg.paths; ++p)
            csv.row({static_cast<double>(p), s_initial[p], s_window[p]});
    }
    {
        const std::size_t width = 2 * cfg.window_k + 1;
        std::vector<std::string> header(width);
        for (std::size_t i = 0; i < width; ++i)
            header[i] = "p" + std::to_string(static_cast<std::ptrdiff_t>(i) - kk);
        CsvWriter csv(dir + "/propagator.csv", header);
        for (std::size_t a = 0; a < width; ++a) {
            std::vector<double> row(width);
            for (std::size_t pq = 0; pq < width; ++pq) row[pq] = prop.entries[a * width + pq];
            csv.row(row);
        }
    }

    ExperimentReport rep;
    rep.config = config_to_json(cfg);
    rep.seed = cfg.seed;
    rep.metrics["matching"] = {{"a", mp.a}, {"b", mp.b}, {"k0", k0}, {"j0", j0},
                               {"sweep_max", mp.sweep_max}};
    rep.metrics["window"] = {{"tau_lo", tau_lo}, {"tau_hi", tau1}};
    rep.metrics["contraction"] = {{"sup_initial_median", s0_med},
                                  {"sup_window_median", s1_med},
                                  {"ratio", ratio},
                                  {"required", cfg.contraction_factor},
                                  {"pass", pass_contraction}};
    rep.metrics["propagator"] = {{"row_sum_error", row_err},
                                 {"min_entry", min_entry},
                                 {"linf_ratio", vout / std::max(vin, 1e-300)},
                                 {"decay_exponent", decay_exponent},
                                 {"tau", tau_prop},
                                 {"pass", pass_prop}};
    rep.metrics["shortrange"] = {{"weighted_observable", sres.weighted_observable},
                                 {"central_gap_error", sres.central_gap_error},
                                 {"edge_gap_error", sres.edge_gap_error}};
    rep.metrics["duhamel"] = {{"residual_sup", duh.residual_sup},
                              {"residual_central", duh.residual_central},
                              {"xi_sup", duh.xi_sup},
                              {"u0_norm", duh.u0_norm}};
    rep.metrics["regularized_sup_deviation"] = reg.sup_abs_deviation;
    bool pass_marginal = true;

    if (cfg.marginal_check) {
        // Final-slice gap law of the SDE vs direct H_t sampling.
        const double dt = 0.01 * *cfg.t;
        const auto bulk = bulk_index_set(fc.classical_locations, profile.center, profile.window,
                                         cfg.q);
        std::vector<std::vector<double>> sde_gaps(cfg.paths), direct_gaps(cfg.paths);
        std::string err2;
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(cfg.paths); ++p) {
            try {
                const auto up = static_cast<std::uint64_t>(p);
                RngStream rng_sde(cfg.seed, up, salts::marginal);
                const auto traj = integrate_dbm(profile.entries, *cfg.t, dt, rng_sde);
                RngStream rng_dir(cfg.seed, up, salts::marginal + 100);
                const auto direct = sample_deformed(profile, tp0, rng_dir);
                const double nd = static_cast<double>(n);
                for (std::size_t i = bulk.first; i + 1 <= bulk.last(); ++i) {
                    sde_gaps[up].push_back(nd * (traj.final_state()[i + 1] -
                                                 traj.final_state()[i]));
                    direct_gaps[up].push_back(nd * (direct.eigenvalues[i + 1] -
                                                    direct.eigenvalues[i]));
                }
            } catch (const std::exception& e) {
#pragma omp critical
                err2 = e.what();
            }
        }
        if (!err2.empty()) throw std::runtime_error("marginal check failed: " + err2);
        std::vector<double> all_sde, all_direct;
        for (std::size_t p = 0; p < cfg.paths; ++p) {
            all_sde.insert(all_sde.end(), sde_gaps[p].begin(), sde_gaps[p].end());
            all_direct.insert(all_direct.end(), direct_gaps[p].begin(), direct_gaps[p].end());
        }
        const double ks = ks_distance(all_sde, all_direct);
        pass_marginal = ks <= cfg.marginal_ks_threshold;
        rep.metrics["marginal"] = {{"ks", ks},
                                   {"threshold", cfg.marginal_ks_threshold},
                                   {"gaps_per_side", all_sde.size()},
                                   {"pass", pass_marginal}};
    }

    rep.pass = pass_contraction && pass_prop && pass_marginal;

    if (cfg.plots) {
        SvgPlot plot("propagator decay", "|p - a| + 1", "envelope |U_ap|", true, true);
        plot.add_series("envelope", env_d, env_v);
        plot.write(dir + "/propagator.svg");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// gapstats: rescaled central gaps, deformed vs GOE
// ---------------------------------------------------------------------------

inline ExperimentReport run_gapstats(const ExperimentConfig& cfg) {
    const PotentialProfile profile = make_profile(cfg);
    const TimeParam tp = cfg.time_param();
    const double eta_floor = auto_eta_floor(cfg, tp);
    const auto fc =
        solve_mfc_grid(profile, tp, support_grid(profile, tp, cfg.grid_points), eta_floor);

    const std::size_t n = cfg.n;
    const std::size_t k0 = detail::quantile_index(fc.classical_locations, profile.center);
    const std::size_t j0 = n / 2;
    const auto bulk = bulk_index_set(fc, profile, cfg.q);
    if (!bulk.contains(k0)) throw IndexOutOfBulk("gapstats: k0 not in the bulk set");
    const std::vector<double> mu = classical_locations_sc(n);
    const double rho_def = fc.density_at(fc.classical_locations[k0]);
    const double rho_goe = rho_sc(mu[j0]);

    const auto deformed = draw_samples(profile, tp, cfg.samples, cfg.seed, salts::deformed);
    const auto goe_profile = presets::goe(n);
    const auto goe = draw_samples(goe_profile, TimeParam::from_T(1.0), cfg.samples, cfg.seed,
                                  salts::goe);

    RngStream rng_boot(cfg.seed, 0, salts::boot);
    const auto gap_rep = gap_universality_distance(deformed, goe, k0, j0, rho_def, rho_goe,
                                                   cfg.ks_threshold, rng_boot);

    // Same-law control: first half of the GOE draws vs second half.
    std::vector<double> ga, gb;
    for (std::size_t i = 0; i < goe.size(); ++i) {
        const double g = static_cast<double>(n) * rho_goe *
                         (goe[i].eigenvalues[j0 + 1] - goe[i].eigenvalues[j0]);
        (i < goe.size() / 2 ? ga : gb).push_back(g);
    }
    const double ks_null_split = ks_distance(ga, gb);

    const std::string dir = ensure_out_dir(cfg.out_dir);
    {
        CsvWriter csv(dir + "/gaps.csv", {"ensemble", "sample_index", "rescaled_gap"});
        for (std::size_t i = 0; i < deformed.size(); ++i)
            csv.row({0.0, static_cast<double>(i),
                     static_cast<double>(n) * rho_def *
                         (deformed[i].eigenvalues[k0 + 1] - deformed[i].eigenvalues[k0])});
        for (std::size_t i = 0; i < goe.size(); ++i)
            csv.row({1.0, static_cast<double>(i),
                     static_cast<double>(n) * rho_goe *
                         (goe[i].eigenvalues[j0 + 1] - goe[i].eigenvalues[j0])});
    }

    ExperimentReport rep;
    rep.config = config_to_json(cfg);
    rep.seed = cfg.seed;
    rep.metrics["k0"] = k0;
    rep.metrics["j0"] = j0;
    rep.metrics["rho_fc_at_gamma_k0"] = rho_def;
    rep.metrics["rho_sc_at_mu_j0"] = rho_goe;
    rep.metrics["ks"] = gap_rep.ks;
    rep.metrics["ks_threshold"] = cfg.ks_threshold;
    rep.metrics["null_band"] = {{"median", gap_rep.null_band.median},
                                {"q95", gap_rep.null_band.q95}};
    rep.metrics["ks_same_law_split"] = ks_null_split;
    rep.metrics["pass_gap"] = gap_rep.pass;
    bool pass = gap_rep.pass;

    if (cfg.correlation) {
        RngStream rng_corr(cfg.seed, 1, salts::boot);
        const auto corr = averaged_correlation_compare(
            deformed, goe, profile.center, fc.density_at(profile.center), 0.0, rho_sc(0.0),
            cfg.corr_b, 1, profile.center - cfg.q * profile.window,
            profile.center + cfg.q * profile.window, rng_corr);
        rep.metrics["correlation"] = {{"difference", corr.difference},
                                      {"bootstrap_sigma", corr.bootstrap_sigma},
                                      {"deformed_value", corr.deformed_value},
                                      {"goe_value", corr.goe_value},
                                      {"pass", corr.pass}};
        pass = pass && corr.pass;
    }
    rep.pass = pass;

    if (cfg.plots) {
        std::vector<double> dg, gg;
        for (std::size_t i = 0; i < deformed.size(); ++i)
            dg.push_back(static_cast<double>(n) * rho_def *
                         (deformed[i].eigenvalues[k0 + 1] - deformed[i].eigenvalues[k0]));
        for (std::size_t i = 0; i < goe.size(); ++i)
            gg.push_back(static_cast<double>(n) * rho_goe *
                         (goe[i].eigenvalues[j0 + 1] - goe[i].eigenvalues[j0]));
        std::sort(dg.begin(), dg.end());
        std::sort(gg.begin(), gg.end());
        std::vector<double> pd(dg.size()), pg(gg.size());
        for (std::size_t i = 0; i < dg.size(); ++i)
            pd[i] = static_cast<double>(i + 1) / static_cast<double>(dg.size());
        for (std::size_t i = 0; i < gg.size(); ++i)
            pg[i] = static_cast<double>(i + 1) / static_cast<double>(gg.size());
        SvgPlot plot("rescaled central gap CDF", "gap", "P");
        plot.add_series("deformed", dg, pd);
        plot.add_series("goe", gg, pg);
        plot.write(dir + "/gaps.svg");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// holder: decay exponent of the parabolic flow on harvested kernels
// ---------------------------------------------------------------------------

inline ExperimentReport run_holder(const ExperimentConfig& cfg) {
    if (!cfg.t) throw ConfigInvalid("t", "holder experiment needs the DBM time t (= t0)");
    const PotentialProfile profile = make_profile(cfg);
    const TimeParam tp0 = cfg.time_param();
    const double eta_floor = auto_eta_floor(cfg, tp0);
    const auto fc =
        solve_mfc_grid(profile, tp0, support_grid(profile, tp0, cfg.grid_points), eta_floor);

    const std::size_t n = cfg.n;
    const std::size_t k0 = detail::quantile_index(fc.classical_locations, profile.center);
    const std::size_t j0 = n / 2;
    const auto mp = matching_params(fc, profile, cfg.q, k0, j0);

    const double kd = static_cast<double>(cfg.window_k);
    const std::vector<double> sigmas = {std::pow(kd, 0.3), std::pow(kd, 0.5), std::pow(kd, 0.7)};
    const double tau_end = sigmas.back() * 1.02;
    const double dt_macro = cfg.dt_micro / static_cast<double>(n);
    const double eps_micro = cfg.epsilon * static_cast<double>(n);

    std::vector<double> exponents(cfg.kernels);
    std::vector<std::vector<double>> ratios(cfg.kernels);
    std::string error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(cfg.kernels); ++k) {
        try {
            const auto uk = static_cast<std::uint64_t>(k);
            RngStream rng_h(cfg.seed, uk, salts::deformed);
            RngStream rng_w(cfg.seed, uk, salts::goe);
            RngStream rng_b(cfg.seed, uk, salts::noise);
            RngStream rng_v(cfg.seed, uk, salts::v0);
            const auto x0 = sample_deformed(profile, tp0, rng_h).eigenvalues;
            auto y0 = eigenvalues_symmetric(sample_goe(n, rng_w));
            for (double& v : y0) v = mp.a * v + mp.b;
            const auto ct = integrate_coupled(x0, y0, k0, j0,
                                              tau_end / static_cast<double>(n), dt_macro, rng_b,
                                              {}, *cfg.t);
            const ParabolicKernel kernel(ct, cfg.window_k, eps_micro);
            std::vector<double> v0(2 * cfg.window_k + 1);
            for (double& v : v0) v = (rng_v.uniform() < 0.5) ? -1.0 : 1.0;
            const auto hr = holder_check(kernel, v0, sigmas, 0.1, cfg.holder_min_exponent);
            exponents[uk] = hr.fitted_exponent;
            ratios[uk] = hr.ratios;
        } catch (const std::exception& e) {
#pragma omp critical
            error = e.what();
        }
    }
    if (!error.empty()) throw std::runtime_error("holder experiment failed: " + error);

    const double median_exp = median_of(exponents);
    const std::string dir = ensure_out_dir(cfg.out_dir);
    {
        CsvWriter csv(dir + "/holder.csv", {"kernel", "sigma", "ratio", "fitted_exponent"});
        for (std::size_t k = 0; k < cfg.kernels; ++k)
            for (std::size_t si = 0; si < sigmas.size(); ++si)
                csv.row({static_cast<double>(k), sigmas[si], ratios[k][si], exponents[k]});
    }

    ExperimentReport rep;
    rep.config = config_to_json(cfg);
    rep.seed = cfg.seed;
    rep.metrics["sigmas"] = sigmas;
    rep.metrics["median_exponent"] = median_exp;
    rep.metrics["min_exponent_required"] = cfg.holder_min_exponent;
    rep.metrics["matching_sweep_max"] = mp.sweep_max;
    rep.pass = median_exp > cfg.holder_min_exponent;

    if (cfg.plots) {
        SvgPlot plot("parabolic flatness decay", "sigma", "oscillation ratio", true, true);
        std::vector<double> med(sigmas.size());
        for (std::size_t si = 0; si < sigmas.size(); ++si) {
            std::vector<double> col(cfg.kernels);
            for (std::size_t k = 0; k < cfg.kernels; ++k) col[k] = ratios[k][si];
            med[si] = median_of(col);
        }
        plot.add_series("median ratio", sigmas, med);
        plot.write(dir + "/holder.svg");
    }
    return rep;
}

inline ExperimentReport run(const ExperimentConfig& cfg) {
    try {
        if (cfg.kind == "freeconv") return run_freeconv(cfg);
        if (cfg.kind == "locallaw") return run_locallaw(cfg);
        if (cfg.kind == "rigidity") return run_rigidity(cfg);
        if (cfg.kind == "repulsion") return run_repulsion(cfg);
        if (cfg.kind == "couple") return run_couple(cfg);
        if (cfg.kind == "gapstats") return run_gapstats(cfg);
        if (cfg.kind == "holder") return run_holder(cfg);
    } catch (const ConfigInvalid&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error("experiment '" + cfg.kind + "': " + e.what());
    }
    throw ConfigInvalid("kind", "unknown experiment kind '" + cfg.kind + "'");
}

} // namespace dbmlab
