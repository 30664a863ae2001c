#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "dbmlab/experiments.hpp"
#include "dbmlab/stats.hpp"

using namespace dbmlab;

TEST_CASE("KS distance basics") {
    REQUIRE(ks_distance({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    REQUIRE(ks_distance({0.0, 0.1}, {5.0, 6.0}) == 1.0);
    // {0,1} vs {0.5}: F1 jumps to 1/2 before F2 does
    REQUIRE(ks_distance({0.0, 1.0}, {0.5}) == Catch::Approx(0.5));
    REQUIRE_THROWS_AS(ks_distance({}, {1.0}), InsufficientSamples);
}

TEST_CASE("permutation null band shrinks roughly like n^{-1/2}") {
    RngStream gen(30, 0);
    auto draw = [&](std::size_t n) {
        std::vector<double> v(n);
        for (double& x : v) x = gen.gaussian();
        return v;
    };
    RngStream boot(30, 1);
    const auto small_a = draw(150), small_b = draw(150);
    const auto big_a = draw(600), big_b = draw(600);
    const auto band_small = ks_null_band(small_a, small_b, 200, boot);
    const auto band_big = ks_null_band(big_a, big_b, 200, boot);
    REQUIRE(band_small.q95 / band_big.q95 > 1.4); // ideal factor 2
    REQUIRE(band_small.q95 / band_big.q95 < 2.9);
}

TEST_CASE("bulk index sets from the semicircle match the closed form") {
    const auto mu = classical_locations_sc(100);
    const auto bulk = bulk_index_set(mu, 0.0, 0.5, 0.5);
    REQUIRE_FALSE(bulk.empty());
    for (std::size_t i = 0; i < 100; ++i) {
        const bool inside = std::abs(mu[i]) < 0.25;
        REQUIRE(bulk.contains(i) == inside);
    }
    // q-monotonicity
    const auto wide = bulk_index_set(mu, 0.0, 0.5, 0.9);
    for (std::size_t i = bulk.first; i <= bulk.last(); ++i) REQUIRE(wide.contains(i));
    REQUIRE_THROWS_AS(bulk_index_set(mu, 0.0, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("bulk index sets nest across nearby times") {
    const auto p = presets::two_atom(200, 0.005, 0.25, 1.0);
    std::vector<BulkIndexSet> narrow, wide;
    for (double t : {0.05, 0.08}) {
        const auto tp = TimeParam::from_t(t);
        const auto fc = solve_mfc_grid(p, tp, support_grid(p, tp, 1500), default_eta_floor(tp));
        narrow.push_back(bulk_index_set(fc, p, 0.4));
        wide.push_back(bulk_index_set(fc, p, 0.6));
    }
    for (const auto& a : narrow)
        for (const auto& b : wide)
            for (std::size_t i = a.first; i <= a.last(); ++i) REQUIRE(b.contains(i));
}

TEST_CASE("counting error on classical locations is exactly one") {
    // lambda_i = gamma_i gives n_t(gamma_i) = (i+1)/N against F(gamma_i) =
    // (i+1)/N, so the sup over jump sides is exactly 1/N, scaled to 1.
    const std::size_t n = 50;
    const auto mu = classical_locations_sc(n);
    EnsembleSample s;
    s.eigenvalues = mu;
    const auto rep = counting_error({s}, [](double e) { return cdf_sc(e); }, -1.0, 1.0, 10.0);
    REQUIRE(rep.median == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(rep.pass);
}

TEST_CASE("rigidity report is permutation invariant and quantile-ordered") {
    const auto p = presets::uniform(60, 0.017, 0.3);
    const auto tp = TimeParam::from_t(0.3);
    auto samples = draw_samples(p, tp, 40, 99, 1);
    const auto fc = solve_mfc_grid(p, tp, support_grid(p, tp, 1024), default_eta_floor(tp));
    const auto bulk = bulk_index_set(fc, p, 0.5);
    const auto a = rigidity_check(samples, fc.classical_locations, bulk, 1e9);
    std::reverse(samples.begin(), samples.end());
    const auto b = rigidity_check(samples, fc.classical_locations, bulk, 1e9);
    REQUIRE(a.median == b.median);
    REQUIRE(a.max == b.max);
    REQUIRE(a.q25 <= a.median);
    REQUIRE(a.median <= a.q75);
    REQUIRE(a.q75 <= a.max);
}

TEST_CASE("repulsion estimator recovers a synthetic quadratic tail") {
    // gaps drawn with P[g <= x] = (x / 4)^2 on [0, 4]: exponent exactly 2
    RngStream rng(31, 0);
    std::vector<EnsembleSample> samples(500);
    for (auto& s : samples) {
        // build a fake ordered spectrum whose bulk gaps are iid sqrt-uniform
        s.eigenvalues.resize(21);
        double x = 0.0;
        s.eigenvalues[0] = 0.0;
        for (std::size_t i = 1; i < 21; ++i) {
            x += 4.0 * std::sqrt(rng.uniform()) / 20.0; // N gap = 4 sqrt(U)
            s.eigenvalues[i] = x;
        }
    }
    BulkIndexSet bulk;
    bulk.q = 0.5;
    bulk.first = 0;
    bulk.count = 21;
    std::vector<double> eps = {0.1, 0.17, 0.3, 0.55, 1.0};
    const auto rep = level_repulsion_fit(samples, bulk, eps, 2.0, 1.7, 2.3, 1000);
    REQUIRE(rep.fitted_exponent == Catch::Approx(2.0).margin(0.15));
    for (std::size_t i = 1; i < rep.gap_cdf.size(); ++i)
        REQUIRE(rep.gap_cdf[i] >= rep.gap_cdf[i - 1]);

    REQUIRE_THROWS_AS(level_repulsion_fit(samples, bulk, eps, 2.0, 1.7, 2.3, 100000),
                      InsufficientSamples);
}

TEST_CASE("k = 2 interval observable is dominated by the doubled-gap tail") {
    // P[ N_{I_eps}(lambda_center) >= 2 ] <= P[ nearest gap <= 2 eps / N ]
    const auto p = presets::goe(60);
    const auto tp = TimeParam::from_T(1.0);
    const auto samples = draw_samples(p, tp, 400, 17, 1);
    const std::size_t mid = 30;
    for (double eps : {0.2, 0.5, 1.0, 2.0}) {
        std::size_t hits_k2 = 0, hits_gap = 0;
        for (const auto& s : samples) {
            const double n = 60.0;
            const double center = s.eigenvalues[mid];
            std::size_t cnt = 0;
            for (double l : s.eigenvalues)
                if (l >= center - eps / n && l <= center + eps / n) ++cnt;
            if (cnt >= 2) ++hits_k2;
            const double gap = std::min(s.eigenvalues[mid + 1] - center,
                                        center - s.eigenvalues[mid - 1]);
            if (gap <= 2.0 * eps / n) ++hits_gap;
        }
        REQUIRE(hits_k2 <= hits_gap);
    }
}

TEST_CASE("gap universality distance: same-law halves stay inside the band") {
    const auto p = presets::goe(100);
    const auto tp = TimeParam::from_T(1.0);
    const auto all = draw_samples(p, tp, 400, 55, 2);
    std::vector<EnsembleSample> first(all.begin(), all.begin() + 200);
    std::vector<EnsembleSample> second(all.begin() + 200, all.end());
    RngStream boot(55, 0, 5);
    const auto mu = classical_locations_sc(100);
    const auto rep = gap_universality_distance(first, second, 50, 50, rho_sc(mu[50]),
                                               rho_sc(mu[50]), 0.15, boot);
    REQUIRE(rep.ks <= 0.15);
    REQUIRE(rep.pass);
    REQUIRE(rep.null_band.q95 > 0.0);
    REQUIRE(rep.null_band.q95 < 1.0);

    REQUIRE_THROWS_AS(gap_universality_distance(first, second, 99, 50, 0.3, 0.3, 0.15, boot),
                      IndexOutOfBulk);
    std::vector<EnsembleSample> tiny(all.begin(), all.begin() + 10);
    REQUIRE_THROWS_AS(gap_universality_distance(tiny, second, 50, 50, 0.3, 0.3, 0.15, boot),
                      InsufficientSamples);
}

TEST_CASE("averaged correlation compare: identical inputs give zero difference") {
    const auto p = presets::goe(80);
    const auto tp = TimeParam::from_T(1.0);
    const auto samples = draw_samples(p, tp, 100, 66, 2);
    RngStream boot(66, 0, 5);
    const auto rep = averaged_correlation_compare(samples, samples, 0.0, rho_sc(0.0), 0.0,
                                                  rho_sc(0.0), 0.05, 1, -1.0, 1.0, boot);
    REQUIRE(rep.difference == 0.0);
    REQUIRE(rep.pass);
    REQUIRE_THROWS_AS(averaged_correlation_compare(samples, samples, 0.95, rho_sc(0.0), 0.0,
                                                   rho_sc(0.0), 0.1, 1, -1.0, 1.0, boot),
                      WindowOutsideBulk);
}

TEST_CASE("averaged correlation compare: independent GOE draws agree within noise") {
    const auto p = presets::goe(80);
    const auto tp = TimeParam::from_T(1.0);
    const auto a = draw_samples(p, tp, 150, 70, 2);
    const auto b = draw_samples(p, tp, 150, 71, 2);
    RngStream boot(70, 0, 5);
    const auto rep =
        averaged_correlation_compare(a, b, 0.0, rho_sc(0.0), 0.0, rho_sc(0.0), 0.05, 1, -1.0,
                                     1.0, boot);
    REQUIRE(std::abs(rep.difference) <= 2.0 * rep.bootstrap_sigma);
    const auto rep2 =
        averaged_correlation_compare(a, b, 0.0, rho_sc(0.0), 0.0, rho_sc(0.0), 0.05, 2, -1.0,
                                     1.0, boot);
    REQUIRE(std::abs(rep2.difference) <= 3.0 * rep2.bootstrap_sigma);
}
