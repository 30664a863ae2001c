#include <catch2/catch_amalgamated.hpp>

#include "dbmlab/eigen_symmetric.hpp"
#include "dbmlab/rng.hpp"
#include "oracles.hpp"

using namespace dbmlab;

TEST_CASE("eigenvalues of diagonal and 2x2 matrices") {
    SymMatrix d(3);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    d(2, 2) = 2.0;
    const auto ev = eigenvalues_symmetric(d);
    REQUIRE(ev[0] == 1.0);
    REQUIRE(ev[1] == 2.0);
    REQUIRE(ev[2] == 3.0);

    SymMatrix s(2);
    s(0, 1) = 1.0;
    s(1, 0) = 1.0;
    const auto ev2 = eigenvalues_symmetric(s);
    REQUIRE(ev2[0] == Catch::Approx(-1.0).margin(1e-14));
    REQUIRE(ev2[1] == Catch::Approx(1.0).margin(1e-14));

    SymMatrix one(1);
    one(0, 0) = -4.5;
    REQUIRE(eigenvalues_symmetric(one)[0] == -4.5);
}

TEST_CASE("3x3 eigenvalues against the trigonometric closed form") {
    RngStream rng(11, 0);
    for (int rep = 0; rep < 50; ++rep) {
        SymMatrix a(3);
        std::array<std::array<double, 3>, 3> ref{};
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) {
                const double v = 2.0 * rng.gaussian();
                a(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = v;
                a(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) = v;
                ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
                ref[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = v;
            }
        const auto got = eigenvalues_symmetric(a);
        const auto want = oracles::symmetric3_eigenvalues(ref);
        for (int k = 0; k < 3; ++k)
            REQUIRE(got[static_cast<std::size_t>(k)] ==
                    Catch::Approx(want[static_cast<std::size_t>(k)]).margin(1e-12));
    }
}

TEST_CASE("random symmetric matrices: trace and Frobenius invariants") {
    RngStream rng(12, 0);
    for (std::size_t n : {20u, 50u}) {
        SymMatrix a(n);
        double trace = 0.0, frob2 = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                const double v = rng.gaussian();
                a(i, j) = v;
                a(j, i) = v;
            }
        for (std::size_t i = 0; i < n; ++i) {
            trace += a(i, i);
            for (std::size_t j = 0; j < n; ++j) frob2 += a(i, j) * a(i, j);
        }
        const auto ev = eigenvalues_symmetric(a);
        double sum = 0.0, sum2 = 0.0;
        for (double l : ev) {
            sum += l;
            sum2 += l * l;
        }
        REQUIRE(sum == Catch::Approx(trace).epsilon(1e-10).margin(1e-10));
        REQUIRE(sum2 == Catch::Approx(frob2).epsilon(1e-10));
    }
}

TEST_CASE("spectra agree with the Jacobi oracle") {
    RngStream rng(13, 0);
    const std::size_t n = 40;
    SymMatrix a(n);
    std::vector<std::vector<double>> ref(n, std::vector<double>(n));
    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v = rng.gaussian();
            a(i, j) = v;
            a(j, i) = v;
            ref[i][j] = v;
            ref[j][i] = v;
        }
    const auto got = eigenvalues_symmetric(a);
    const auto want = oracles::jacobi_eigenvalues(ref);
    for (double l : got) norm2 = std::max(norm2, std::abs(l));
    for (std::size_t i = 0; i < n; ++i)
        REQUIRE(std::abs(got[i] - want[i]) <= 1e-10 * norm2); // backward-error budget
}

TEST_CASE("asymmetry is rejected") {
    SymMatrix a(3);
    a(0, 1) = 1.0;
    a(1, 0) = 1.0 + 1e-6;
    REQUIRE_THROWS_AS(eigenvalues_symmetric(a), NotSymmetric);
}
