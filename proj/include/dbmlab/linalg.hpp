#pragma once

// Small dense SPD solver shared by the parabolic stepping and the implicit
// integrator rescue: in-place Cholesky plus triangular solves and a plain
// matrix product.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dbmlab {
namespace lin {

// Lower Cholesky factor of the SPD row-major matrix a (n x n), in place.
inline void cholesky(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (s <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
}

inline void chol_solve(const std::vector<double>& chol, std::size_t n, double* b) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= chol[i * n + k] * b[k];
        b[i] = s / chol[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= chol[k * n + i] * b[k];
        b[i] = s / chol[i * n + i];
    }
}

inline void matmul(const std::vector<double>& a, const std::vector<double>& b,
                   std::vector<double>& out, std::size_t n) {
    out.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = a[i * n + k];
            if (aik == 0.0) continue;
            const double* brow = &b[k * n];
            double* orow = &out[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
}

} // namespace lin
} // namespace dbmlab
