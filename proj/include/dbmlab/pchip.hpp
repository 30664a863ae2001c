#pragma once

// Fritsch-Carlson monotone cubic interpolation. Used for the cumulative
// density and its quantile inversion, where overshoot would break the
// monotonicity of classical locations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dbmlab {

class MonotoneCubic {
public:
    MonotoneCubic() = default;

    MonotoneCubic(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw std::invalid_argument("MonotoneCubic: need >= 2 matching points");
        slopes_.resize(n);
        std::vector<double> d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double h = x_[i + 1] - x_[i];
            if (h <= 0.0) throw std::invalid_argument("MonotoneCubic: x not strictly increasing");
            d[i] = (y_[i + 1] - y_[i]) / h;
        }
        slopes_[0] = d[0];
        slopes_[n - 1] = d[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (d[i - 1] * d[i] <= 0.0) {
                slopes_[i] = 0.0;
            } else {
                const double w1 = 2.0 * (x_[i + 1] - x_[i]) + (x_[i] - x_[i - 1]);
                const double w2 = (x_[i + 1] - x_[i]) + 2.0 * (x_[i] - x_[i - 1]);
                slopes_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        // Clamp endpoint slopes (Fritsch-Carlson condition at the boundary).
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) {
                slopes_[i] = 0.0;
                slopes_[i + 1] = 0.0;
            }
        }
    }

    double operator()(double x) const {
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double s = (x - x_[i]) / h;
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        const double h10 = s3 - 2.0 * s2 + s;
        const double h01 = -2.0 * s3 + 3.0 * s2;
        const double h11 = s3 - s2;
        return h00 * y_[i] + h10 * h * slopes_[i] + h01 * y_[i + 1] + h11 * h * slopes_[i + 1];
    }

    double derivative(double x) const {
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double s = (x - x_[i]) / h;
        const double dh00 = (6.0 * s * s - 6.0 * s) / h;
        const double dh10 = 3.0 * s * s - 4.0 * s + 1.0;
        const double dh01 = (-6.0 * s * s + 6.0 * s) / h;
        const double dh11 = 3.0 * s * s - 2.0 * s;
        return dh00 * y_[i] + dh10 * slopes_[i] + dh01 * y_[i + 1] + dh11 * slopes_[i + 1];
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    double y_min() const { return y_.front(); }
    double y_max() const { return y_.back(); }

    // Inverse for non-decreasing data: bisection to |interval| < tol.
    double invert(double target, double tol = 1e-12) const {
        double lo = x_.front(), hi = x_.back();
        if (target <= y_.front()) return lo;
        if (target >= y_.back()) return hi;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if ((*this)(mid) < target)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }

private:
    std::size_t segment(double x) const {
        if (x <= x_.front()) return 0;
        if (x >= x_.back()) return x_.size() - 2;
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        return static_cast<std::size_t>(it - x_.begin()) - 1;
    }

    std::vector<double> x_, y_, slopes_;
};

} // namespace dbmlab
