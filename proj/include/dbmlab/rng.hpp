#pragma once

// Counter-based substreams: each (master_seed, salt, sample_index) triple is
// hashed into an independent engine seed, so Monte Carlo samples can run in
// parallel and still reproduce bit-identically in any execution order.

#include <cmath>
#include <cstdint>
#include <random>

namespace dbmlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t sample_index, std::uint64_t salt = 0)
        : master_seed_(master_seed), sample_index_(sample_index) {
        std::uint64_t s = splitmix64(master_seed ^ splitmix64(salt));
        s = splitmix64(s ^ sample_index);
        engine_.seed(s);
    }

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t sample_index() const { return sample_index_; }

    // Uniform in [2^-54, 1), never exactly 0 so log() is safe.
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Box-Muller on explicit uniform bits; std::normal_distribution is
    // implementation-defined and would break cross-toolchain reproducibility.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t raw() { return engine_(); }

private:
    std::uint64_t master_seed_;
    std::uint64_t sample_index_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace dbmlab
