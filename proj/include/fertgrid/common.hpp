#pragma once
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace fertgrid {

// Missing cells are carried as quiet NaN everywhere in memory; files encode
// them as empty fields (tables) or the declared nodata value (rasters).
constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

// Error taxonomy used by the CLI exit codes: configuration problems exit 2,
// plain data errors exit 3, infeasible allocation targets exit 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ----------------------------------------------------------------------------
// Deterministic RNG. SplitMix64 core so that streams are identical across
// platforms and standard libraries; all randomness in the project flows
// through this.
// ----------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n) by rejection, bias-free.
    std::uint64_t uniform(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::uniform: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do { v = next_u64(); } while (v >= limit);
        return v % n;
    }

    // Uniform in [0, 1).
    double uniform_real() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

    // Standard normal via Box-Muller (cached second draw).
    double normal() {
        if (have_cached_) { have_cached_ = false; return cached_; }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform_real();
        const double u2 = uniform_real();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::size_t(uniform(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent stream (e.g. one per tree) without consuming
    // unpredictable amounts of the parent stream.
    Rng fork(std::uint64_t salt) {
        return Rng(state_ ^ (0x9e3779b97f4a7c15ULL * (salt + 0x632be59bd9b4e019ULL)));
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// Mean and sample standard deviation of a value list (sd = 0 for n < 2).
struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
    MeanSd out;
    if (xs.empty()) return out;
    double s = 0.0;
    for (double x : xs) s += x;
    out.mean = s / double(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.sd = std::sqrt(ss / double(xs.size() - 1));
    }
    return out;
}

} // namespace fertgrid
