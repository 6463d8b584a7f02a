#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace uwofdm {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based substream seed: a pure function of the master seed and tags.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t t : tags) {
        h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
    }
    return h;
}

/// Stream tags, so channel/noise/data draws never share a substream.
enum class StreamTag : std::uint64_t { channel = 1, noise = 2, bits = 3, snapshot = 4, symbols = 5 };

inline std::uint64_t tag(StreamTag t) { return static_cast<std::uint64_t>(t); }

/**
 * Seeded random stream. The engine is std::mt19937_64, whose output sequence
 * is fixed by the standard; the uniform and Gaussian conversions are done here
 * instead of with std distributions so results do not depend on the library.
 */
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on (0, 1].
    double uniform() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

    int bit() { return static_cast<int>(engine_() >> 63); }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    /// Circular complex Gaussian with E|z|^2 = variance.
    std::complex<double> complex_gaussian(double variance) {
        const double s = std::sqrt(variance / 2.0);
        const double re = gaussian();
        const double im = gaussian();
        return {s * re, s * im};
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace uwofdm
