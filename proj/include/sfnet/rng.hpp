#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace sfnet {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// FNV-1a over raw bytes; used for config hashes.
inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

// Deterministic RNG. All distributions are hand-rolled on top of the
// mt19937_64 stream so results are bit-identical across platforms and
// standard library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return (next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    float uniform(float lo, float hi) {
        return lo + static_cast<float>(uniform()) * (hi - lo);
    }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(uniform() * n);
    }

    // Standard normal via Box-Muller.
    float normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                                  std::cos(2.0 * M_PI * u2));
    }

    // Beta(a, b) via Johnk's algorithm; adequate for the small shape
    // parameters used by mixup.
    float beta(float a, float b) {
        for (int iter = 0; iter < 256; ++iter) {
            double u = uniform(), v = uniform();
            double x = std::pow(u, 1.0 / a);
            double y = std::pow(v, 1.0 / b);
            if (x + y <= 1.0) {
                if (x + y > 0) return static_cast<float>(x / (x + y));
                // Underflow: fall back on log-scale comparison.
                double lx = std::log(u) / a, ly = std::log(v) / b;
                double m = lx > ly ? lx : ly;
                lx -= m; ly -= m;
                return static_cast<float>(std::exp(lx) /
                                          (std::exp(lx) + std::exp(ly)));
            }
        }
        return 0.5f;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(v[i], v[static_cast<std::size_t>(j)]);
        }
    }

    // Independent substream derived from (this seed, stream id).
    static Rng fork(std::uint64_t seed, std::uint64_t stream) {
        return Rng(splitmix64(splitmix64(seed) ^ stream));
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace sfnet
