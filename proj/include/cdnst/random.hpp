#ifndef CDNST_RANDOM_HPP
#define CDNST_RANDOM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace cdnst {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent child seed for stream `index` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Draws an index proportional to non-negative `weights`.
inline std::size_t sample_categorical(std::span<const double> weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        u -= weights[k];
        if (u < 0.0) return k;
    }
    // rounding left u >= 0; take the last positive weight
    for (std::size_t k = weights.size(); k-- > 0;) {
        if (weights[k] > 0.0) return k;
    }
    return weights.size() - 1;
}

/// log of a Gamma(shape, 1) draw. Shapes below 1 use the boost
/// Gamma(a) = Gamma(a+1) * U^(1/a) in log space so tiny shapes do not underflow.
inline double sample_log_gamma(double shape, Rng& rng) {
    if (shape >= 1.0) {
        std::gamma_distribution<double> g(shape, 1.0);
        double x = g(rng);
        while (x <= 0.0) x = g(rng);
        return std::log(x);
    }
    std::gamma_distribution<double> g(shape + 1.0, 1.0);
    double x = g(rng);
    while (x <= 0.0) x = g(rng);
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    return std::log(x) + std::log(u) / shape;
}

inline double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

/// Dirichlet draw returned as log-probabilities (finite even when a
/// component underflows in linear space).
inline std::vector<double> sample_dirichlet_log(std::span<const double> concentration, Rng& rng) {
    std::vector<double> logs(concentration.size());
    for (std::size_t k = 0; k < concentration.size(); ++k) {
        logs[k] = sample_log_gamma(concentration[k], rng);
    }
    double norm = log_sum_exp(logs);
    for (double& x : logs) x -= norm;
    return logs;
}

inline std::vector<double> sample_dirichlet(std::span<const double> concentration, Rng& rng) {
    auto logs = sample_dirichlet_log(concentration, rng);
    std::vector<double> out(logs.size());
    double total = 0.0;
    for (std::size_t k = 0; k < logs.size(); ++k) total += out[k] = std::exp(logs[k]);
    for (double& x : out) x /= total;
    return out;
}

/// log Dirichlet density of a point given by its log-coordinates.
inline double dirichlet_log_pdf(std::span<const double> log_x, std::span<const double> concentration) {
    double sum_a = 0.0;
    double out = 0.0;
    for (std::size_t k = 0; k < concentration.size(); ++k) {
        sum_a += concentration[k];
        out += (concentration[k] - 1.0) * log_x[k] - std::lgamma(concentration[k]);
    }
    return out + std::lgamma(sum_a);
}

}  // namespace cdnst

#endif
