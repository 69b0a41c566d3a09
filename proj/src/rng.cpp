#include "replab/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace replab {

uint64_t hash_name(std::string_view name) {
    uint64_t h = 1469598103934665603ULL;  // FNV offset basis
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;  // FNV prime
    }
    return h;
}

uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng::Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

Rng Rng::stream(std::string_view name) const {
    uint64_t state = seed_ ^ hash_name(name);
    return Rng(splitmix64(state));
}

Rng Rng::stream(std::string_view name, uint64_t index) const {
    uint64_t state = seed_ ^ hash_name(name);
    state = splitmix64(state) ^ (index * 0x9e3779b97f4a7c15ULL);
    return Rng(splitmix64(state));
}

uint64_t Rng::next_u64() { return engine_(); }

uint64_t Rng::below(uint64_t bound) {
    if (bound == 0) {
        throw std::invalid_argument("Rng::below: bound must be positive");
    }
    // Rejection sampling on the top of the range keeps the draw unbiased.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % bound;
}

double Rng::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
    // Polar method: rejection on the unit disk, one value kept.
    for (;;) {
        const double u = 2.0 * uniform01() - 1.0;
        const double v = 2.0 * uniform01() - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) {
            return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }
}

double Rng::normal(double mean, double stddev) { return mean + stddev * normal(); }

double Rng::lognormal_mean_cv(double mean, double cv) {
    if (mean <= 0.0) {
        throw std::invalid_argument("Rng::lognormal_mean_cv: mean must be positive");
    }
    if (cv < 0.0) {
        throw std::invalid_argument("Rng::lognormal_mean_cv: cv must be non-negative");
    }
    if (cv == 0.0) {
        return mean;
    }
    const double sigma_sq = std::log1p(cv * cv);
    const double mu_log = std::log(mean) - 0.5 * sigma_sq;
    return std::exp(mu_log + std::sqrt(sigma_sq) * normal());
}

std::vector<double> Rng::unit_vector(std::size_t dim) {
    if (dim == 0) {
        throw std::invalid_argument("Rng::unit_vector: dim must be positive");
    }
    std::vector<double> v(dim);
    double norm_sq = 0.0;
    do {
        norm_sq = 0.0;
        for (auto& x : v) {
            x = normal();
            norm_sq += x * x;
        }
    } while (norm_sq == 0.0);
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& x : v) {
        x *= inv;
    }
    return v;
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) {
        throw std::invalid_argument("Rng::sample_without_replacement: k exceeds population");
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = i;
    }
    for (std::size_t i = 0; i < k; ++i) {
        std::swap(idx[i], idx[i + below(n - i)]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace replab
