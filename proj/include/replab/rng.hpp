#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace replab {

// 64-bit FNV-1a hash, used to derive named sub-stream seeds.
uint64_t hash_name(std::string_view name);

// SplitMix64 step; also used as a seed mixer.
uint64_t splitmix64(uint64_t& state);

// Deterministic random source with named sub-streams.
//
// The engine is std::mt19937_64 (its output sequence is fixed by the
// standard). All distributions are implemented here rather than with the
// std distribution objects, whose algorithms are implementation-defined
// and would break byte-identical runs across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed);

    // Independent generator derived from this stream's seed and a name.
    // Derivation uses the seed only (not the current engine position), so
    // the same name always yields the same stream regardless of how much
    // the parent has been consumed.
    Rng stream(std::string_view name) const;
    Rng stream(std::string_view name, uint64_t index) const;

    uint64_t seed() const { return seed_; }

    uint64_t next_u64();

    // Unbiased integer in [0, bound), bound > 0, via rejection sampling.
    uint64_t below(uint64_t bound);

    // Double in [0, 1) built from 53 random bits.
    double uniform01();
    double uniform(double lo, double hi);

    // Standard normal via the polar method. The spare value is discarded so
    // the draw count per call is fixed.
    double normal();
    double normal(double mean, double stddev);

    // Log-normal parametrized by its mean and coefficient of variation.
    // cv == 0 degenerates to the constant `mean`.
    double lognormal_mean_cv(double mean, double cv);

    // Uniform unit vector on the sphere in `dim` dimensions.
    std::vector<double> unit_vector(std::size_t dim);

    // k distinct indices from [0, n) in random order (partial Fisher-Yates).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace replab
