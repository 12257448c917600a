#pragma once

#include "rml/common.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <cstdint>
#include <random>

namespace rml {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to decorrelate (seed, stream) pairs.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Independent stream `stream` of the experiment seeded with `seed`.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return Rng(mix64(mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ULL)));
}

inline double standard_normal(Rng& rng) {
    // Ziggurat; stateless, so a fresh distribution object per call is fine.
    return boost::random::normal_distribution<double>()(rng);
}

inline double uniform01(Rng& rng) { return boost::random::uniform_01<double>()(rng); }

inline void fill_standard_normal(Eigen::Ref<Matrix> out, Rng& rng) {
    boost::random::normal_distribution<double> dist;
    // Column-major fill order is part of the determinism contract.
    for (Index j = 0; j < out.cols(); ++j)
        for (Index i = 0; i < out.rows(); ++i) out(i, j) = dist(rng);
}

inline Matrix standard_normal(Index rows, Index cols, Rng& rng) {
    Matrix m(rows, cols);
    fill_standard_normal(m, rng);
    return m;
}

// Uniform integer in [0, n).
inline Index uniform_index(Index n, Rng& rng) {
    return static_cast<Index>(std::uniform_int_distribution<std::int64_t>(0, n - 1)(rng));
}

}  // namespace rml
