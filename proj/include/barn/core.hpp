#pragma once

// Shared numeric aliases and the error types thrown across the library.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace barn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// The one generator type used throughout; every stochastic routine takes it by reference.
using Rng = std::mt19937_64;

/// Bad shapes, out-of-domain arguments, malformed data.
class InputError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// The sampler met a non-finite quantity: NaN log ratio, overflowing scale,
/// non-finite ensemble predictions.
class SamplerError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A binary-only operation was asked of a regression model, or vice versa.
class TaskMismatch : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Mixes a base seed with stream indices so that independent tasks get
/// independent, reproducible generators (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ b);
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

inline void require(bool cond, const std::string& what) {
    if (!cond) {
        throw InputError(what);
    }
}

}  // namespace barn
