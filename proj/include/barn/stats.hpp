#pragma once

// Scalar distribution helpers: normal CDF/quantile, Student-t critical
// values, truncated-normal draws, batch means.

#include "barn/core.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace barn::stats {

/// Standard normal CDF via erfc; absolute error well under 1e-7.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Standard normal quantile. p must lie in (0, 1).
inline double normal_quantile(double p) {
    require(p > 0.0 && p < 1.0, "normal_quantile: p must be in (0,1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

inline double normal_log_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * std::log(2.0 * std::numbers::pi * sd * sd) - 0.5 * z * z;
}

/// Two-sided Student-t critical value t_{(1+confidence)/2, df}.
/// Tabulated for df 1..30 at confidence 0.90, 0.95 and 0.99; normal
/// approximation above 30.
inline double t_critical(double confidence, int df) {
    require(df >= 1, "t_critical: df must be >= 1");
    static constexpr std::array<double, 30> t90 = {
        6.313752, 2.919986, 2.353363, 2.131847, 2.015048, 1.943180, 1.894579, 1.859548,
        1.833113, 1.812461, 1.795885, 1.782288, 1.770933, 1.761310, 1.753050, 1.745884,
        1.739607, 1.734064, 1.729133, 1.724718, 1.720743, 1.717144, 1.713872, 1.710882,
        1.708141, 1.705618, 1.703288, 1.701131, 1.699127, 1.697261};
    static constexpr std::array<double, 30> t95 = {
        12.706205, 4.302653, 3.182446, 2.776445, 2.570582, 2.446912, 2.364624, 2.306004,
        2.262157,  2.228139, 2.200985, 2.178813, 2.160369, 2.144787, 2.131450, 2.119905,
        2.109816,  2.100922, 2.093024, 2.085963, 2.079614, 2.073873, 2.068658, 2.063899,
        2.059539,  2.055529, 2.051831, 2.048407, 2.045230, 2.042272};
    static constexpr std::array<double, 30> t99 = {
        63.656741, 9.924843, 5.840909, 4.604095, 4.032143, 3.707428, 3.499483, 3.355387,
        3.249836,  3.169273, 3.105807, 3.054540, 3.012276, 2.976843, 2.946713, 2.920782,
        2.898231,  2.878440, 2.860935, 2.845340, 2.831360, 2.818756, 2.807336, 2.796940,
        2.787436,  2.778715, 2.770683, 2.763262, 2.756386, 2.749996};

    const std::array<double, 30>* table = nullptr;
    if (std::abs(confidence - 0.90) < 1e-12) {
        table = &t90;
    } else if (std::abs(confidence - 0.95) < 1e-12) {
        table = &t95;
    } else if (std::abs(confidence - 0.99) < 1e-12) {
        table = &t99;
    } else {
        throw InputError("t_critical: confidence must be one of 0.90, 0.95, 0.99");
    }
    if (df <= 30) {
        return (*table)[static_cast<std::size_t>(df - 1)];
    }
    return normal_quantile(0.5 + 0.5 * confidence);
}

/// One draw of N(0,1) truncated to [lower, inf).
///
/// Inverse CDF on the upper-tail probability while the bound is moderate;
/// for lower > 5 the tail mass is too small for that to stay accurate, so
/// switch to exponential-proposal rejection, which is exact in the tail.
template <class G>
double std_normal_lower_truncated(double lower, G& gen) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (lower > 5.0) {
        const double alpha = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
        for (;;) {
            double u = unif(gen);
            while (u <= 0.0) {
                u = unif(gen);
            }
            const double z = lower - std::log(u) / alpha;
            const double rho = std::exp(-0.5 * (z - alpha) * (z - alpha));
            if (unif(gen) <= rho) {
                return z;
            }
        }
    }
    // P(Z > lower) = Phi(-lower); draw a point of that tail mass and invert.
    const double tail = normal_cdf(-lower);
    double u = unif(gen);
    double p = u * tail;  // in [0, tail)
    if (p <= 0.0) {
        p = std::numeric_limits<double>::min();
    }
    double z = -normal_quantile(p);  // Phi(-z) = p  =>  z > lower
    return std::max(z, lower);
}

/// Batch-means estimate of a series mean and its Monte Carlo standard error.
struct BatchMeans {
    double mean;
    double se;
};

/// Splits `values` into `n_batches` contiguous batches of equal size (trailing
/// remainder dropped), returns the grand mean of batch means and
/// sd(batch means) / sqrt(n_batches).
inline BatchMeans batch_means(std::span<const double> values, int n_batches) {
    require(n_batches >= 2, "batch_means: n_batches must be >= 2");
    require(values.size() >= static_cast<std::size_t>(n_batches),
            "batch_means: need at least n_batches values");
    const std::size_t nb = static_cast<std::size_t>(n_batches);
    const std::size_t size = values.size() / nb;
    std::vector<double> means(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < size; ++i) {
            s += values[b * size + i];
        }
        means[b] = s / static_cast<double>(size);
    }
    double grand = 0.0;
    for (double m : means) {
        grand += m;
    }
    grand /= static_cast<double>(nb);
    double ss = 0.0;
    for (double m : means) {
        ss += (m - grand) * (m - grand);
    }
    const double sd = std::sqrt(ss / static_cast<double>(nb - 1));
    return {grand, sd / std::sqrt(static_cast<double>(nb))};
}

}  // namespace barn::stats
