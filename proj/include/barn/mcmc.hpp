#pragma once

// The probability kernel of the sampler: size proposals and their
// transition probabilities, the Poisson prior on neuron count, Gaussian
// evidence of a partial residual, the Metropolis-Hastings ratio, and the
// conjugate draw of the noise scale.

#include "barn/core.hpp"
#include "barn/mlp.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace barn::mcmc {

struct PriorConfig {
    double lambda = 1.0;  // Poisson mean of the neuron count
    double p_grow = 0.4;
    /// Optional user prior over k, given as a log-pmf.
    std::function<double(int)> custom_log_pmf;
    double sigma_nu = 3.0;
    double sigma_lambda = 1.0;

    void validate() const {
        require(lambda > 0.0, "PriorConfig: lambda must be > 0");
        require(p_grow >= 0.0 && p_grow <= 1.0, "PriorConfig: p_grow must be in [0,1]");
        require(sigma_nu > 0.0 && sigma_lambda > 0.0, "PriorConfig: sigma prior parameters must be > 0");
    }

    /// Checks that a supplied custom prior is finite on [1, k_max].
    void validate_custom(int k_max) const {
        if (!custom_log_pmf) return;
        for (int k = 1; k <= k_max; ++k) {
            require(std::isfinite(custom_log_pmf(k)), "PriorConfig: custom_log_pmf not finite at k=" +
                                                          std::to_string(k));
        }
    }
};

/// Unrestricted Poisson log-pmf, defined for k >= 0.
inline double poisson_log_pmf(int k, double lambda) {
    require(k >= 0, "poisson_log_pmf: k must be >= 0");
    return k * std::log(lambda) - lambda - std::lgamma(static_cast<double>(k) + 1.0);
}

inline double log_prior(int k, const PriorConfig& prior) {
    require(k >= 1, "log_prior: k must be >= 1");
    if (prior.custom_log_pmf) {
        return prior.custom_log_pmf(k);
    }
    return poisson_log_pmf(k, prior.lambda);
}

/// k+1 with probability p_grow, otherwise k-1; a single neuron always grows.
template <class G>
int propose_size(int k, double p_grow, G& rng) {
    require(k >= 1, "propose_size: k must be >= 1");
    if (k == 1) return 2;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return unif(rng) < p_grow ? k + 1 : k - 1;
}

inline double log_transition(int k_from, int k_to, double p_grow) {
    require(k_from >= 1 && k_to >= 1, "log_transition: sizes must be >= 1");
    require(std::abs(k_to - k_from) == 1, "log_transition: sizes must differ by exactly one");
    if (k_to > k_from) {
        return k_from == 1 ? 0.0 : std::log(p_grow);
    }
    return std::log(1.0 - p_grow);
}

/// Gaussian log-likelihood of residual `r` given predictions and scale sigma.
inline double log_evidence(const Eigen::Ref<const Vector>& preds, const Eigen::Ref<const Vector>& r,
                           double sigma) {
    require(sigma > 0.0, "log_evidence: sigma must be > 0");
    require(preds.size() == r.size(), "log_evidence: length mismatch");
    const double n = static_cast<double>(r.size());
    const double sse = (r - preds).squaredNorm();
    return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma * sigma) - sse / (2.0 * sigma * sigma);
}

/// The sides of the ratio, kept separate so callers and tests can inspect them.
struct AcceptTerms {
    double evidence_new;
    double prior_new;
    double reverse_move;  // log q(new -> old)
    double evidence_old;
    double prior_old;
    double forward_move;  // log q(old -> new)

    double log_ratio() const {
        return (evidence_new + prior_new + reverse_move) - (evidence_old + prior_old + forward_move);
    }
};

inline AcceptTerms accept_terms(const SmallNet& old_net, const SmallNet& new_net,
                                const Eigen::Ref<const Vector>& preds_old, const Eigen::Ref<const Vector>& preds_new,
                                const Eigen::Ref<const Vector>& r, double sigma, const PriorConfig& prior) {
    return {log_evidence(preds_new, r, sigma),
            log_prior(new_net.k(), prior),
            log_transition(new_net.k(), old_net.k(), prior.p_grow),
            log_evidence(preds_old, r, sigma),
            log_prior(old_net.k(), prior),
            log_transition(old_net.k(), new_net.k(), prior.p_grow)};
}

inline double log_accept_ratio(const SmallNet& old_net, const SmallNet& new_net,
                               const Eigen::Ref<const Vector>& preds_old, const Eigen::Ref<const Vector>& preds_new,
                               const Eigen::Ref<const Vector>& r, double sigma, const PriorConfig& prior) {
    return accept_terms(old_net, new_net, preds_old, preds_new, r, sigma, prior).log_ratio();
}

/// Metropolis draw: true iff ln U < log_ratio.
template <class G>
bool accept(double log_ratio, G& rng) {
    if (std::isnan(log_ratio)) {
        throw SamplerError("accept: NaN log acceptance ratio");
    }
    if (log_ratio >= 0.0) return true;
    if (log_ratio == -std::numeric_limits<double>::infinity()) return false;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return std::log(unif(rng)) < log_ratio;
}

/// sigma^2 ~ InvGamma((nu + n)/2, (nu * lambda_s + sum e^2)/2); returns sigma.
/// An empty error vector samples from the prior.
template <class G>
double sample_sigma(const Eigen::Ref<const Vector>& errors, const PriorConfig& prior, G& rng) {
    const double n = static_cast<double>(errors.size());
    const double shape = 0.5 * (prior.sigma_nu + n);
    const double rate = 0.5 * (prior.sigma_nu * prior.sigma_lambda + errors.squaredNorm());
    std::gamma_distribution<double> gamma(shape, 1.0 / rate);
    double precision = gamma(rng);
    while (!(precision > 0.0)) {
        precision = gamma(rng);
    }
    return std::sqrt(1.0 / precision);
}

}  // namespace barn::mcmc
