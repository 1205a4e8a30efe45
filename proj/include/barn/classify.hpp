#pragma once

// Binary probit classification on top of the regression sampler: each
// iteration draws latent scores given the labels, then runs an ordinary
// sweep against them with the noise scale pinned to 1.

#include "barn/ensemble.hpp"

namespace barn {

/// Latent probit scores: N(z_pred, 1) truncated to (0, inf) for label 1 and
/// to (-inf, 0] for label 0.
template <class G>
Vector sample_latent(const Eigen::Ref<const Vector>& labels, const Eigen::Ref<const Vector>& z_pred, G& rng) {
    return detail::sample_latent_impl(labels, z_pred, rng);
}

/// Fits a binary model; `labels` must hold only 0 and 1, with both present.
inline FitResult fit_bin(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& labels,
                         const BarnConfig& cfg, std::span<const Callback> callbacks = {},
                         const FitOptions& opts = {}) {
    return detail::run_fit(Task::binary, X, labels, cfg, callbacks, opts);
}

inline Vector predict_z(const Model& model, const Eigen::Ref<const Matrix>& X) {
    if (model.task != Task::binary) {
        throw TaskMismatch("predict_z: model was fitted for regression");
    }
    return predict_raw(model, X);
}

/// Phi(z), clamped into the open unit interval.
inline Vector predict_proba(const Model& model, const Eigen::Ref<const Matrix>& X) {
    if (model.task != Task::binary) {
        throw TaskMismatch("predict_proba: model was fitted for regression");
    }
    return detail::probit(predict_raw(model, X));
}

}  // namespace barn
