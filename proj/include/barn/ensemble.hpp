#pragma once

// The additive ensemble and its Gibbs sampler. One sweep visits every
// member in order: form its partial residual from the cached prediction
// sum, propose a size change, donate weights, retrain on the residual and
// accept or reject. Accepted moves update the cached sum by the member's
// prediction delta, so a member update costs the same regardless of
// ensemble size.

#include "barn/callbacks.hpp"
#include "barn/core.hpp"
#include "barn/mcmc.hpp"
#include "barn/mlp.hpp"
#include "barn/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace barn {

enum class EvidenceSplit { train, heldout };
enum class Task { regression, binary };

inline std::string to_string(EvidenceSplit e) { return e == EvidenceSplit::train ? "train" : "heldout"; }
inline std::string to_string(Task t) { return t == Task::regression ? "regression" : "binary"; }

struct BarnConfig {
    int num_nets = 10;
    int n_iter = 200;
    mcmc::PriorConfig prior;
    TrainConfig train;
    std::uint64_t seed = 0;
    std::optional<int> burn_in;  // default n_iter / 2
    EvidenceSplit evidence_split = EvidenceSplit::train;
    double heldout_fraction = 0.25;
    Activation activation = Activation::relu;
    bool standardize_x = true;

    int resolved_burn_in() const { return burn_in.value_or(n_iter / 2); }

    void validate() const {
        require(num_nets >= 1, "BarnConfig: num_nets must be >= 1");
        require(n_iter >= 1, "BarnConfig: n_iter must be >= 1");
        require(resolved_burn_in() >= 0 && resolved_burn_in() < n_iter, "BarnConfig: need 0 <= burn_in < n_iter");
        require(heldout_fraction > 0.0 && heldout_fraction < 1.0, "BarnConfig: heldout_fraction must be in (0,1)");
        prior.validate();
        train.validate();
    }
};

/// Affine maps between user scale and the internal scale.
struct Standardization {
    Vector x_means;
    Vector x_sds;
    double y_mean = 0.0;
    double y_sd = 1.0;

    Matrix apply_x(const Eigen::Ref<const Matrix>& X) const {
        require(X.cols() == x_means.size(), "standardization: feature count mismatch");
        Matrix out = X;
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            out.col(j) = (out.col(j).array() - x_means[j]) / x_sds[j];
        }
        return out;
    }
    Vector apply_y(const Eigen::Ref<const Vector>& y) const { return (y.array() - y_mean) / y_sd; }
    Vector invert_y(const Eigen::Ref<const Vector>& z) const { return (z.array() * y_sd + y_mean).matrix(); }
};

inline Standardization fit_standardization(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>* y,
                                           bool scale_x) {
    Standardization s;
    const Eigen::Index d = X.cols();
    s.x_means = Vector::Zero(d);
    s.x_sds = Vector::Ones(d);
    if (scale_x) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const double m = X.col(j).mean();
            const double sd = std::sqrt((X.col(j).array() - m).square().mean());
            s.x_means[j] = m;
            s.x_sds[j] = sd > 0.0 ? sd : 1.0;
        }
    }
    if (y != nullptr) {
        const double m = y->mean();
        const double sd = std::sqrt((y->array() - m).square().mean());
        s.y_mean = m;
        s.y_sd = sd > 1e-12 * std::max(1.0, std::abs(m)) ? sd : 1.0;
    }
    return s;
}

/// Cached per-member predictions on a fixed row set and their sum.
struct PredCache {
    Vector sum;
    std::vector<Vector> members;

    void build(const std::vector<SmallNet>& nets, const Eigen::Ref<const Matrix>& X) {
        members.clear();
        sum = Vector::Zero(X.rows());
        for (const auto& net : nets) {
            members.push_back(forward(net, X));
            sum += members.back();
        }
    }

    /// O(1)-in-ensemble-size update when member j changes.
    void replace(std::size_t j, Vector preds) {
        sum += preds - members[j];
        members[j] = std::move(preds);
    }
};

struct EnsembleState {
    std::vector<SmallNet> nets;
    double sigma = 1.0;
    PredCache train;                     // rows the members are fitted on
    std::optional<PredCache> heldout;    // evidence rows, when separate
    std::optional<PredCache> validation; // user validation set, if any
    Rng rng;

    const Vector& pred_sum() const { return train.sum; }
};

/// The fitted, serializable model.
struct Model {
    Task task = Task::regression;
    BarnConfig config;
    Standardization scaling;
    double sigma = 1.0;
    std::vector<SmallNet> nets;

    Eigen::Index n_features() const { return scaling.x_means.size(); }
};

struct FitResult {
    Model model;
    EnsembleState state;
    std::vector<TraceRecord> trace;
    std::optional<StopSignal> stop;
    std::vector<Eigen::Index> train_rows;
    std::vector<Eigen::Index> heldout_rows;

    bool stopped_early() const { return stop.has_value(); }
};

/// Rows the sampler works on, already on the internal scale.
struct SweepData {
    Matrix X_train;
    Vector y_train;
    std::optional<Matrix> X_heldout;  // evidence rows when separate from training rows
    Vector y_heldout;
    std::optional<Matrix> X_validation;  // monitored only, never used for fitting
};

struct SweepHooks {
    /// Replaces the Metropolis draw (forced-accept/reject harnesses).
    std::function<bool(double log_ratio, Rng&)> acceptor;
    /// Sees each member's partial residual on the training rows.
    std::function<void(std::size_t member, const Vector& residual)> on_residual;
};

struct FitOptions {
    std::optional<Matrix> X_val;
    std::optional<Vector> y_val;
    SweepHooks hooks;
    /// Called after every completed sweep, before callbacks.
    std::function<void(const EnsembleState&, const TraceRecord&, const SweepData&)> observer;
};

namespace diagnostics {

/// Counts brute-force ensemble sums. Only oracles call brute_force_sum; the
/// fit path must leave this untouched.
inline std::atomic<long long>& full_recompute_count() {
    static std::atomic<long long> count{0};
    return count;
}

inline Vector brute_force_sum(const std::vector<SmallNet>& nets, const Eigen::Ref<const Matrix>& X) {
    ++full_recompute_count();
    Vector s = Vector::Zero(X.rows());
    for (const auto& net : nets) {
        s += forward(net, X);
    }
    return s;
}

}  // namespace diagnostics

/// One Gibbs pass over every member. Returns the number of accepted moves.
/// Sigma is resampled from the full-ensemble training errors afterwards when
/// `resample_sigma` is set.
inline int gibbs_sweep(EnsembleState& state, const SweepData& data, const BarnConfig& cfg,
                       bool resample_sigma = true, const SweepHooks& hooks = {}) {
    const bool separate = data.X_heldout.has_value();
    require(!separate || state.heldout.has_value(), "gibbs_sweep: heldout cache missing");
    require(!state.validation || data.X_validation.has_value(), "gibbs_sweep: validation rows missing");
    int ntrans = 0;
    for (std::size_t j = 0; j < state.nets.size(); ++j) {
        const SmallNet& old_net = state.nets[j];
        const Vector r = data.y_train - state.train.sum + state.train.members[j];
        if (hooks.on_residual) hooks.on_residual(j, r);

        const int new_k = mcmc::propose_size(old_net.k(), cfg.prior.p_grow, state.rng);
        SmallNet proposal = donate_weights(old_net, new_k, state.rng);
        proposal = train(std::move(proposal), data.X_train, r, cfg.train, state.rng);
        Vector new_train = forward(proposal, data.X_train);

        double log_ratio = 0.0;
        Vector new_heldout;
        if (separate) {
            const Vector r_ev = data.y_heldout - state.heldout->sum + state.heldout->members[j];
            new_heldout = forward(proposal, *data.X_heldout);
            log_ratio = mcmc::log_accept_ratio(old_net, proposal, state.heldout->members[j], new_heldout, r_ev,
                                               state.sigma, cfg.prior);
        } else {
            log_ratio = mcmc::log_accept_ratio(old_net, proposal, state.train.members[j], new_train, r,
                                               state.sigma, cfg.prior);
        }
        const bool ok = hooks.acceptor ? hooks.acceptor(log_ratio, state.rng) : mcmc::accept(log_ratio, state.rng);
        if (!ok) continue;

        ++ntrans;
        state.train.replace(j, std::move(new_train));
        if (separate) state.heldout->replace(j, std::move(new_heldout));
        if (state.validation) state.validation->replace(j, forward(proposal, *data.X_validation));
        state.nets[j] = std::move(proposal);
    }
    if (resample_sigma) {
        const Vector errors = data.y_train - state.train.sum;
        state.sigma = mcmc::sample_sigma(errors, cfg.prior, state.rng);
    }
    return ntrans;
}

inline Vector predict_internal(const std::vector<SmallNet>& nets, const Eigen::Ref<const Matrix>& Xs) {
    Vector s = Vector::Zero(Xs.rows());
    for (const auto& net : nets) {
        s += forward(net, Xs);
    }
    return s;
}

/// Sum of members on new inputs, mapped back to the target scale
/// (latent z-score for binary models).
inline Vector predict_raw(const Model& model, const Eigen::Ref<const Matrix>& X) {
    if (X.cols() != model.n_features()) {
        throw InputError("predict: X has " + std::to_string(X.cols()) + " columns, model expects " +
                         std::to_string(model.n_features()));
    }
    const Vector z = predict_internal(model.nets, model.scaling.apply_x(X));
    return model.task == Task::regression ? model.scaling.invert_y(z) : z;
}

namespace detail {

inline double rmse(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

inline Vector probit(const Eigen::Ref<const Vector>& z) {
    const double lo = 1e-300;
    const double hi = std::nextafter(1.0, 0.0);
    return z.unaryExpr([lo, hi](double v) { return std::clamp(stats::normal_cdf(v), lo, hi); });
}

/// Labels on the probability scale for binary tasks, targets otherwise.
inline double score_rmse(Task task, const Vector& pred_sum, const Vector& targets) {
    return task == Task::regression ? rmse(pred_sum, targets) : rmse(probit(pred_sum), targets);
}

template <class G>
Vector sample_latent_impl(const Eigen::Ref<const Vector>& labels, const Eigen::Ref<const Vector>& z_pred, G& rng) {
    require(labels.size() == z_pred.size(), "sample_latent: length mismatch");
    Vector z(labels.size());
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        const double mu = z_pred[i];
        if (labels[i] > 0.5) {
            z[i] = mu + stats::std_normal_lower_truncated(-mu, rng);  // (0, inf)
        } else {
            z[i] = mu - stats::std_normal_lower_truncated(mu, rng);  // (-inf, 0]
        }
    }
    return z;
}

inline void validate_inputs(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) {
    require(X.rows() >= 2, "fit: need at least two rows");
    require(X.cols() >= 1, "fit: need at least one feature");
    require(y.size() == X.rows(), "fit: y length does not match X rows");
    require(X.allFinite(), "fit: X contains NaN or Inf");
    require(y.allFinite(), "fit: y contains NaN or Inf");
}

inline FitResult run_fit(Task task, const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                         const BarnConfig& cfg, std::span<const Callback> callbacks, const FitOptions& opts) {
    cfg.validate();
    validate_inputs(X, y);
    cfg.prior.validate_custom(64);
    const bool binary = task == Task::binary;
    if (binary) {
        bool has0 = false;
        bool has1 = false;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            require(y[i] == 0.0 || y[i] == 1.0, "fit_bin: labels must be 0 or 1");
            (y[i] == 1.0 ? has1 : has0) = true;
        }
        require(has0 && has1, "fit_bin: labels must contain both classes");
    }
    if (opts.X_val.has_value() != opts.y_val.has_value()) {
        throw InputError("fit: validation X and y must be given together");
    }

    FitResult result;
    EnsembleState& state = result.state;
    state.rng.seed(cfg.seed);

    // Row split for the evidence policy.
    const Eigen::Index n = X.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    if (cfg.evidence_split == EvidenceSplit::heldout) {
        std::shuffle(order.begin(), order.end(), state.rng);
        auto n_held = static_cast<Eigen::Index>(std::floor(cfg.heldout_fraction * static_cast<double>(n)));
        n_held = std::clamp<Eigen::Index>(n_held, 1, n - 1);
        result.heldout_rows.assign(order.begin(), order.begin() + n_held);
        result.train_rows.assign(order.begin() + n_held, order.end());
        std::sort(result.heldout_rows.begin(), result.heldout_rows.end());
        std::sort(result.train_rows.begin(), result.train_rows.end());
    } else {
        result.train_rows = order;
    }
    auto take_rows = [](const Eigen::Ref<const Matrix>& M, const std::vector<Eigen::Index>& rows) {
        Matrix out(static_cast<Eigen::Index>(rows.size()), M.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = M.row(rows[i]);
        return out;
    };
    auto take = [](const Eigen::Ref<const Vector>& v, const std::vector<Eigen::Index>& rows) {
        Vector out(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
        return out;
    };

    const Matrix X_tr = take_rows(X, result.train_rows);
    const Vector y_tr = take(y, result.train_rows);
    Model& model = result.model;
    model.task = task;
    model.config = cfg;
    if (binary) {
        model.scaling = fit_standardization(X_tr, nullptr, cfg.standardize_x);
    } else {
        const Eigen::Ref<const Vector> yref(y_tr);
        model.scaling = fit_standardization(X_tr, &yref, cfg.standardize_x);
    }

    if (!model.scaling.x_sds.allFinite() || !model.scaling.x_means.allFinite() ||
        !std::isfinite(model.scaling.y_sd) || !std::isfinite(model.scaling.y_mean)) {
        throw SamplerError("fit: data scale overflows double precision");
    }

    SweepData data;
    data.X_train = model.scaling.apply_x(X_tr);
    const Vector labels_tr = y_tr;
    data.y_train = binary ? y_tr : model.scaling.apply_y(y_tr);
    Vector labels_ev;
    if (!result.heldout_rows.empty()) {
        data.X_heldout = model.scaling.apply_x(take_rows(X, result.heldout_rows));
        labels_ev = take(y, result.heldout_rows);
        data.y_heldout = binary ? labels_ev : model.scaling.apply_y(labels_ev);
    }
    Vector yv;
    if (opts.X_val) {
        require(opts.X_val->cols() == X.cols() && opts.y_val->size() == opts.X_val->rows(),
                "fit: validation set shape mismatch");
        require(opts.X_val->allFinite() && opts.y_val->allFinite(), "fit: validation set contains NaN or Inf");
        data.X_validation = model.scaling.apply_x(*opts.X_val);
        yv = binary ? *opts.y_val : model.scaling.apply_y(*opts.y_val);
    }

    // Initial ensemble: single-neuron members splitting the target mean.
    double start_mean = data.y_train.mean();
    if (binary) {
        const double rate = std::clamp(labels_tr.mean(), 1e-3, 1.0 - 1e-3);
        start_mean = stats::normal_quantile(rate);
    }
    const int d = static_cast<int>(X.cols());
    for (int j = 0; j < cfg.num_nets; ++j) {
        state.nets.push_back(init_net(1, d, cfg.activation, start_mean / cfg.num_nets, state.rng));
    }
    state.sigma = 1.0;
    state.train.build(state.nets, data.X_train);
    if (data.X_heldout) {
        state.heldout.emplace();
        state.heldout->build(state.nets, *data.X_heldout);
    }
    if (data.X_validation) {
        state.validation.emplace();
        state.validation->build(state.nets, *data.X_validation);
    }

    const int burn_in = cfg.resolved_burn_in();
    for (int it = 0; it < cfg.n_iter; ++it) {
        if (binary) {
            data.y_train = sample_latent_impl(labels_tr, state.train.sum, state.rng);
            if (data.X_heldout) data.y_heldout = sample_latent_impl(labels_ev, state.heldout->sum, state.rng);
        }
        const int ntrans = gibbs_sweep(state, data, cfg, !binary, opts.hooks);
        if (!state.train.sum.allFinite() || !std::isfinite(state.sigma)) {
            throw SamplerError("fit: ensemble predictions became non-finite at iteration " + std::to_string(it));
        }

        TraceRecord rec;
        rec.iter = it;
        for (const auto& net : state.nets) rec.neuron_counts.push_back(net.k());
        rec.ntrans = ntrans;
        rec.sigma = state.sigma;
        rec.train_rmse = score_rmse(task, state.train.sum, binary ? labels_tr : data.y_train);
        if (state.validation) {
            rec.val_rmse = score_rmse(task, state.validation->sum, yv);
        } else if (state.heldout) {
            rec.val_rmse = score_rmse(task, state.heldout->sum, binary ? labels_ev : data.y_heldout);
        }
        result.trace.push_back(rec);
        if (opts.observer) opts.observer(state, rec, data);

        if (!callbacks.empty()) {
            CallbackContext ctx;
            ctx.iter = static_cast<int>(result.trace.size());
            ctx.n_iter = cfg.n_iter;
            ctx.num_nets = cfg.num_nets;
            ctx.burn_in = burn_in;
            ctx.trace = result.trace;
            for (const auto& r : result.trace) {
                if (r.val_rmse) ctx.val_errors.push_back(*r.val_rmse);
            }
            for (const auto& cb : callbacks) {
                if (auto sig = cb(ctx)) {
                    result.stop = sig;
                    break;
                }
            }
            if (result.stop) break;
        }
    }

    model.sigma = state.sigma;
    model.nets = state.nets;
    return result;
}

}  // namespace detail

/// Fits a regression ensemble; targets are standardized internally.
inline FitResult fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, const BarnConfig& cfg,
                     std::span<const Callback> callbacks = {}, const FitOptions& opts = {}) {
    return detail::run_fit(Task::regression, X, y, cfg, callbacks, opts);
}

/// Predictions on the original target scale. Binary models return class-1
/// probabilities.
inline Vector predict(const Model& model, const Eigen::Ref<const Matrix>& X) {
    const Vector raw = predict_raw(model, X);
    return model.task == Task::regression ? raw : detail::probit(raw);
}

inline stats::BatchMeans batch_means(std::span<const double> values, int n_batches) {
    return stats::batch_means(values, n_batches);
}

}  // namespace barn
