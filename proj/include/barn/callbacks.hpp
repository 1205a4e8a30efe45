#pragma once

// Early-stopping rules, evaluated by the fit loop after every completed
// sweep. Each rule is a pure function of the CallbackContext: replaying the
// same trace gives the same decision.

#include "barn/core.hpp"
#include "barn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace barn {

/// Per-sweep diagnostics. RMSE values are on the standardized target scale
/// (class-probability scale for binary fits).
struct TraceRecord {
    int iter = 0;
    std::vector<int> neuron_counts;
    int ntrans = 0;
    double sigma = 1.0;
    double train_rmse = 0.0;
    std::optional<double> val_rmse;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

enum class StopReason { validation, trans_enough, wasserstein, rfwsr };

inline std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::validation: return "validation";
        case StopReason::trans_enough: return "trans_enough";
        case StopReason::wasserstein: return "wasserstein";
        case StopReason::rfwsr: return "rfwsr";
    }
    return "unknown";
}

struct StopSignal {
    StopReason reason;
    int iter;

    friend bool operator==(const StopSignal&, const StopSignal&) = default;
};

/// What a rule sees: `iter` completed sweeps, whose records are in `trace`.
struct CallbackContext {
    int iter = 0;
    int n_iter = 0;
    int num_nets = 0;
    int burn_in = 0;
    std::span<const TraceRecord> trace;
    std::vector<double> val_errors;  // one per completed sweep when a validation set exists
};

using Callback = std::function<std::optional<StopSignal>(const CallbackContext&)>;

namespace callbacks {

inline int check_every_default(int n_iter) {
    require(n_iter >= 1, "check_every_default: n_iter must be >= 1");
    return std::max(n_iter / 10, 1);
}

namespace detail {

inline int resolve_every(const CallbackContext& ctx, std::optional<int> check_every) {
    const int every = check_every.value_or(check_every_default(std::max(ctx.n_iter, 1)));
    require(every >= 1, "callback: check_every must be >= 1");
    return every;
}

inline bool is_check(int i, int every, int skip_first) { return i > 0 && i % every == 0 && i >= skip_first; }

}  // namespace detail

struct TransEnoughOptions {
    std::optional<int> check_every;
    int skip_first = 0;
    std::optional<int> ntrans;  // default max(num_nets / 5, 1)
};

/// Stops when fewer than `ntrans` networks accepted a transition in the last sweep.
inline std::optional<StopSignal> trans_enough(const CallbackContext& ctx, const TransEnoughOptions& opt = {}) {
    const int i = ctx.iter;
    const int every = detail::resolve_every(ctx, opt.check_every);
    if (!detail::is_check(i, every, opt.skip_first)) return std::nullopt;
    require(ctx.trace.size() >= static_cast<std::size_t>(i), "trans_enough: trace shorter than iter");
    const int threshold = opt.ntrans.value_or(std::max(ctx.num_nets / 5, 1));
    if (ctx.trace[static_cast<std::size_t>(i - 1)].ntrans < threshold) {
        return StopSignal{StopReason::trans_enough, i};
    }
    return std::nullopt;
}

/// Empirical one-Wasserstein distance between two equal-size integer samples.
inline double wasserstein1(std::span<const int> a, std::span<const int> b) {
    require(!a.empty() && !b.empty(), "wasserstein1: samples must be nonempty");
    require(a.size() == b.size(), "wasserstein1: samples must have equal length");
    std::vector<int> sa(a.begin(), a.end());
    std::vector<int> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    long long total = 0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        total += std::llabs(static_cast<long long>(sa[i]) - sb[i]);
    }
    return static_cast<double>(total) / static_cast<double>(sa.size());
}

struct WassersteinOptions {
    double threshold = 0.1;
    std::optional<int> check_every;
    int skip_first = 0;
    int window = 3;
};

/// Stops once the neuron-count distribution moved by at most `threshold`
/// between consecutive sweeps at each of the last `window` checks.
inline std::optional<StopSignal> wasserstein_stop(const CallbackContext& ctx, const WassersteinOptions& opt = {}) {
    require(opt.window >= 1, "wasserstein_stop: window must be >= 1");
    const int i = ctx.iter;
    const int every = detail::resolve_every(ctx, opt.check_every);
    if (!detail::is_check(i, every, opt.skip_first)) return std::nullopt;
    for (int w = 0; w < opt.window; ++w) {
        const int c = i - w * every;
        if (c < 2 || !detail::is_check(c, every, opt.skip_first)) return std::nullopt;
        const auto& prev = ctx.trace[static_cast<std::size_t>(c - 2)].neuron_counts;
        const auto& cur = ctx.trace[static_cast<std::size_t>(c - 1)].neuron_counts;
        if (wasserstein1(prev, cur) > opt.threshold) return std::nullopt;
    }
    return StopSignal{StopReason::wasserstein, i};
}

struct ValidationOptions {
    int patience = 3;
    std::optional<int> check_every;
    int skip_first = 0;
    double min_delta = 1e-4;
};

/// Stops when the best validation RMSE has not improved by at least
/// `min_delta` for `patience` consecutive checks.
inline std::optional<StopSignal> validation_stop(const CallbackContext& ctx, const ValidationOptions& opt = {}) {
    require(opt.patience >= 1, "validation_stop: patience must be >= 1");
    const int i = ctx.iter;
    const int every = detail::resolve_every(ctx, opt.check_every);
    if (!detail::is_check(i, every, opt.skip_first)) return std::nullopt;
    if (ctx.val_errors.size() < static_cast<std::size_t>(i)) {
        throw InputError("validation_stop: no validation errors recorded (use a held-out split)");
    }
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int c = every; c <= i; c += every) {
        if (!detail::is_check(c, every, opt.skip_first)) continue;
        const double v = ctx.val_errors[static_cast<std::size_t>(c - 1)];
        if (v <= best - opt.min_delta) {
            best = v;
            stale = 0;
        } else {
            ++stale;
        }
    }
    if (stale >= opt.patience) {
        return StopSignal{StopReason::validation, i};
    }
    return std::nullopt;
}

struct RfwsrOptions {
    int n_batches = 10;
    double eps_rel = 0.05;
    double confidence = 0.95;
    int skip_first = 0;
};

/// Relative fixed-width rule on the post-burn-in training RMSE series:
/// stop when t * se <= eps_rel * |mean| under batch means.
inline std::optional<StopSignal> rfwsr_stop(const CallbackContext& ctx, const RfwsrOptions& opt = {}) {
    require(opt.n_batches >= 2, "rfwsr_stop: n_batches must be >= 2");
    const int i = ctx.iter;
    if (i <= 0 || i < opt.skip_first) return std::nullopt;
    const int start = std::max(ctx.burn_in, 0);
    if (i - start < 2 * opt.n_batches) return std::nullopt;
    std::vector<double> series;
    series.reserve(static_cast<std::size_t>(i - start));
    for (int t = start; t < i; ++t) {
        series.push_back(ctx.trace[static_cast<std::size_t>(t)].train_rmse);
    }
    const auto bm = stats::batch_means(series, opt.n_batches);
    const double half_width = stats::t_critical(opt.confidence, opt.n_batches - 1) * bm.se;
    if (half_width <= opt.eps_rel * std::abs(bm.mean)) {
        return StopSignal{StopReason::rfwsr, i};
    }
    return std::nullopt;
}

inline Callback make_trans_enough(TransEnoughOptions opt = {}) {
    return [opt](const CallbackContext& ctx) { return trans_enough(ctx, opt); };
}
inline Callback make_wasserstein(WassersteinOptions opt = {}) {
    return [opt](const CallbackContext& ctx) { return wasserstein_stop(ctx, opt); };
}
inline Callback make_validation(ValidationOptions opt = {}) {
    return [opt](const CallbackContext& ctx) { return validation_stop(ctx, opt); };
}
inline Callback make_rfwsr(RfwsrOptions opt = {}) {
    return [opt](const CallbackContext& ctx) { return rfwsr_stop(ctx, opt); };
}

}  // namespace callbacks
}  // namespace barn
