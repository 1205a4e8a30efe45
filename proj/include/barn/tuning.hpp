#pragma once

// k-fold cross-validated grid and randomized search over BarnConfig fields.
// Candidate x fold evaluations are independent; each gets its own seed
// derived from (base seed, candidate, fold), so running them on several
// threads gives the same result as running them in order.

#include "barn/classify.hpp"
#include "barn/core.hpp"
#include "barn/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

namespace barn::tuning {

struct PoissonDist {
    double mu;
};
struct UniformIntDist {
    long long lo;
    long long hi;
};
struct UniformDist {
    double lo;
    double hi;
};

using ParamSpec = std::variant<std::vector<double>, PoissonDist, UniformIntDist, UniformDist>;

/// Ordered name -> values/distribution.
struct ParamSpace {
    std::vector<std::pair<std::string, ParamSpec>> entries;

    ParamSpace& add(std::string name, ParamSpec spec) {
        entries.emplace_back(std::move(name), std::move(spec));
        return *this;
    }
};

using ParamSet = std::vector<std::pair<std::string, double>>;

namespace detail {

struct Field {
    std::function<void(BarnConfig&, double)> set;
    bool integer;
    bool positive;  // zero or negative values are invalid
};

inline const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = {
        {"l", {[](BarnConfig& c, double v) { c.prior.lambda = v; }, false, true}},
        {"lambda", {[](BarnConfig& c, double v) { c.prior.lambda = v; }, false, true}},
        {"p", {[](BarnConfig& c, double v) { c.prior.p_grow = v; }, false, false}},
        {"p_grow", {[](BarnConfig& c, double v) { c.prior.p_grow = v; }, false, false}},
        {"num_nets", {[](BarnConfig& c, double v) { c.num_nets = static_cast<int>(std::lround(v)); }, true, true}},
        {"n_iter", {[](BarnConfig& c, double v) { c.n_iter = static_cast<int>(std::lround(v)); }, true, true}},
        {"burn_in", {[](BarnConfig& c, double v) { c.burn_in = static_cast<int>(std::lround(v)); }, true, false}},
        {"learning_rate", {[](BarnConfig& c, double v) { c.train.learning_rate = v; }, false, true}},
        {"lr", {[](BarnConfig& c, double v) { c.train.learning_rate = v; }, false, true}},
        {"reg", {[](BarnConfig& c, double v) { c.train.reg_l1 = c.train.reg_l2 = v; }, false, false}},
        {"reg_l1", {[](BarnConfig& c, double v) { c.train.reg_l1 = v; }, false, false}},
        {"reg_l2", {[](BarnConfig& c, double v) { c.train.reg_l2 = v; }, false, false}},
        {"max_epochs", {[](BarnConfig& c, double v) { c.train.max_epochs = static_cast<int>(std::lround(v)); }, true, true}},
        {"tol", {[](BarnConfig& c, double v) { c.train.tol = v; }, false, true}},
        {"sigma_nu", {[](BarnConfig& c, double v) { c.prior.sigma_nu = v; }, false, true}},
        {"sigma_lambda", {[](BarnConfig& c, double v) { c.prior.sigma_lambda = v; }, false, true}},
        {"heldout_fraction", {[](BarnConfig& c, double v) { c.heldout_fraction = v; }, false, true}},
    };
    return table;
}

inline const Field& field(const std::string& name) {
    const auto it = fields().find(name);
    if (it == fields().end()) throw InputError("unknown tunable parameter: " + name);
    return it->second;
}

inline int resolve_threads(int requested, std::size_t tasks) {
    int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("BARN_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return std::max(1, std::min<int>(n, static_cast<int>(tasks)));
}

}  // namespace detail

/// Applies `params` to a copy of `base` and validates the result.
inline BarnConfig apply_params(const BarnConfig& base, const ParamSet& params) {
    BarnConfig cfg = base;
    for (const auto& [name, value] : params) {
        detail::field(name).set(cfg, value);
    }
    cfg.validate();
    return cfg;
}

inline void validate_space(const ParamSpace& space) {
    for (const auto& [name, spec] : space.entries) {
        detail::field(name);
        if (const auto* list = std::get_if<std::vector<double>>(&spec)) {
            require(!list->empty(), "param space: empty value list for " + name);
        }
    }
}

/// Seeded shuffle of 0..n-1 cut into k folds; the first n % k folds get one
/// extra row. Returns (train, validation) index pairs, each sorted.
inline std::vector<std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>>> kfold_split(
    Eigen::Index n, int k = 5, std::uint64_t seed = 0) {
    require(k >= 2, "kfold_split: k must be >= 2");
    require(n >= k, "kfold_split: need n >= k");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>>> folds;
    const Eigen::Index base = n / k;
    const Eigen::Index extra = n % k;
    Eigen::Index start = 0;
    for (int f = 0; f < k; ++f) {
        const Eigen::Index len = base + (f < extra ? 1 : 0);
        std::vector<Eigen::Index> val(order.begin() + start, order.begin() + start + len);
        std::vector<Eigen::Index> tr;
        tr.reserve(static_cast<std::size_t>(n - len));
        tr.insert(tr.end(), order.begin(), order.begin() + start);
        tr.insert(tr.end(), order.begin() + start + len, order.end());
        std::sort(val.begin(), val.end());
        std::sort(tr.begin(), tr.end());
        folds.emplace_back(std::move(tr), std::move(val));
        start += len;
    }
    return folds;
}

enum class Scoring { neg_rmse, neg_log_loss };

struct Candidate {
    ParamSet params;
    std::vector<double> fold_scores;
    double mean_score = 0.0;
};

struct CvResult {
    std::vector<Candidate> candidates;
    std::size_t best_index = 0;
    ParamSet best_params;
    Model refit;
    std::vector<TraceRecord> refit_trace;
    std::vector<std::string> warnings;
};

struct TuneOptions {
    int k = 5;
    Task task = Task::regression;
    /// Seed for the fold shuffle and for random candidate draws.
    std::uint64_t seed = 0;
    /// Worker threads; 0 picks hardware concurrency. BARN_THREADS caps it.
    int threads = 0;
    /// Fit budget (candidates x folds x iterations) beyond which a cost warning is recorded.
    long long budget = 100000;
    /// Instrumentation: sees the training rows of every CV fit.
    std::function<void(std::size_t candidate, std::size_t fold, const std::vector<Eigen::Index>& rows)> fit_hook;
};

namespace detail {

inline Matrix take_rows(const Eigen::Ref<const Matrix>& M, const std::vector<Eigen::Index>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), M.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = M.row(rows[i]);
    return out;
}

inline Vector take(const Eigen::Ref<const Vector>& v, const std::vector<Eigen::Index>& rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
    return out;
}

inline double score(Task task, const Model& model, const Matrix& X, const Vector& y) {
    if (task == Task::regression) {
        const Vector pred = predict(model, X);
        return -std::sqrt((pred - y).squaredNorm() / static_cast<double>(y.size()));
    }
    const Vector p = predict_proba(model, X);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double q = std::clamp(p[i], 1e-15, 1.0 - 1e-15);
        ll += y[i] > 0.5 ? std::log(q) : std::log(1.0 - q);
    }
    return ll / static_cast<double>(y.size());
}

inline CvResult evaluate(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, const BarnConfig& base,
                         std::vector<ParamSet> candidates, const TuneOptions& opt) {
    require(!candidates.empty(), "search: no candidates");
    require(X.rows() == y.size(), "search: X/y length mismatch");
    const auto folds = kfold_split(X.rows(), opt.k, opt.seed);

    CvResult result;
    std::vector<BarnConfig> configs;
    long long cost = 0;
    for (const auto& params : candidates) {
        configs.push_back(apply_params(base, params));
        cost += static_cast<long long>(opt.k) * configs.back().n_iter;
        result.candidates.push_back({params, std::vector<double>(folds.size(), 0.0), 0.0});
    }
    if (cost > opt.budget) {
        std::ostringstream msg;
        msg << "search cost " << candidates.size() << " candidates x " << opt.k
            << " folds multiplies fit time; total sweeps " << cost << " exceed budget " << opt.budget;
        result.warnings.push_back(msg.str());
    }

    const std::size_t n_tasks = candidates.size() * folds.size();
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::mutex hook_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= n_tasks) return;
            const std::size_t c = t / folds.size();
            const std::size_t f = t % folds.size();
            try {
                const auto& [tr, val] = folds[f];
                if (opt.fit_hook) {
                    std::lock_guard lock(hook_mu);
                    opt.fit_hook(c, f, tr);
                }
                BarnConfig cfg = configs[c];
                cfg.seed = derive_seed(base.seed, c, f);
                const Matrix Xtr = take_rows(X, tr);
                const Vector ytr = take(y, tr);
                const FitResult fr = opt.task == Task::regression ? fit(Xtr, ytr, cfg) : fit_bin(Xtr, ytr, cfg);
                result.candidates[c].fold_scores[f] = score(opt.task, fr.model, take_rows(X, val), take(y, val));
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    const int n_threads = resolve_threads(opt.threads, n_tasks);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);

    for (std::size_t c = 0; c < result.candidates.size(); ++c) {
        auto& cand = result.candidates[c];
        cand.mean_score = std::accumulate(cand.fold_scores.begin(), cand.fold_scores.end(), 0.0) /
                          static_cast<double>(cand.fold_scores.size());
        if (cand.mean_score > result.candidates[result.best_index].mean_score) {
            result.best_index = c;
        }
    }
    result.best_params = result.candidates[result.best_index].params;
    const BarnConfig best = configs[result.best_index];
    FitResult refit = opt.task == Task::regression ? fit(X, y, best) : fit_bin(X, y, best);
    result.refit = std::move(refit.model);
    result.refit_trace = std::move(refit.trace);
    return result;
}

}  // namespace detail

/// Exhaustive search over the Cartesian product of explicit value lists.
inline CvResult grid_search(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                            const BarnConfig& base, const ParamSpace& space, const TuneOptions& opt = {}) {
    validate_space(space);
    std::vector<ParamSet> candidates{ParamSet{}};
    for (const auto& [name, spec] : space.entries) {
        const auto* list = std::get_if<std::vector<double>>(&spec);
        if (list == nullptr) {
            throw InputError("grid_search: '" + name + "' is a distribution; use random_search");
        }
        std::vector<ParamSet> next;
        for (const auto& partial : candidates) {
            for (double v : *list) {
                ParamSet p = partial;
                p.emplace_back(name, v);
                next.push_back(std::move(p));
            }
        }
        candidates = std::move(next);
    }
    return detail::evaluate(X, y, base, std::move(candidates), opt);
}

/// Draws `n_candidates` parameter sets from the space. Poisson draws for
/// fields that must be positive are redrawn while zero.
inline std::vector<ParamSet> draw_candidates(const ParamSpace& space, int n_candidates, std::uint64_t seed) {
    require(n_candidates >= 1, "random_search: n_candidates must be >= 1");
    validate_space(space);
    Rng rng(derive_seed(seed, 0x5eed));
    std::vector<ParamSet> out;
    for (int c = 0; c < n_candidates; ++c) {
        ParamSet p;
        for (const auto& [name, spec] : space.entries) {
            const auto& fld = detail::field(name);
            double v = 0.0;
            if (const auto* list = std::get_if<std::vector<double>>(&spec)) {
                std::uniform_int_distribution<std::size_t> pick(0, list->size() - 1);
                v = (*list)[pick(rng)];
            } else if (const auto* pois = std::get_if<PoissonDist>(&spec)) {
                require(pois->mu > 0.0, "poisson: mu must be > 0");
                std::poisson_distribution<long long> draw(pois->mu);
                long long k = draw(rng);
                while (fld.positive && k == 0) k = draw(rng);
                v = static_cast<double>(k);
            } else if (const auto* ui = std::get_if<UniformIntDist>(&spec)) {
                require(ui->lo <= ui->hi, "uniform_int: lo must be <= hi");
                std::uniform_int_distribution<long long> draw(ui->lo, ui->hi);
                v = static_cast<double>(draw(rng));
            } else if (const auto* u = std::get_if<UniformDist>(&spec)) {
                require(u->lo < u->hi, "uniform: lo must be < hi");
                std::uniform_real_distribution<double> draw(u->lo, u->hi);
                v = draw(rng);
            }
            p.emplace_back(name, v);
        }
        out.push_back(std::move(p));
    }
    return out;
}

inline CvResult random_search(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                              const BarnConfig& base, const ParamSpace& space, int n_candidates,
                              const TuneOptions& opt = {}) {
    return detail::evaluate(X, y, base, draw_candidates(space, n_candidates, opt.seed), opt);
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    return out;
}

inline std::string strip(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline double to_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw InputError("not a number: '" + s + "'");
    }
    if (used != s.size()) throw InputError("not a number: '" + s + "'");
    return v;
}

}  // namespace detail

/// Parses "l=1,2,3;p_grow=0.3,0.4".
inline ParamSpace parse_grid(const std::string& text) {
    ParamSpace space;
    for (const auto& part : detail::split(text, ';')) {
        const std::string item = detail::strip(part);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InputError("grid entry needs name=values: '" + item + "'");
        const std::string name = detail::strip(item.substr(0, eq));
        std::vector<double> values;
        for (const auto& v : detail::split(item.substr(eq + 1), ',')) {
            const std::string t = detail::strip(v);
            if (!t.empty()) values.push_back(detail::to_double(t));
        }
        if (values.empty()) throw InputError("grid entry '" + name + "' has no values");
        space.add(name, std::move(values));
    }
    if (space.entries.empty()) throw InputError("empty grid");
    validate_space(space);
    return space;
}

/// Parses "l~poisson(2);p~uniform(0.3,0.5);num_nets~uniform_int(5,15);reg=0.01,0.1".
inline ParamSpace parse_random(const std::string& text) {
    ParamSpace space;
    for (const auto& part : detail::split(text, ';')) {
        const std::string item = detail::strip(part);
        if (item.empty()) continue;
        const auto tilde = item.find('~');
        if (tilde == std::string::npos) {
            const ParamSpace lists = parse_grid(item);
            space.entries.insert(space.entries.end(), lists.entries.begin(), lists.entries.end());
            continue;
        }
        const std::string name = detail::strip(item.substr(0, tilde));
        const std::string dist = detail::strip(item.substr(tilde + 1));
        const auto open = dist.find('(');
        const auto close = dist.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close < open) {
            throw InputError("distribution must look like tag(args): '" + dist + "'");
        }
        const std::string tag = detail::strip(dist.substr(0, open));
        std::vector<double> args;
        for (const auto& a : detail::split(dist.substr(open + 1, close - open - 1), ',')) {
            args.push_back(detail::to_double(detail::strip(a)));
        }
        if (tag == "poisson" && args.size() == 1) {
            space.add(name, PoissonDist{args[0]});
        } else if (tag == "uniform_int" && args.size() == 2) {
            space.add(name, UniformIntDist{std::llround(args[0]), std::llround(args[1])});
        } else if (tag == "uniform" && args.size() == 2) {
            space.add(name, UniformDist{args[0], args[1]});
        } else {
            throw InputError("unknown distribution '" + tag + "' with " + std::to_string(args.size()) + " args");
        }
    }
    if (space.entries.empty()) throw InputError("empty search space");
    validate_space(space);
    return space;
}

}  // namespace barn::tuning
