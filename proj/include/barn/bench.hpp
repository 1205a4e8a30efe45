#pragma once

// Benchmark harness: {OLS, one big network, BARN} x synthetic suites x
// trials, timing each fit with a monotonic clock.

#include "barn/datasets.hpp"
#include "barn/ensemble.hpp"
#include "barn/tuning.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace barn::bench {

inline const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names = {"ols", "bignn", "barn"};
    return names;
}

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {"linear", "friedman1", "friedman2", "friedman3", "random"};
    return names;
}

/// Noise level used when the caller does not override it.
inline double default_noise(const std::string& suite) {
    if (suite == "linear") return 0.1;
    if (suite == "friedman1") return 1.0;
    if (suite == "friedman2") return 10.0;
    if (suite == "friedman3") return 0.05;
    if (suite == "random") return 1.0;
    throw InputError("unknown suite: " + suite);
}

inline data::Dataset make_suite(const std::string& suite, Eigen::Index n, std::uint64_t seed,
                                std::optional<double> noise = std::nullopt) {
    const double sd = noise.value_or(default_noise(suite));
    if (suite == "linear") return data::gen_linear(n, 10, sd, seed);
    if (suite == "random") return data::gen_linear(n, 10, sd, seed, true);
    if (suite == "friedman1") return data::gen_friedman(data::Friedman::F1, n, sd, seed);
    if (suite == "friedman2") return data::gen_friedman(data::Friedman::F2, n, sd, seed);
    if (suite == "friedman3") return data::gen_friedman(data::Friedman::F3, n, sd, seed);
    throw InputError("unknown suite: " + suite);
}

struct TrialRow {
    std::string suite;
    std::string method;
    int trial = 0;
    double rmse = 0.0;
    double seconds = 0.0;
};

struct SummaryRow {
    std::string suite;
    std::string method;
    int trials = 0;
    double mean_rmse = 0.0;
    double mean_seconds = 0.0;
    double rel_time = 0.0;  // mean_seconds / OLS mean_seconds on the same suite
};

struct BenchOptions {
    std::vector<std::string> suites = {"linear"};
    int trials = 3;
    Eigen::Index n = 500;
    std::optional<double> noise;
    double test_fraction = 0.2;
    BarnConfig barn;
    int bignn_k = 100;
    TrainConfig bignn_train;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct BenchResult {
    std::vector<TrialRow> trials;
    std::vector<SummaryRow> summary;
};

namespace detail {

template <class F>
double time_it(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<TrialRow> run_trial(const BenchOptions& opt, std::size_t suite_idx, int trial) {
    const std::string& suite = opt.suites[suite_idx];
    const std::uint64_t seed = derive_seed(opt.seed, suite_idx, static_cast<std::uint64_t>(trial));
    const data::Dataset ds = make_suite(suite, opt.n, seed, opt.noise);
    const auto split = data::train_test_split(ds, opt.test_fraction, seed);
    std::vector<TrialRow> rows;

    data::OlsModel ols;
    const double t_ols = time_it([&] { ols = data::ols_fit(split.train); });
    rows.push_back({suite, "ols", trial, data::rmse(ols.predict(split.test.X), split.test.y), t_ols});

    data::BigNN big;
    const double t_big = time_it([&] { big = data::bignn_fit(split.train, opt.bignn_k, opt.bignn_train, seed); });
    rows.push_back({suite, "bignn", trial, data::rmse(big.predict(split.test.X), split.test.y), t_big});

    BarnConfig cfg = opt.barn;
    cfg.seed = seed;
    Model model;
    const double t_barn = time_it([&] { model = fit(split.train.X, split.train.y, cfg).model; });
    rows.push_back({suite, "barn", trial, data::rmse(predict(model, split.test.X), split.test.y), t_barn});
    return rows;
}

}  // namespace detail

inline BenchResult run_bench(const BenchOptions& opt) {
    require(opt.trials >= 1, "bench: trials must be >= 1");
    require(!opt.suites.empty(), "bench: no suites");
    for (const auto& s : opt.suites) default_noise(s);  // validates names

    const std::size_t n_tasks = opt.suites.size() * static_cast<std::size_t>(opt.trials);
    std::vector<std::vector<TrialRow>> per_task(n_tasks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= n_tasks) return;
            try {
                per_task[t] = detail::run_trial(opt, t / static_cast<std::size_t>(opt.trials),
                                                static_cast<int>(t % static_cast<std::size_t>(opt.trials)));
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    const int n_threads = tuning::detail::resolve_threads(opt.threads, n_tasks);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);

    BenchResult result;
    for (auto& rows : per_task) {
        for (auto& r : rows) result.trials.push_back(std::move(r));
    }
    for (const auto& suite : opt.suites) {
        std::map<std::string, SummaryRow> by_method;
        for (const auto& r : result.trials) {
            if (r.suite != suite) continue;
            auto& s = by_method[r.method];
            s.suite = suite;
            s.method = r.method;
            ++s.trials;
            s.mean_rmse += r.rmse;
            s.mean_seconds += r.seconds;
        }
        for (auto& [_, s] : by_method) {
            s.mean_rmse /= s.trials;
            s.mean_seconds /= s.trials;
        }
        const double ols_time = by_method.at("ols").mean_seconds;
        for (const auto& m : method_names()) {
            SummaryRow s = by_method.at(m);
            s.rel_time = m == "ols" ? 1.0 : s.mean_seconds / std::max(ols_time, 1e-12);
            result.summary.push_back(s);
        }
    }
    return result;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << "suite,method,trials,mean_rmse,mean_seconds,rel_time\n";
    for (const auto& r : rows) {
        out << r.suite << ',' << r.method << ',' << r.trials << ',' << data::format_double(r.mean_rmse) << ','
            << data::format_double(r.mean_seconds) << ',' << data::format_double(r.rel_time) << '\n';
    }
}

inline void write_trials_csv(std::ostream& out, const std::vector<TrialRow>& rows) {
    out << "suite,method,trial,rmse,seconds\n";
    for (const auto& r : rows) {
        out << r.suite << ',' << r.method << ',' << r.trial << ',' << data::format_double(r.rmse) << ','
            << data::format_double(r.seconds) << '\n';
    }
}

}  // namespace barn::bench
