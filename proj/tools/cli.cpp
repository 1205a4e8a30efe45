#include "cli.hpp"

#include "barn/barn.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace barn::cli {
namespace {

using json = nlohmann::json;

/// Flag-level problems discovered after parsing (conflicting options, bad values).
class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ModelFlags {
    int num_nets = 10;
    double lambda = 1.0;
    double p_grow = 0.4;
    int iters = 200;
    std::string solver = "auto";
    std::uint64_t seed = 0;
    std::string evidence = "train";
    double heldout_fraction = 0.25;
    double lr = 0.01;
    double reg = 0.01;
    double reg_l1 = -1.0;
    double reg_l2 = -1.0;
    int max_epochs = 200;
    std::string activation = "relu";
    int burn_in = -1;
    double sigma_nu = 3.0;
    double sigma_lambda = 1.0;
};

struct StopFlags {
    std::string rule = "none";
    int patience = 3;
    int ntrans = -1;
    int check_every = -1;
    int skip_first = 0;
    double w1_threshold = 0.1;
    double eps_rel = 0.05;
    int n_batches = 10;
};

struct DataFlags {
    std::string path;
    std::string target = "y";
    bool no_header = false;
};

void add_model_flags(CLI::App* app, ModelFlags& f) {
    app->add_option("--num-nets", f.num_nets, "Networks in the ensemble")->capture_default_str();
    app->add_option("--l", f.lambda, "Poisson prior mean on neurons per network")->capture_default_str();
    app->add_option("--p", f.p_grow, "Probability of proposing one more neuron")->capture_default_str();
    app->add_option("--iters", f.iters, "MCMC iterations")->capture_default_str();
    app->add_option("--solver", f.solver, "Network solver")
        ->check(CLI::IsMember({"auto", "lbfgs-like", "adam"}))
        ->capture_default_str();
    app->add_option("--seed", f.seed, "Random seed")->capture_default_str();
    app->add_option("--evidence", f.evidence, "Rows used for the acceptance evidence")
        ->check(CLI::IsMember({"train", "heldout"}))
        ->capture_default_str();
    app->add_option("--heldout-fraction", f.heldout_fraction, "Share of rows held out for evidence")
        ->capture_default_str();
    app->add_option("--lr", f.lr, "Learning rate (adam)")->capture_default_str();
    app->add_option("--reg", f.reg, "L1 and L2 penalty")->capture_default_str();
    app->add_option("--reg-l1", f.reg_l1, "L1 penalty (overrides --reg)");
    app->add_option("--reg-l2", f.reg_l2, "L2 penalty (overrides --reg)");
    app->add_option("--max-epochs", f.max_epochs, "Solver iterations per network fit")->capture_default_str();
    app->add_option("--activation", f.activation, "Hidden activation")
        ->check(CLI::IsMember({"relu", "tanh"}))
        ->capture_default_str();
    app->add_option("--burn-in", f.burn_in, "Burn-in iterations (default iters/2)");
    app->add_option("--sigma-nu", f.sigma_nu, "Noise prior degrees of freedom")->capture_default_str();
    app->add_option("--sigma-lambda", f.sigma_lambda, "Noise prior scale")->capture_default_str();
}

void add_stop_flags(CLI::App* app, StopFlags& f) {
    app->add_option("--stop", f.rule, "Early-stopping rule")
        ->check(CLI::IsMember({"validation", "trans", "wasserstein", "rfwsr", "none"}))
        ->capture_default_str();
    app->add_option("--patience", f.patience, "validation: non-improving checks before stopping")
        ->capture_default_str();
    app->add_option("--ntrans", f.ntrans, "trans: minimum accepted transitions (default num_nets/5)");
    app->add_option("--check-every", f.check_every, "Iterations between checks (default iters/10)");
    app->add_option("--skip-first", f.skip_first, "Do not stop before this iteration")->capture_default_str();
    app->add_option("--w1-threshold", f.w1_threshold, "wasserstein: distance threshold")->capture_default_str();
    app->add_option("--eps-rel", f.eps_rel, "rfwsr: relative half-width")->capture_default_str();
    app->add_option("--n-batches", f.n_batches, "rfwsr: batch count")->capture_default_str();
}

void add_data_flags(CLI::App* app, DataFlags& f, bool required = true) {
    auto* opt = app->add_option("--data", f.path, "CSV data file");
    if (required) opt->required();
    app->add_option("--target", f.target, "Target column name (index when --no-header)")->capture_default_str();
    app->add_flag("--no-header", f.no_header, "CSV has no header row");
}

BarnConfig build_config(const ModelFlags& f) {
    BarnConfig cfg;
    cfg.num_nets = f.num_nets;
    cfg.n_iter = f.iters;
    cfg.prior.lambda = f.lambda;
    cfg.prior.p_grow = f.p_grow;
    cfg.prior.sigma_nu = f.sigma_nu;
    cfg.prior.sigma_lambda = f.sigma_lambda;
    cfg.train.solver = solver_from_string(f.solver);
    cfg.train.learning_rate = f.lr;
    cfg.train.reg_l1 = f.reg_l1 >= 0.0 ? f.reg_l1 : f.reg;
    cfg.train.reg_l2 = f.reg_l2 >= 0.0 ? f.reg_l2 : f.reg;
    cfg.train.max_epochs = f.max_epochs;
    cfg.seed = f.seed;
    if (f.burn_in >= 0) cfg.burn_in = f.burn_in;
    cfg.evidence_split = f.evidence == "heldout" ? EvidenceSplit::heldout : EvidenceSplit::train;
    cfg.heldout_fraction = f.heldout_fraction;
    cfg.activation = activation_from_string(f.activation);
    try {
        cfg.validate();
    } catch (const InputError& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

std::vector<Callback> build_callbacks(const StopFlags& f, const BarnConfig& cfg) {
    std::optional<int> every;
    if (f.check_every > 0) every = f.check_every;
    if (f.check_every == 0) throw UsageError("--check-every must be >= 1");
    if (f.rule == "none") return {};
    if (f.rule == "trans") {
        callbacks::TransEnoughOptions o;
        o.check_every = every;
        o.skip_first = f.skip_first;
        if (f.ntrans >= 0) o.ntrans = f.ntrans;
        return {callbacks::make_trans_enough(o)};
    }
    if (f.rule == "wasserstein") {
        if (f.w1_threshold < 0.0) throw UsageError("--w1-threshold must be >= 0");
        callbacks::WassersteinOptions o;
        o.threshold = f.w1_threshold;
        o.check_every = every;
        o.skip_first = f.skip_first;
        return {callbacks::make_wasserstein(o)};
    }
    if (f.rule == "validation") {
        if (cfg.evidence_split != EvidenceSplit::heldout) {
            throw UsageError("--stop validation needs --evidence heldout");
        }
        if (f.patience < 1) throw UsageError("--patience must be >= 1");
        callbacks::ValidationOptions o;
        o.patience = f.patience;
        o.check_every = every;
        o.skip_first = f.skip_first;
        return {callbacks::make_validation(o)};
    }
    if (f.n_batches < 2) throw UsageError("--n-batches must be >= 2");
    if (f.eps_rel <= 0.0) throw UsageError("--eps-rel must be > 0");
    callbacks::RfwsrOptions o;
    o.n_batches = f.n_batches;
    o.eps_rel = f.eps_rel;
    o.skip_first = f.skip_first;
    return {callbacks::make_rfwsr(o)};
}

data::Dataset load_data(const DataFlags& f) { return data::load_csv(f.path, f.target, !f.no_header); }

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

json fingerprint_json(const data::Dataset& ds) {
    return {{"rows", ds.rows()}, {"cols", ds.cols()}, {"fnv1a64", hex64(data::fingerprint(ds))}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data::DataError("cannot write " + path);
    out << text;
}

struct Manifest {
    json doc;
    std::string path;

    void save(double seconds) {
        doc["wall_seconds"] = seconds;
        write_text(path, doc.dump(2) + "\n");
    }
};

Manifest start_manifest(const std::string& command, const std::vector<std::string>& args, const std::string& path) {
    Manifest m;
    m.path = path;
    m.doc["command"] = command;
    m.doc["args"] = args;
    m.doc["stop_reason"] = nullptr;
    return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    DataFlags data;
    ModelFlags model;
    StopFlags stop;
    std::string out_model = "model.json";
    std::string out_trace = "trace.jsonl";
    std::string out_manifest;
    bool to_stdout = false;
};

int cmd_train(Task task, const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err) {
    const BarnConfig cfg = build_config(a.model);
    const auto cbs = build_callbacks(a.stop, cfg);
    const data::Dataset ds = load_data(a.data);

    Manifest manifest = start_manifest(task == Task::binary ? "classify" : "train", args,
                                       a.out_manifest.empty() ? a.out_model + ".manifest.json" : a.out_manifest);
    manifest.doc["config"] = io::to_json(cfg);
    manifest.doc["seed"] = cfg.seed;
    manifest.doc["dataset"] = fingerprint_json(ds);

    const auto t0 = std::chrono::steady_clock::now();
    FitResult result = task == Task::binary ? fit_bin(ds.X, ds.y, cfg, cbs) : fit(ds.X, ds.y, cfg, cbs);
    const double secs = seconds_since(t0);

    io::save_model(a.out_model, result.model);
    std::ostringstream trace;
    io::write_trace(trace, result.trace);
    if (a.to_stdout) {
        out << trace.str();
    } else {
        write_text(a.out_trace, trace.str());
    }
    if (result.stop) manifest.doc["stop_reason"] = to_string(result.stop->reason);
    manifest.doc["iterations"] = result.trace.size();
    manifest.doc["outputs"] = {{"model", a.out_model}, {"trace", a.to_stdout ? "-" : a.out_trace}};
    manifest.save(secs);

    const TraceRecord& last = result.trace.back();
    const double scale = task == Task::regression ? result.model.scaling.y_sd : 1.0;
    err << "seed " << cfg.seed << ", " << result.trace.size() << " iterations";
    if (result.stop) err << " (stopped early: " << to_string(result.stop->reason) << ")";
    err << "\ntrain RMSE " << last.train_rmse * scale;
    if (last.val_rmse) err << ", val RMSE " << *last.val_rmse * scale;
    err << "\n";
    return kOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
    std::string model;
    DataFlags data;
    std::string out_pred = "predictions.csv";
    std::string out_manifest;
    bool proba = false;
    bool to_stdout = false;
};

int cmd_predict(const PredictArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream&) {
    const Model model = io::load_model(a.model);
    if (a.proba && model.task != Task::binary) {
        throw UsageError("--proba needs a binary model; " + a.model + " is a regression model");
    }
    std::ifstream in(a.data.path);
    if (!in) throw data::DataError("cannot open " + a.data.path);
    const Matrix X = data::parse_features_csv(in, !a.data.no_header, a.data.no_header ? "" : a.data.target);
    if (X.cols() != model.n_features()) {
        throw data::DataError("data has " + std::to_string(X.cols()) + " feature columns, model expects " +
                              std::to_string(model.n_features()));
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream csv;
    if (model.task == Task::regression) {
        const Vector pred = predict(model, X);
        csv << "prediction\n";
        for (Eigen::Index i = 0; i < pred.size(); ++i) csv << data::format_double(pred[i]) << '\n';
    } else {
        const Vector z = predict_z(model, X);
        const Vector p = predict_proba(model, X);
        csv << "prediction,proba,z\n";
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            csv << (p[i] >= 0.5 ? 1 : 0) << ',' << data::format_double(p[i]) << ',' << data::format_double(z[i])
                << '\n';
        }
    }
    const double secs = seconds_since(t0);
    if (a.to_stdout) {
        out << csv.str();
    } else {
        write_text(a.out_pred, csv.str());
    }
    std::string mpath = a.out_manifest;
    if (mpath.empty()) mpath = a.to_stdout ? "predict.manifest.json" : a.out_pred + ".manifest.json";
    Manifest manifest = start_manifest("predict", args, mpath);
    manifest.doc["config"] = io::to_json(model.config);
    manifest.doc["seed"] = model.config.seed;
    manifest.doc["dataset"] = {{"rows", X.rows()}, {"cols", X.cols()}};
    manifest.doc["outputs"] = {{"predictions", a.to_stdout ? "-" : a.out_pred}};
    manifest.save(secs);
    return kOk;
}

// ---------------------------------------------------------------- tune

struct TuneArgs {
    DataFlags data;
    ModelFlags model;
    std::string task = "regression";
    std::string grid;
    std::string random;
    int n_candidates = 3;
    int folds = 5;
    int threads = 0;
    std::string out_candidates = "candidates.csv";
    std::string out_best = "best_params.json";
    std::string out_model = "model.json";
    std::string out_manifest;
    bool to_stdout = false;
};

int cmd_tune(const TuneArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const BarnConfig base = build_config(a.model);
    if (a.grid.empty() == a.random.empty()) throw UsageError("give exactly one of --grid or --random");
    if (a.folds < 2) throw UsageError("--folds must be >= 2");
    if (a.n_candidates < 1) throw UsageError("--n-candidates must be >= 1");
    tuning::ParamSpace space;
    try {
        space = a.grid.empty() ? tuning::parse_random(a.random) : tuning::parse_grid(a.grid);
    } catch (const InputError& e) {
        throw UsageError(e.what());
    }
    const data::Dataset ds = load_data(a.data);

    tuning::TuneOptions opt;
    opt.k = a.folds;
    opt.task = a.task == "binary" ? Task::binary : Task::regression;
    opt.seed = base.seed;
    opt.threads = a.threads;

    const auto t0 = std::chrono::steady_clock::now();
    const tuning::CvResult cv = a.grid.empty() ? tuning::random_search(ds.X, ds.y, base, space, a.n_candidates, opt)
                                               : tuning::grid_search(ds.X, ds.y, base, space, opt);
    const double secs = seconds_since(t0);
    for (const auto& w : cv.warnings) err << "warning: " << w << '\n';

    std::ostringstream csv;
    csv << "candidate";
    for (const auto& [name, _] : cv.candidates.front().params) csv << ',' << name;
    csv << ",mean_score";
    for (int f = 0; f < a.folds; ++f) csv << ",fold" << f;
    csv << '\n';
    for (std::size_t c = 0; c < cv.candidates.size(); ++c) {
        const auto& cand = cv.candidates[c];
        csv << c;
        for (const auto& [_, v] : cand.params) csv << ',' << data::format_double(v);
        csv << ',' << data::format_double(cand.mean_score);
        for (double s : cand.fold_scores) csv << ',' << data::format_double(s);
        csv << '\n';
    }
    if (a.to_stdout) {
        out << csv.str();
    } else {
        write_text(a.out_candidates, csv.str());
    }
    json best;
    best["best_index"] = cv.best_index;
    best["mean_score"] = cv.candidates[cv.best_index].mean_score;
    best["scoring"] = opt.task == Task::regression ? "neg_rmse" : "neg_log_loss";
    json params = json::object();
    for (const auto& [name, v] : cv.best_params) params[name] = v;
    best["best_params"] = params;
    best["warnings"] = cv.warnings;
    write_text(a.out_best, best.dump(2) + "\n");
    io::save_model(a.out_model, cv.refit);

    Manifest manifest = start_manifest("tune", args,
                                       a.out_manifest.empty() ? a.out_model + ".manifest.json" : a.out_manifest);
    manifest.doc["config"] = io::to_json(base);
    manifest.doc["seed"] = base.seed;
    manifest.doc["dataset"] = fingerprint_json(ds);
    manifest.doc["outputs"] = {
        {"candidates", a.to_stdout ? "-" : a.out_candidates}, {"best", a.out_best}, {"model", a.out_model}};
    manifest.save(secs);
    err << "best " << params.dump() << " score " << cv.candidates[cv.best_index].mean_score << '\n';
    return kOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    ModelFlags model;
    std::string suites = "linear";
    int trials = 3;
    long long n = 500;
    double noise = -1.0;
    int bignn_k = 100;
    int threads = 1;
    std::string out;
    std::string out_trials;
    std::string out_manifest;
};

int cmd_bench(const BenchArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    bench::BenchOptions opt;
    opt.barn = build_config(a.model);
    opt.seed = a.model.seed;
    opt.trials = a.trials;
    opt.n = a.n;
    if (a.noise >= 0.0) opt.noise = a.noise;
    opt.bignn_k = a.bignn_k;
    opt.threads = a.threads;
    opt.suites.clear();
    if (a.suites == "all") {
        opt.suites = bench::suite_names();
    } else {
        std::stringstream ss(a.suites);
        std::string s;
        while (std::getline(ss, s, ',')) {
            if (s.empty()) continue;
            if (std::find(bench::suite_names().begin(), bench::suite_names().end(), s) == bench::suite_names().end()) {
                throw UsageError("unknown suite '" + s + "'");
            }
            opt.suites.push_back(s);
        }
    }
    if (opt.suites.empty()) throw UsageError("no suites given");
    if (a.trials < 1) throw UsageError("--trials must be >= 1");
    if (a.n < 10) throw UsageError("--n must be >= 10");
    if (a.bignn_k < 1) throw UsageError("--bignn-k must be >= 1");

    const auto t0 = std::chrono::steady_clock::now();
    const bench::BenchResult res = bench::run_bench(opt);
    const double secs = seconds_since(t0);

    std::ostringstream summary;
    bench::write_summary_csv(summary, res.summary);
    if (a.out.empty()) {
        out << summary.str();
    } else {
        write_text(a.out, summary.str());
    }
    if (!a.out_trials.empty()) {
        std::ostringstream trials;
        bench::write_trials_csv(trials, res.trials);
        write_text(a.out_trials, trials.str());
    }
    std::string mpath = a.out_manifest;
    if (mpath.empty()) mpath = a.out.empty() ? "bench.manifest.json" : a.out + ".manifest.json";
    Manifest manifest = start_manifest("bench", args, mpath);
    manifest.doc["config"] = io::to_json(opt.barn);
    manifest.doc["seed"] = opt.seed;
    manifest.doc["suites"] = opt.suites;
    manifest.doc["trials"] = opt.trials;
    manifest.doc["outputs"] = {{"summary", a.out.empty() ? "-" : a.out}, {"trials", a.out_trials}};
    manifest.save(secs);
    err << res.trials.size() << " trial fits over " << opt.suites.size() << " suites in " << secs << " s\n";
    return kOk;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
    std::string suite = "linear";
    long long n = 500;
    int d = 3;
    double noise = -1.0;
    std::uint64_t seed = 0;
    std::string out = "data.csv";
    bool labels = false;
};

int cmd_gen(const GenArgs& a, const std::vector<std::string>& args, std::ostream&, std::ostream&) {
    if (a.n < 2) throw UsageError("--n must be >= 2");
    data::Dataset ds;
    if (a.suite == "linear" || a.suite == "random") {
        const double noise = a.noise >= 0.0 ? a.noise : bench::default_noise(a.suite);
        ds = data::gen_linear(a.n, a.d, noise, a.seed, a.suite == "random");
    } else {
        try {
            ds = bench::make_suite(a.suite, a.n, a.seed, a.noise >= 0.0 ? std::optional<double>(a.noise) : std::nullopt);
        } catch (const InputError& e) {
            throw UsageError(e.what());
        }
    }
    if (a.labels) {
        const double m = ds.y.mean();
        ds.y = (ds.y.array() > m).cast<double>().matrix();
    }
    std::ostringstream csv;
    data::write_csv(csv, ds);
    write_text(a.out, csv.str());
    Manifest manifest = start_manifest("gen", args, a.out + ".manifest.json");
    manifest.doc["seed"] = a.seed;
    manifest.doc["dataset"] = fingerprint_json(ds);
    manifest.doc["outputs"] = {{"data", a.out}};
    manifest.save(0.0);
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian additive regression networks: train, predict, classify, tune, bench", "barn"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Fit a regression ensemble");
    TrainArgs classify_args;
    auto* classify = app.add_subcommand("classify", "Fit a binary probit ensemble (labels 0/1)");
    for (auto [cmd, a] : {std::pair{train, &train_args}, std::pair{classify, &classify_args}}) {
        add_data_flags(cmd, a->data);
        add_model_flags(cmd, a->model);
        add_stop_flags(cmd, a->stop);
        cmd->add_option("--out-model", a->out_model, "Model JSON")->capture_default_str();
        cmd->add_option("--out-trace", a->out_trace, "Trace JSONL")->capture_default_str();
        cmd->add_option("--out-manifest", a->out_manifest, "Run manifest (default <out-model>.manifest.json)");
        cmd->add_flag("--stdout", a->to_stdout, "Write the trace to stdout");
    }

    PredictArgs predict_args;
    auto* pred = app.add_subcommand("predict", "Predict with a saved model");
    pred->add_option("--model", predict_args.model, "Model JSON")->required();
    add_data_flags(pred, predict_args.data);
    pred->add_option("--out-pred", predict_args.out_pred, "Predictions CSV")->capture_default_str();
    pred->add_option("--out-manifest", predict_args.out_manifest, "Run manifest");
    pred->add_flag("--proba", predict_args.proba, "Require a binary model (emit proba and z)");
    pred->add_flag("--stdout", predict_args.to_stdout, "Write predictions to stdout");

    TuneArgs tune_args;
    auto* tune = app.add_subcommand("tune", "Cross-validated hyperparameter search");
    add_data_flags(tune, tune_args.data);
    add_model_flags(tune, tune_args.model);
    tune->add_option("--task", tune_args.task, "regression or binary")
        ->check(CLI::IsMember({"regression", "binary"}))
        ->capture_default_str();
    tune->add_option("--grid", tune_args.grid, "Grid, e.g. \"l=1,2,3;p_grow=0.3,0.4\"");
    tune->add_option("--random", tune_args.random, "Distributions, e.g. \"l~poisson(2)\"");
    tune->add_option("--n-candidates", tune_args.n_candidates, "Random-search draws")->capture_default_str();
    tune->add_option("--folds", tune_args.folds, "Cross-validation folds")->capture_default_str();
    tune->add_option("--threads", tune_args.threads, "Worker threads (0 = all cores; BARN_THREADS caps)");
    tune->add_option("--out-candidates", tune_args.out_candidates, "Candidates CSV")->capture_default_str();
    tune->add_option("--out-best", tune_args.out_best, "Best-params JSON")->capture_default_str();
    tune->add_option("--out-model", tune_args.out_model, "Refit model JSON")->capture_default_str();
    tune->add_option("--out-manifest", tune_args.out_manifest, "Run manifest");
    tune->add_flag("--stdout", tune_args.to_stdout, "Write the candidates CSV to stdout");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Benchmark OLS, one big network and BARN");
    add_model_flags(bench, bench_args.model);
    bench->add_option("--suite", bench_args.suites, "Comma list of linear,friedman1,friedman2,friedman3,random or all")
        ->capture_default_str();
    bench->add_option("--trials", bench_args.trials, "Trials per suite")->capture_default_str();
    bench->add_option("--n", bench_args.n, "Rows per generated data set")->capture_default_str();
    bench->add_option("--noise", bench_args.noise, "Noise sd (default per suite)");
    bench->add_option("--bignn-k", bench_args.bignn_k, "Hidden units of the big network")->capture_default_str();
    bench->add_option("--threads", bench_args.threads, "Concurrent trials (BARN_THREADS caps)")->capture_default_str();
    bench->add_option("--out", bench_args.out, "Summary CSV (default stdout)");
    bench->add_option("--out-trials", bench_args.out_trials, "Per-trial CSV");
    bench->add_option("--out-manifest", bench_args.out_manifest, "Run manifest");

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "Write a synthetic data set as CSV");
    gen->add_option("--suite", gen_args.suite, "linear, random, friedman1, friedman2 or friedman3")
        ->capture_default_str();
    gen->add_option("--n", gen_args.n, "Rows")->capture_default_str();
    gen->add_option("--d", gen_args.d, "Features (linear/random)")->capture_default_str();
    gen->add_option("--noise", gen_args.noise, "Noise sd (default per suite)");
    gen->add_option("--seed", gen_args.seed, "Random seed")->capture_default_str();
    gen->add_option("--out", gen_args.out, "Output CSV")->capture_default_str();
    gen->add_flag("--labels", gen_args.labels, "Threshold the target at its mean into 0/1 labels");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kUsage;
    }

    try {
        if (train->parsed()) return cmd_train(Task::regression, train_args, args, out, err);
        if (classify->parsed()) return cmd_train(Task::binary, classify_args, args, out, err);
        if (pred->parsed()) return cmd_predict(predict_args, args, out, err);
        if (tune->parsed()) return cmd_tune(tune_args, args, out, err);
        if (bench->parsed()) return cmd_bench(bench_args, args, out, err);
        if (gen->parsed()) return cmd_gen(gen_args, args, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const TaskMismatch& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const TrainingError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const SamplerError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const InputError& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumeric;
    }
    return kUsage;
}

}  // namespace barn::cli
