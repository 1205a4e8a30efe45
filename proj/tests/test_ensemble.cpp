#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace barn;

namespace {

BarnConfig small_cfg(int nets = 5, int iters = 20, std::uint64_t seed = 1) {
    BarnConfig cfg;
    cfg.num_nets = nets;
    cfg.n_iter = iters;
    cfg.seed = seed;
    return cfg;
}

double ols_test_rmse(const data::Split& s) {
    return data::rmse(data::ols_fit(s.train).predict(s.test.X), s.test.y);
}

}  // namespace

TEST(BarnConfig, DefaultsAndValidation) {
    BarnConfig cfg;
    EXPECT_EQ(cfg.num_nets, 10);
    EXPECT_EQ(cfg.n_iter, 200);
    EXPECT_EQ(cfg.resolved_burn_in(), 100);
    EXPECT_EQ(cfg.heldout_fraction, 0.25);
    EXPECT_EQ(cfg.prior.lambda, 1.0);
    EXPECT_EQ(cfg.prior.p_grow, 0.4);
    cfg.burn_in = 200;
    EXPECT_THROW(cfg.validate(), InputError);
    cfg = BarnConfig{};
    cfg.num_nets = 0;
    EXPECT_THROW(cfg.validate(), InputError);
}

TEST(Fit, RejectsBadInputs) {
    Matrix X = Matrix::Ones(5, 2);
    Vector y = Vector::Zero(5);
    y[2] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(fit(X, y, small_cfg()), InputError);
    EXPECT_THROW(fit(Matrix::Ones(1, 2), Vector::Zero(1), small_cfg()), InputError);
    EXPECT_THROW(fit(X, Vector::Zero(4), small_cfg()), InputError);
}

TEST(Fit, ConstantTarget) {
    Rng rng(1);
    const Matrix X = oracle::random_matrix(60, 2, rng);
    const Vector y = Vector::Constant(60, 4.0);
    const FitResult r = fit(X, y, small_cfg(5, 10));
    const Vector pred = predict(r.model, X);
    EXPECT_LT(data::rmse(pred, y), 1e-2 * (4.0 + 1.0));
}

TEST(Fit, LinearOneDimensionalNearOls) {
    const data::Dataset ds = data::gen_linear(300, 1, 0.1, 3);
    const auto split = data::train_test_split(ds, 0.2, 3);
    BarnConfig cfg;
    cfg.seed = 3;
    cfg.n_iter = 100;
    const FitResult r = fit(split.train.X, split.train.y, cfg);
    const double barn = data::rmse(predict(r.model, split.test.X), split.test.y);
    EXPECT_LE(barn, 1.10 * ols_test_rmse(split));
}

TEST(Fit, DeterministicTraces) {
    const data::Dataset ds = data::gen_friedman(data::Friedman::F1, 80, 1.0, 4);
    const FitResult a = fit(ds.X, ds.y, small_cfg(4, 8, 11));
    const FitResult b = fit(ds.X, ds.y, small_cfg(4, 8, 11));
    EXPECT_EQ(a.trace, b.trace);
    for (std::size_t j = 0; j < a.model.nets.size(); ++j) EXPECT_TRUE(a.model.nets[j] == b.model.nets[j]);
    const FitResult c = fit(ds.X, ds.y, small_cfg(4, 8, 12));
    EXPECT_NE(a.trace, c.trace);
}

TEST(Fit, TraceInvariants) {
    const data::Dataset ds = data::gen_friedman(data::Friedman::F2, 100, 1.0, 5);
    const BarnConfig cfg = small_cfg(6, 15, 5);
    std::vector<SmallNet> before;
    int mismatches = 0;
    FitOptions opts;
    opts.observer = [&](const EnsembleState& s, const TraceRecord& rec, const SweepData& data) {
        if (before.empty()) {
            before.assign(s.nets.size(), SmallNet{});
        }
        (void)data;
        int changed = 0;
        for (std::size_t j = 0; j < s.nets.size(); ++j) changed += !(s.nets[j] == before[j]);
        if (rec.iter > 0 && changed != rec.ntrans) ++mismatches;
        before = s.nets;
    };
    const FitResult r = fit(ds.X, ds.y, cfg, {}, opts);
    ASSERT_EQ(r.trace.size(), 15u);
    EXPECT_EQ(mismatches, 0);
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
        const auto& rec = r.trace[i];
        EXPECT_EQ(rec.iter, static_cast<int>(i));
        ASSERT_EQ(rec.neuron_counts.size(), 6u);
        for (int k : rec.neuron_counts) EXPECT_GE(k, 1);
        EXPECT_GE(rec.ntrans, 0);
        EXPECT_LE(rec.ntrans, 6);
        EXPECT_GT(rec.sigma, 0.0);
        EXPECT_FALSE(rec.val_rmse.has_value());
    }
}

TEST(Fit, CacheMatchesBruteForceEveryIteration) {
    const data::Dataset ds = data::gen_friedman(data::Friedman::F1, 120, 1.0, 6);
    BarnConfig cfg = small_cfg(5, 20, 6);
    cfg.evidence_split = EvidenceSplit::heldout;
    double worst = 0.0;
    long long oracle_calls = 0;
    FitOptions opts;
    opts.X_val = ds.X.topRows(30);
    opts.y_val = ds.y.head(30);
    opts.observer = [&](const EnsembleState& s, const TraceRecord&, const SweepData& data) {
        worst = std::max(worst, (s.train.sum - diagnostics::brute_force_sum(s.nets, data.X_train)).cwiseAbs().maxCoeff());
        worst = std::max(worst,
                         (s.heldout->sum - diagnostics::brute_force_sum(s.nets, *data.X_heldout)).cwiseAbs().maxCoeff());
        worst = std::max(
            worst, (s.validation->sum - diagnostics::brute_force_sum(s.nets, *data.X_validation)).cwiseAbs().maxCoeff());
        oracle_calls += 3;
    };
    const long long start = diagnostics::full_recompute_count().load();
    fit(ds.X, ds.y, cfg, {}, opts);
    EXPECT_LT(worst, 1e-8);
    EXPECT_EQ(diagnostics::full_recompute_count().load() - start, oracle_calls);

    // Without oracles the counter does not move.
    const long long before = diagnostics::full_recompute_count().load();
    fit(ds.X, ds.y, small_cfg(5, 10, 7));
    EXPECT_EQ(diagnostics::full_recompute_count().load(), before);
}

TEST(Fit, HeldoutSplitRecordsValidationError) {
    const data::Dataset ds = data::gen_linear(100, 2, 0.5, 8);
    BarnConfig cfg = small_cfg(3, 5, 8);
    cfg.evidence_split = EvidenceSplit::heldout;
    const FitResult r = fit(ds.X, ds.y, cfg);
    EXPECT_EQ(r.heldout_rows.size(), 25u);
    EXPECT_EQ(r.train_rows.size(), 75u);
    for (const auto& rec : r.trace) EXPECT_TRUE(rec.val_rmse.has_value());
    std::vector<Eigen::Index> all = r.train_rows;
    all.insert(all.end(), r.heldout_rows.begin(), r.heldout_rows.end());
    std::sort(all.begin(), all.end());
    for (Eigen::Index i = 0; i < 100; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)], i);
}

TEST(Sweep, SingletonResidualIsTarget) {
    const data::Dataset ds = data::gen_linear(40, 2, 0.2, 9);
    BarnConfig cfg = small_cfg(1, 5, 9);
    double worst = 0.0;
    FitOptions opts;
    Vector y_internal;
    opts.hooks.on_residual = [&](std::size_t, const Vector& r) {
        // The internal target is standardized; reconstruct it from the raw y.
        const double mean = ds.y.mean();
        const double sd = std::sqrt((ds.y.array() - mean).square().mean());
        worst = std::max(worst, (r - ((ds.y.array() - mean) / sd).matrix()).cwiseAbs().maxCoeff());
    };
    fit(ds.X, ds.y, cfg, {}, opts);
    EXPECT_LT(worst, 1e-12);
}

TEST(Sweep, ForcedRejectKeepsState) {
    const data::Dataset ds = data::gen_friedman(data::Friedman::F1, 60, 1.0, 10);
    BarnConfig cfg = small_cfg(4, 6, 10);
    FitOptions opts;
    opts.hooks.acceptor = [](double, Rng&) { return false; };
    Vector first_sum;
    bool unchanged = true;
    opts.observer = [&](const EnsembleState& s, const TraceRecord& rec, const SweepData&) {
        EXPECT_EQ(rec.ntrans, 0);
        if (first_sum.size() == 0) first_sum = s.train.sum;
        unchanged = unchanged && s.train.sum == first_sum;
    };
    const FitResult r = fit(ds.X, ds.y, cfg, {}, opts);
    EXPECT_TRUE(unchanged);
    for (const auto& rec : r.trace) {
        for (int k : rec.neuron_counts) EXPECT_EQ(k, 1);
    }
}

TEST(Sweep, ForcedAcceptTakesEveryProposal) {
    const data::Dataset ds = data::gen_friedman(data::Friedman::F1, 60, 1.0, 11);
    FitOptions opts;
    opts.hooks.acceptor = [](double, Rng&) { return true; };
    const FitResult r = fit(ds.X, ds.y, small_cfg(4, 6, 11), {}, opts);
    for (const auto& rec : r.trace) EXPECT_EQ(rec.ntrans, 4);
}

TEST(Predict, MatchesCacheOnTrainingRows) {
    const data::Dataset ds = data::gen_friedman(data::Friedman::F3, 80, 0.05, 12);
    const FitResult r = fit(ds.X, ds.y, small_cfg(4, 10, 12));
    const Vector pred = predict(r.model, ds.X);
    const Vector cached = r.model.scaling.invert_y(r.state.train.sum);
    EXPECT_LT((pred - cached).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Predict, BiasOnlyNetsGiveConstant) {
    Model m;
    m.scaling.x_means = Vector::Zero(2);
    m.scaling.x_sds = Vector::Ones(2);
    for (double b : {0.5, 1.0, -0.25}) {
        SmallNet net = SmallNet::zeros(1, 2);
        net.b2 = b;
        m.nets.push_back(net);
    }
    Rng rng(13);
    const Vector out = predict(m, oracle::random_matrix(5, 2, rng));
    for (Eigen::Index i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 1.25);
}

TEST(Predict, DuplicatedRowsGiveDuplicatedOutputs) {
    const data::Dataset ds = data::gen_linear(50, 3, 0.1, 14);
    const FitResult r = fit(ds.X, ds.y, small_cfg(3, 5, 14));
    Matrix X(4, 3);
    X.row(0) = ds.X.row(3);
    X.row(1) = ds.X.row(7);
    X.row(2) = ds.X.row(3);
    X.row(3) = ds.X.row(7);
    const Vector out = predict(r.model, X);
    EXPECT_EQ(out[0], out[2]);
    EXPECT_EQ(out[1], out[3]);
}

TEST(Predict, ColumnMismatchThrows) {
    const data::Dataset ds = data::gen_linear(30, 3, 0.1, 15);
    const FitResult r = fit(ds.X, ds.y, small_cfg(2, 2, 15));
    EXPECT_THROW(predict(r.model, Matrix::Zero(3, 2)), InputError);
}

TEST(Predict, StandardizationRoundTrip) {
    data::Dataset ds = data::gen_friedman(data::Friedman::F2, 200, 10.0, 16);
    const FitResult r = fit(ds.X, ds.y, small_cfg(5, 20, 16));
    const Vector pred = predict(r.model, ds.X);
    const double sd_y = data::stddev(ds.y);
    EXPECT_NEAR(pred.mean(), ds.y.mean(), 0.1 * sd_y);
    EXPECT_NEAR(data::stddev(pred), sd_y, 0.25 * sd_y);
}

TEST(Predict, ReturnsLastState) {
    const data::Dataset ds = data::gen_linear(40, 2, 0.1, 17);
    const FitResult r = fit(ds.X, ds.y, small_cfg(3, 7, 17));
    ASSERT_EQ(r.model.nets.size(), r.state.nets.size());
    for (std::size_t j = 0; j < r.model.nets.size(); ++j) {
        EXPECT_TRUE(r.model.nets[j] == r.state.nets[j]);
        EXPECT_EQ(r.model.nets[j].k(), r.trace.back().neuron_counts[j]);
    }
    EXPECT_EQ(r.model.sigma, r.trace.back().sigma);
}

TEST(BatchMeans, ConstantAndHandComputed) {
    const std::vector<double> c(20, 2.5);
    const auto bc = batch_means(c, 4);
    EXPECT_EQ(bc.mean, 2.5);
    EXPECT_EQ(bc.se, 0.0);
    const std::vector<double> v = {1, 2, 3, 4};
    const auto bv = batch_means(v, 2);
    EXPECT_DOUBLE_EQ(bv.mean, 2.5);
    EXPECT_DOUBLE_EQ(bv.se, 1.0);
}

TEST(BatchMeans, DropsRemainderAndValidates) {
    const std::vector<double> v = {1, 2, 3, 4, 100};
    EXPECT_DOUBLE_EQ(batch_means(v, 2).mean, 2.5);
    EXPECT_THROW(batch_means(v, 1), InputError);
    EXPECT_THROW(batch_means(std::vector<double>{1.0, 2.0, 3.0}, 4), InputError);
}

TEST(BatchMeans, IidNormalMeanWithinThreeSe) {
    Rng rng(18);
    std::normal_distribution<double> n01;
    std::vector<double> v(10000);
    for (auto& x : v) x = n01(rng);
    const auto b = batch_means(v, 50);
    EXPECT_LT(std::abs(b.mean), 3.0 * b.se);
}

TEST(Serialize, ModelRoundTripIsBitExact) {
    const data::Dataset ds = data::gen_friedman(data::Friedman::F1, 60, 1.0, 19);
    const FitResult r = fit(ds.X, ds.y, small_cfg(3, 5, 19));
    const Model back = io::model_from_json(nlohmann::json::parse(io::to_json(r.model).dump()));
    EXPECT_EQ(back.task, r.model.task);
    EXPECT_EQ(back.sigma, r.model.sigma);
    EXPECT_EQ(back.scaling.y_mean, r.model.scaling.y_mean);
    EXPECT_EQ(back.scaling.y_sd, r.model.scaling.y_sd);
    EXPECT_TRUE(back.scaling.x_means == r.model.scaling.x_means);
    for (std::size_t j = 0; j < back.nets.size(); ++j) EXPECT_TRUE(back.nets[j] == r.model.nets[j]);
    EXPECT_TRUE(predict(back, ds.X) == predict(r.model, ds.X));
    EXPECT_EQ(io::to_json(back).dump(), io::to_json(r.model).dump());
}

TEST(Serialize, TraceRoundTrip) {
    const data::Dataset ds = data::gen_linear(50, 2, 0.1, 20);
    BarnConfig cfg = small_cfg(3, 4, 20);
    cfg.evidence_split = EvidenceSplit::heldout;
    const FitResult r = fit(ds.X, ds.y, cfg);
    std::stringstream ss;
    io::write_trace(ss, r.trace);
    EXPECT_EQ(io::read_trace(ss), r.trace);
}

TEST(Serialize, MalformedModelIsInputError) {
    EXPECT_THROW(io::model_from_json(nlohmann::json::parse(R"({"version": 2})")), InputError);
    EXPECT_THROW(io::load_model("/nonexistent/model.json"), InputError);
}
