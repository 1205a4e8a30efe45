#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace barn;
using namespace barn::data;

TEST(Csv, ExtractsTargetColumn) {
    std::istringstream in("a,y,b\n1,10,2\n3,30,4\n5,50,6\n");
    const Dataset ds = parse_csv(in, "y");
    ASSERT_EQ(ds.rows(), 3);
    ASSERT_EQ(ds.cols(), 2);
    EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(ds.X(1, 0), 3.0);
    EXPECT_EQ(ds.X(1, 1), 4.0);
    EXPECT_EQ(ds.y[2], 50.0);
}

TEST(Csv, NoHeaderUsesIndex) {
    std::istringstream in("1,2,3\n4,5,6\n");
    const Dataset ds = parse_csv(in, "0", false);
    EXPECT_EQ(ds.y[1], 4.0);
    EXPECT_EQ(ds.X(1, 1), 6.0);
    EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"x1", "x2"}));
}

TEST(Csv, QuotedFieldsAndWhitespace) {
    std::istringstream in("\"feat, one\",y\n \"1.5\" , 2\n");
    const Dataset ds = parse_csv(in, "y");
    EXPECT_EQ(ds.feature_names[0], "feat, one");
    EXPECT_EQ(ds.X(0, 0), 1.5);
}

TEST(Csv, BlankCellNamesTheRow) {
    std::istringstream in("a,y\n1,2\n3,\n");
    try {
        parse_csv(in, "y");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Csv, Errors) {
    std::istringstream bad_num("a,y\n1,zz\n");
    EXPECT_THROW(parse_csv(bad_num, "y"), DataError);
    std::istringstream missing("a,b\n1,2\n");
    EXPECT_THROW(parse_csv(missing, "y"), DataError);
    std::istringstream empty("");
    EXPECT_THROW(parse_csv(empty, "y"), DataError);
    std::istringstream ragged("a,y\n1,2,3\n");
    EXPECT_THROW(parse_csv(ragged, "y"), DataError);
    std::istringstream nan("a,y\n1,nan\n");
    EXPECT_THROW(parse_csv(nan, "y"), DataError);
    EXPECT_THROW(load_csv("/nonexistent/file.csv", "y"), DataError);
}

TEST(Csv, WriteThenLoadRoundTrip) {
    const Dataset ds = gen_friedman(Friedman::F2, 25, 3.0, 1);
    std::stringstream ss;
    write_csv(ss, ds);
    const Dataset back = parse_csv(ss, ds.target_name);
    ASSERT_EQ(back.rows(), ds.rows());
    ASSERT_EQ(back.cols(), ds.cols());
    EXPECT_LT((back.X - ds.X).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((back.y - ds.y).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(back.X == ds.X);  // %.17g is exact
    EXPECT_EQ(fingerprint(back), fingerprint(ds));
}

TEST(Csv, FeatureOnlyParsingDropsTarget) {
    std::istringstream in("a,y,b\n1,10,2\n3,30,4\n");
    const Matrix X = parse_features_csv(in, true, "y");
    ASSERT_EQ(X.cols(), 2);
    EXPECT_EQ(X(1, 1), 4.0);
    std::istringstream plain("1,2\n3,4\n");
    EXPECT_EQ(parse_features_csv(plain, false).rows(), 2);
}

TEST(Split, SizesDisjointAndSeeded) {
    const Dataset ds = gen_linear(10, 2, 0.1, 2);
    const Split s = train_test_split(ds, 0.2, 3);
    EXPECT_EQ(s.train.rows(), 8);
    EXPECT_EQ(s.test.rows(), 2);
    Rng rng(4);
    std::uniform_int_distribution<int> nd(5, 200);
    std::uniform_real_distribution<double> fd(0.05, 0.6);
    for (int t = 0; t < 50; ++t) {
        const int n = nd(rng);
        const double frac = fd(rng);
        Dataset d = gen_linear(n, 1, 0.0, static_cast<std::uint64_t>(t));
        for (int i = 0; i < n; ++i) d.y[i] = i;  // row ids
        const Split sp = train_test_split(d, frac, static_cast<std::uint64_t>(t));
        EXPECT_LE(std::abs(static_cast<double>(sp.test.rows()) - frac * n), 1.0);
        std::set<double> ids(sp.train.y.data(), sp.train.y.data() + sp.train.y.size());
        for (Eigen::Index i = 0; i < sp.test.y.size(); ++i) EXPECT_EQ(ids.count(sp.test.y[i]), 0u);
        EXPECT_EQ(sp.train.rows() + sp.test.rows(), n);
    }
    EXPECT_TRUE(train_test_split(ds, 0.2, 3).test.X == s.test.X);
}

TEST(GenLinear, NoiselessOlsRecoversBeta) {
    const Dataset ds = gen_linear(50, 4, 0.0, 5);
    const OlsModel m = ols_fit(ds);
    // Normal-equations oracle on the same data via QR.
    Matrix A(50, 5);
    A.col(0).setOnes();
    A.rightCols(4) = ds.X;
    const Vector beta = A.colPivHouseholderQr().solve(ds.y);
    EXPECT_LT((m.coef - beta).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(std::abs(m.coef[0]), 1e-8);
    EXPECT_LT((m.predict(ds.X) - ds.y).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(GenLinear, ShapeAndReproducibility) {
    const Dataset a = gen_linear(30, 1, 0.5, 6);
    EXPECT_EQ(a.cols(), 1);
    EXPECT_EQ(a.rows(), 30);
    EXPECT_GE(a.X.minCoeff(), 0.0);
    EXPECT_LE(a.X.maxCoeff(), 1.0);
    EXPECT_EQ(fingerprint(a), fingerprint(gen_linear(30, 1, 0.5, 6)));
    EXPECT_NE(fingerprint(a), fingerprint(gen_linear(30, 1, 0.5, 7)));
    const Dataset r = gen_linear(30, 3, 0.0, 8, true);
    EXPECT_EQ(r.y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Friedman, F1PlugIn) {
    const std::vector<double> x(10, 0.5);
    EXPECT_NEAR(friedman_target(Friedman::F1, x), 14.5710678, 1e-7);
}

TEST(Friedman, RangesAndShapes) {
    const Dataset f1 = gen_friedman(Friedman::F1, 200, 0.0, 9);
    EXPECT_EQ(f1.cols(), 10);
    EXPECT_GE(f1.X.minCoeff(), 0.0);
    EXPECT_LE(f1.X.maxCoeff(), 1.0);
    const Dataset f2 = gen_friedman(Friedman::F2, 200, 0.0, 9);
    EXPECT_EQ(f2.cols(), 4);
    EXPECT_GE(f2.X.col(1).minCoeff(), 40.0 * std::numbers::pi);
    EXPECT_LE(f2.X.col(1).maxCoeff(), 560.0 * std::numbers::pi);
    EXPECT_GE(f2.X.col(3).minCoeff(), 1.0);
    EXPECT_LE(f2.X.col(3).maxCoeff(), 11.0);
    const Dataset f3 = gen_friedman(Friedman::F3, 500, 0.0, 9);
    EXPECT_GE(f3.X.col(0).minCoeff(), 0.01);
    EXPECT_GT(f3.y.minCoeff(), -std::numbers::pi / 2);
    EXPECT_LT(f3.y.maxCoeff(), std::numbers::pi / 2);
    for (Eigen::Index i = 0; i < 20; ++i) {
        std::vector<double> row(4);
        for (int j = 0; j < 4; ++j) row[static_cast<std::size_t>(j)] = f2.X(i, j);
        const double t = row[1] * row[2] - 1.0 / (row[1] * row[3]);
        EXPECT_NEAR(f2.y[i], std::sqrt(row[0] * row[0] + t * t), 1e-9);
    }
    EXPECT_EQ(fingerprint(f3), fingerprint(gen_friedman(Friedman::F3, 500, 0.0, 9)));
    EXPECT_EQ(friedman_from_string("friedman2"), Friedman::F2);
    EXPECT_THROW(friedman_from_string("F4"), InputError);
}

TEST(Ols, TwoPointsGiveLineThroughBoth) {
    Matrix X(2, 1);
    X << 1.0, 3.0;
    Vector y(2);
    y << 2.0, 8.0;
    const OlsModel m = ols_fit(X, y);
    EXPECT_NEAR(m.coef[0], -1.0, 1e-10);
    EXPECT_NEAR(m.coef[1], 3.0, 1e-10);
}

TEST(Ols, MatchesGradientDescentOracle) {
    Rng rng(10);
    const Matrix X = oracle::random_matrix(40, 3, rng);
    const Vector y = oracle::random_matrix(40, 1, rng).col(0);
    const OlsModel m = ols_fit(X, y);
    Matrix A(40, 4);
    A.col(0).setOnes();
    A.rightCols(3) = X;
    Vector w = Vector::Zero(4);
    const double step = 1.0 / (A.transpose() * A).eigenvalues().real().maxCoeff();
    for (int it = 0; it < 200000; ++it) {
        const Vector g = A.transpose() * (A * w - y);
        if (g.norm() < 1e-13) break;
        w -= step * g;
    }
    EXPECT_LT((m.coef - w).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Ols, SingularSystemStillSolves) {
    Rng rng(11);
    Matrix X(20, 2);
    X.col(0) = oracle::random_matrix(20, 1, rng).col(0);
    X.col(1) = X.col(0);
    const Vector y = 2.0 * X.col(0);
    const OlsModel m = ols_fit(X, y);
    EXPECT_TRUE(m.coef.allFinite());
    EXPECT_LT((m.predict(X) - y).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Ols, FeatureOrderInvariant) {
    const Dataset ds = gen_friedman(Friedman::F1, 100, 1.0, 12);
    Matrix P = ds.X.rowwise().reverse();
    EXPECT_LT((ols_fit(ds.X, ds.y).predict(ds.X) - ols_fit(P, ds.y).predict(P)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BigNN, ConstantTarget) {
    Dataset ds = gen_linear(50, 2, 0.0, 13);
    ds.y.setConstant(7.0);
    const BigNN m = bignn_fit(ds, 20);
    EXPECT_LT(rmse(m.predict(ds.X), ds.y), 1e-3);
}

TEST(BigNN, DeterministicAndBeatsSdOnF1) {
    const Dataset ds = gen_friedman(Friedman::F1, 400, 1.0, 14);
    const Split s = train_test_split(ds, 0.2, 14);
    const BigNN a = bignn_fit(s.train, 100, TrainConfig{}, 3);
    const BigNN b = bignn_fit(s.train, 100, TrainConfig{}, 3);
    EXPECT_TRUE(a.net == b.net);
    EXPECT_LT(rmse(a.predict(s.test.X), s.test.y), stddev(s.test.y));
}

TEST(Standardization, RoundTripIdentity) {
    const Dataset ds = gen_friedman(Friedman::F2, 60, 5.0, 15);
    const Eigen::Ref<const Vector> yref(ds.y);
    const Standardization st = fit_standardization(ds.X, &yref, true);
    EXPECT_LT((st.invert_y(st.apply_y(ds.y)) - ds.y).cwiseAbs().maxCoeff(), 1e-12 * ds.y.cwiseAbs().maxCoeff());
    const Matrix Xs = st.apply_x(ds.X);
    for (Eigen::Index j = 0; j < Xs.cols(); ++j) {
        EXPECT_NEAR(Xs.col(j).mean(), 0.0, 1e-12);
        EXPECT_NEAR(stddev(Xs.col(j)), 1.0, 1e-12);
    }
    // Constant columns are left unscaled rather than divided by zero.
    Matrix C = Matrix::Ones(5, 1);
    const Standardization sc = fit_standardization(C, nullptr, true);
    EXPECT_TRUE(sc.apply_x(C).allFinite());
}
