#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace barn;

namespace {

TrainConfig no_reg() {
    TrainConfig cfg;
    cfg.reg_l1 = 0.0;
    cfg.reg_l2 = 0.0;
    return cfg;
}

}  // namespace

TEST(Forward, BiasOnlyNetOutputsBias) {
    SmallNet net = SmallNet::zeros(3, 2);
    net.b2 = 3.5;
    Rng rng(1);
    const Vector out = forward(net, oracle::random_matrix(7, 2, rng));
    for (Eigen::Index i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 3.5);
}

TEST(Forward, ReluGating) {
    SmallNet net = SmallNet::zeros(1, 1);
    net.W1(0, 0) = 1.0;
    net.w2[0] = 2.0;
    Matrix X(2, 1);
    X << -1.0, 2.0;
    const Vector out = forward(net, X);
    EXPECT_EQ(out[0], 0.0);
    EXPECT_EQ(out[1], 4.0);
}

TEST(Forward, MatchesScalarLoop) {
    Rng rng(2);
    for (auto act : {Activation::relu, Activation::tanh}) {
        for (int trial = 0; trial < 20; ++trial) {
            const SmallNet net = oracle::random_net(1 + trial % 5, 1 + trial % 4, act, rng);
            const Matrix X = oracle::random_matrix(5, net.d(), rng);
            const Vector out = forward(net, X);
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                EXPECT_NEAR(out[i], oracle::forward_row(net, X.row(i).transpose()), 1e-12);
            }
        }
    }
}

TEST(Forward, IsPure) {
    Rng rng(3);
    const SmallNet net = oracle::random_net(4, 3, Activation::relu, rng);
    const Matrix X = oracle::random_matrix(20, 3, rng);
    const Vector a = forward(net, X);
    const Vector b = forward(net, X);
    EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())));
}

TEST(Forward, ColumnMismatchThrows) {
    const SmallNet net = SmallNet::zeros(2, 3);
    EXPECT_THROW(forward(net, Matrix::Zero(4, 2)), InputError);
}

TEST(Loss, PerfectFitHasZeroLossAndGradient) {
    Rng rng(4);
    const SmallNet net = oracle::random_net(3, 2, Activation::tanh, rng);
    const Matrix X = oracle::random_matrix(10, 2, rng);
    const Vector y = forward(net, X);
    const LossGrad lg = loss_and_grad(net, X, y, no_reg());
    EXPECT_EQ(lg.loss, 0.0);
    EXPECT_EQ(lg.grad.params().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Loss, ClosedFormPenalty) {
    SmallNet net = SmallNet::zeros(2, 2);
    net.w2[0] = 2.0;
    Rng rng(5);
    const Matrix X = oracle::random_matrix(6, 2, rng);
    const LossGrad lg = loss_and_grad(net, X, Vector::Zero(6), TrainConfig{});
    EXPECT_NEAR(lg.loss, 0.06, 1e-15);
}

TEST(Loss, OutputBiasIsNotPenalized) {
    SmallNet net = SmallNet::zeros(1, 1);
    net.b2 = 5.0;
    Matrix X = Matrix::Ones(3, 1);
    const LossGrad lg = loss_and_grad(net, X, Vector::Constant(3, 5.0), TrainConfig{});
    EXPECT_EQ(lg.loss, 0.0);
}

TEST(Loss, EmptyDataThrows) {
    const SmallNet net = SmallNet::zeros(1, 2);
    EXPECT_THROW(loss_and_grad(net, Matrix(0, 2), Vector(0), TrainConfig{}), InputError);
}

TEST(Loss, MatchesScalarOracle) {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const SmallNet net = oracle::random_net(1 + trial % 4, 2, trial % 2 ? Activation::tanh : Activation::relu, rng);
        const Matrix X = oracle::random_matrix(8, 2, rng);
        const Vector y = oracle::random_matrix(8, 1, rng).col(0);
        TrainConfig cfg;
        cfg.reg_l1 = 0.03;
        cfg.reg_l2 = 0.02;
        EXPECT_NEAR(loss_and_grad(net, X, y, cfg).loss, oracle::loss(net, X, y, 0.03, 0.02), 1e-12);
    }
}

TEST(Loss, GradientMatchesFiniteDifferences) {
    Rng rng(7);
    int checked = 0;
    while (checked < 100) {
        const Activation act = checked % 2 ? Activation::tanh : Activation::relu;
        const SmallNet net = oracle::random_net(1 + checked % 5, 1 + checked % 3, act, rng);
        const Matrix X = oracle::random_matrix(12, net.d(), rng);
        const Vector y = oracle::random_matrix(12, 1, rng).col(0);
        if (!oracle::away_from_kinks(net, X, 1e-3)) continue;
        TrainConfig cfg;
        const Vector g = loss_and_grad(net, X, y, cfg).grad.params();
        const Vector fd = oracle::fd_gradient(net, X, y, cfg.reg_l1, cfg.reg_l2);
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            const double scale = std::max({std::abs(g[i]), std::abs(fd[i]), 1e-6});
            EXPECT_LT(std::abs(g[i] - fd[i]) / scale, 1e-4) << "param " << i;
        }
        ++checked;
    }
}

TEST(Loss, SubgradientIsZeroAtKinks) {
    SmallNet net = SmallNet::zeros(1, 1);
    Matrix X = Matrix::Ones(2, 1);
    TrainConfig cfg;
    cfg.reg_l2 = 0.0;
    const LossGrad lg = loss_and_grad(net, X, Vector::Zero(2), cfg);
    EXPECT_EQ(lg.grad.params().cwiseAbs().maxCoeff(), 0.0);
}

TEST(SelectSolver, Thresholds) {
    EXPECT_EQ(select_solver(3, 10, 500), Solver::quasi_newton);
    EXPECT_EQ(select_solver(200, 100, 500), Solver::adam);
    // 111 * (7 + 2) + 1 = 1000
    EXPECT_EQ(select_solver(111, 7, 10000), Solver::quasi_newton);
    EXPECT_EQ(select_solver(111, 7, 10001), Solver::adam);
    EXPECT_EQ(select_solver(112, 7, 10000), Solver::adam);
}

TEST(Train, AlreadyOptimalNetIsUnchanged) {
    Rng rng(8);
    const SmallNet net = oracle::random_net(2, 2, Activation::tanh, rng);
    const Matrix X = oracle::random_matrix(30, 2, rng);
    const Vector y = forward(net, X);
    const SmallNet out = train(net, X, y, no_reg(), rng);
    EXPECT_LT((out.params() - net.params()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Train, FitsLinearDataWithTanh) {
    Rng rng(9);
    Matrix X(100, 1);
    for (int i = 0; i < 100; ++i) X(i, 0) = -1.0 + 2.0 * i / 99.0;
    const Vector y = 3.0 * X.col(0);
    const SmallNet init = init_net(2, 1, Activation::tanh, 0.0, rng);
    TrainConfig cfg = no_reg();
    cfg.max_epochs = 500;
    const SmallNet net = train(init, X, y, cfg, rng);
    const double rmse = std::sqrt((forward(net, X) - y).squaredNorm() / 100.0);
    const double sd = std::sqrt((y.array() - y.mean()).square().mean());
    EXPECT_LT(rmse, 0.1 * sd);
}

TEST(Train, QuasiNewtonNeverIncreasesLoss) {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const SmallNet init = oracle::random_net(1 + trial % 4, 3, Activation::relu, rng);
        const Matrix X = oracle::random_matrix(40, 3, rng);
        const Vector y = oracle::random_matrix(40, 1, rng).col(0);
        TrainConfig cfg;
        cfg.solver = Solver::quasi_newton;
        cfg.max_epochs = 50;
        const SmallNet out = train(init, X, y, cfg, rng);
        EXPECT_LE(loss_and_grad(out, X, y, cfg).loss, loss_and_grad(init, X, y, cfg).loss);
        EXPECT_TRUE(out.finite());
    }
}

TEST(Train, AdamDoesNotDiverge) {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const SmallNet init = oracle::random_net(3, 2, Activation::tanh, rng);
        const Matrix X = oracle::random_matrix(300, 2, rng);
        const Vector y = oracle::random_matrix(300, 1, rng).col(0);
        TrainConfig cfg;
        cfg.solver = Solver::adam;
        cfg.max_epochs = 30;
        const SmallNet out = train(init, X, y, cfg, rng);
        EXPECT_LE(loss_and_grad(out, X, y, cfg).loss, 2.0 * loss_and_grad(init, X, y, cfg).loss);
        EXPECT_TRUE(out.finite());
    }
}

TEST(Train, DeterministicGivenSeed) {
    Rng data_rng(12);
    const Matrix X = oracle::random_matrix(250, 3, data_rng);
    const Vector y = oracle::random_matrix(250, 1, data_rng).col(0);
    for (Solver s : {Solver::quasi_newton, Solver::adam}) {
        TrainConfig cfg;
        cfg.solver = s;
        Rng a(99);
        Rng b(99);
        const SmallNet na = train(init_net(4, 3, Activation::relu, 0.0, a), X, y, cfg, a);
        const SmallNet nb = train(init_net(4, 3, Activation::relu, 0.0, b), X, y, cfg, b);
        EXPECT_TRUE(na == nb);
    }
}

TEST(Train, NonFiniteDataRejected) {
    Rng rng(13);
    Matrix X = Matrix::Ones(3, 1);
    Vector y = Vector::Zero(3);
    y[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(train(SmallNet::zeros(1, 1), X, y, TrainConfig{}, rng), InputError);
}

TEST(Train, OverflowingLossRaisesTrainingError) {
    Rng rng(14);
    SmallNet net = SmallNet::zeros(1, 1);
    net.W1(0, 0) = 1e200;
    net.w2[0] = 1e200;
    Matrix X = Matrix::Constant(3, 1, 1e200);
    try {
        train(net, X, Vector::Zero(3), TrainConfig{}, rng);
        FAIL() << "expected TrainingError";
    } catch (const TrainingError& e) {
        EXPECT_EQ(e.last_finite().k(), 1);
    }
}

TEST(Donate, SameSizeIsIdentity) {
    Rng rng(15);
    const SmallNet net = oracle::random_net(3, 2, Activation::relu, rng);
    EXPECT_TRUE(donate_weights(net, 3, rng) == net);
}

TEST(Donate, ShrinkDropsSmallestOutputWeight) {
    Rng rng(16);
    SmallNet net = oracle::random_net(2, 2, Activation::relu, rng);
    net.w2 << 5.0, 0.1;
    const SmallNet out = donate_weights(net, 1, rng);
    ASSERT_EQ(out.k(), 1);
    EXPECT_EQ(out.w2[0], 5.0);
    EXPECT_TRUE(out.W1.row(0) == net.W1.row(0));
    EXPECT_EQ(out.b2, net.b2);
}

TEST(Donate, ShrinkTieTakesLowestIndex) {
    Rng rng(17);
    SmallNet net = oracle::random_net(3, 1, Activation::relu, rng);
    net.w2 << 1.0, -0.5, 0.5;
    const SmallNet out = donate_weights(net, 2, rng);
    EXPECT_EQ(out.w2[0], 1.0);
    EXPECT_EQ(out.w2[1], 0.5);
    EXPECT_EQ(out.W1(1, 0), net.W1(2, 0));
}

TEST(Donate, GrowCopiesOldNeurons) {
    Rng rng(18);
    const SmallNet net = oracle::random_net(3, 4, Activation::tanh, rng);
    const SmallNet out = donate_weights(net, 4, rng);
    ASSERT_EQ(out.k(), 4);
    EXPECT_TRUE(out.W1.topRows(3) == net.W1);
    EXPECT_TRUE(out.b1.head(3) == net.b1);
    EXPECT_TRUE(out.w2.head(3) == net.w2);
    EXPECT_EQ(out.b2, net.b2);
    EXPECT_LT(out.W1.row(3).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Donate, GrowThenShrinkRoundTrips) {
    Rng rng(19);
    SmallNet net = oracle::random_net(1, 2, Activation::relu, rng);
    net.w2[0] = 1.5;
    const SmallNet grown = donate_weights(net, 2, rng);
    ASSERT_LT(std::abs(grown.w2[1]), std::abs(grown.w2[0]));
    EXPECT_TRUE(donate_weights(grown, 1, rng) == net);
}

TEST(Donate, GrowWithZeroOutputWeightPreservesPredictions) {
    Rng rng(20);
    for (int trial = 0; trial < 20; ++trial) {
        const SmallNet net = oracle::random_net(1 + trial % 4, 3, Activation::relu, rng);
        SmallNet grown = donate_weights(net, net.k() + 1, rng);
        grown.w2[net.k()] = 0.0;
        const Matrix X = oracle::random_matrix(15, 3, rng);
        const Vector a = forward(net, X);
        const Vector b = forward(grown, X);
        EXPECT_TRUE(a == b);
    }
}

TEST(Donate, RejectsNonPositiveSize) {
    Rng rng(21);
    EXPECT_THROW(donate_weights(SmallNet::zeros(2, 2), 0, rng), InputError);
}

TEST(Params, FlatRoundTrip) {
    Rng rng(22);
    const SmallNet net = oracle::random_net(3, 2, Activation::relu, rng);
    SmallNet copy = SmallNet::zeros(3, 2);
    copy.set_params(net.params());
    EXPECT_TRUE(copy == net);
    EXPECT_EQ(net.num_params(), 3 * (2 + 2) + 1);
}
