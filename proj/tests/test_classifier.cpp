#include <gtest/gtest.h>

#include <cmath>

#include "evoaug/classifier.hpp"
#include "evoaug/errors.hpp"
#include "support/oracles.hpp"

using namespace evoaug;

TEST(SoftmaxObjective, HandComputedTwoByTwo) {
    SoftmaxHead h = SoftmaxHead::zeros(2, 2);
    h.weights << 1, 0, 0, 1;
    Eigen::MatrixXd x(2, 2);
    x << 1, 0, 0, 1;
    const std::vector<int> y{0, 1};
    const double q = 1.0 / (1.0 + std::exp(1.0));
    const auto v = softmax_objective(h, x, y, 0.0);
    EXPECT_NEAR(v.loss, std::log(1.0 + std::exp(-1.0)), 1e-12);
    Eigen::MatrixXd g(2, 2);
    g << -q / 2, q / 2, q / 2, -q / 2;
    EXPECT_LT((v.grad_weights - g).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(v.grad_bias.cwiseAbs().maxCoeff(), 1e-12);

    const auto r = softmax_objective(h, x, y, 0.5);
    EXPECT_NEAR(r.loss, std::log(1.0 + std::exp(-1.0)) + 0.5, 1e-12);
    EXPECT_LT((r.grad_weights - (g + 0.5 * h.weights)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SoftmaxObjective, MatchesLoopOracleAndFiniteDifferences) {
    RandomStream rng(5);
    for (int t = 0; t < 20; ++t) {
        const int n = 3 + static_cast<int>(rng.below(10)), d = 1 + static_cast<int>(rng.below(6));
        const int c = 2 + static_cast<int>(rng.below(4));
        const double l2 = rng.uniform(0.0, 0.5);
        SoftmaxHead h = SoftmaxHead::zeros(c, d);
        for (int k = 0; k < c; ++k) {
            h.bias(k) = rng.normal(0, 1);
            for (int j = 0; j < d; ++j) h.weights(k, j) = rng.normal(0, 1);
        }
        Eigen::MatrixXd x(n, d);
        std::vector<int> y(static_cast<std::size_t>(n));
        oracle::Points px(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
        for (int i = 0; i < n; ++i) {
            y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
            for (int j = 0; j < d; ++j) px[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = x(i, j) = rng.normal(0, 2);
        }
        auto loss_of = [&](const SoftmaxHead& hh) {
            std::vector<std::vector<double>> w(static_cast<std::size_t>(c), std::vector<double>(static_cast<std::size_t>(d)));
            std::vector<double> b(static_cast<std::size_t>(c));
            for (int k = 0; k < c; ++k) {
                b[static_cast<std::size_t>(k)] = hh.bias(k);
                for (int j = 0; j < d; ++j) w[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = hh.weights(k, j);
            }
            return oracle::softmax_loss(w, b, px, y, l2);
        };
        const auto v = softmax_objective(h, x, y, l2);
        ASSERT_NEAR(v.loss, loss_of(h), 1e-12);
        const double eps = 1e-5;
        for (int k = 0; k < c; ++k) {
            for (int j = 0; j < d; ++j) {
                auto hp = h, hm = h;
                hp.weights(k, j) += eps;
                hm.weights(k, j) -= eps;
                ASSERT_NEAR(v.grad_weights(k, j), (loss_of(hp) - loss_of(hm)) / (2 * eps), 1e-6);
            }
            auto hp = h, hm = h;
            hp.bias(k) += eps;
            hm.bias(k) -= eps;
            ASSERT_NEAR(v.grad_bias(k), (loss_of(hp) - loss_of(hm)) / (2 * eps), 1e-6);
        }
    }
}

TEST(TrainHead, ZeroEpochsGiveUniformLoss) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 3);
    const std::vector<int> y{0, 1, 2, 3, 0, 1};
    ClassifierConfig cfg;
    cfg.epochs = 0;
    const auto h = train_head(x, y, 4, cfg);
    EXPECT_NEAR(eval_head(h, x, y).loss, std::log(4.0), 1e-12);
}

TEST(TrainHead, SeparableDataReachesFullAccuracy) {
    Eigen::MatrixXd x(6, 2);
    x << 2, 0, 2.5, 0.3, 0, 2, 0.2, 2.4, -2, -2, -2.5, -1.8;
    const std::vector<int> y{0, 0, 1, 1, 2, 2};
    ClassifierConfig cfg;
    cfg.epochs = 200;
    cfg.learning_rate = 0.5;
    const auto h = train_head(x, y, 3, cfg);
    const auto e = eval_head(h, x, y);
    EXPECT_DOUBLE_EQ(e.accuracy, 1.0);
    EXPECT_LT(e.loss, std::log(3.0));
}

TEST(TrainHead, LossDecreasesAndIsDeterministic) {
    RandomStream rng(1);
    Eigen::MatrixXd x(20, 4);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) {
        y[static_cast<std::size_t>(i)] = i % 3;
        for (int j = 0; j < 4; ++j) x(i, j) = rng.normal(y[static_cast<std::size_t>(i)] == j ? 1.0 : 0.0, 0.5);
    }
    ClassifierConfig cfg;
    cfg.learning_rate = 0.1;
    double prev = std::log(3.0);
    for (int epochs : {1, 5, 20}) {
        cfg.epochs = epochs;
        const double l = eval_head(train_head(x, y, 3, cfg), x, y).loss;
        EXPECT_LT(l, prev);
        prev = l;
    }
    const auto a = train_head(x, y, 3, cfg), b = train_head(x, y, 3, cfg);
    EXPECT_EQ(a.weights, b.weights);
}

TEST(EvalHead, TiesGoToLowestIndex) {
    const auto h = SoftmaxHead::zeros(3, 2);
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(2, 2);
    EXPECT_DOUBLE_EQ(eval_head(h, x, {0, 1}).accuracy, 0.5);
}

TEST(TrainHead, Validation) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(2, 2);
    EXPECT_THROW(train_head(x, {0}, 2, {}), DimensionMismatch);
    EXPECT_THROW(train_head(x, {0, 2}, 2, {}), DimensionMismatch);
    ClassifierConfig bad;
    bad.learning_rate = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
}
