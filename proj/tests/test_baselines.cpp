#include <gtest/gtest.h>

#include "checks.hpp"
#include "peernet/baselines.hpp"

using namespace peernet;
using data::Index;

TEST(DecisionTree, GiniImpurity) {
    EXPECT_DOUBLE_EQ(baselines::gini(2, 2), 0.5);
    EXPECT_DOUBLE_EQ(baselines::gini(0, 3), 0.0);
    EXPECT_NEAR(baselines::gini(1, 2), 1.0 - 1.0 / 9 - 4.0 / 9, 1e-15);
}

TEST(DecisionTree, BestSplitMatchesExhaustiveSearch) {
    const auto o = checks::gini_oracle(300, 301);
    EXPECT_TRUE(o.pass) << o.detail;
}

TEST(DecisionTree, SeparableDataFitsExactly) {
    baselines::PairSamples s;
    s.x.resize(6, 2);
    s.x << 0, 5, 1, 4, 2, 3, 10, 2, 11, 1, 12, 0;
    s.y = {0, 0, 0, 1, 1, 1};
    const auto tree = baselines::dt_train(s, {4, 1, baselines::Criterion::gini});
    EXPECT_EQ(tree.depth(), 1);
    for (Index i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(baselines::dt_predict(tree, s.x.row(i)), s.y[i]);
    const auto path = baselines::dt_path(tree, s.x.row(4));
    EXPECT_EQ(path.front(), 0);
    EXPECT_TRUE(tree.nodes[path.back()].is_leaf());
}

TEST(DecisionTree, RespectsDepthAndLeafLimits) {
    Rng rng(3);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(60, 3);
    std::vector<double> y(60);
    for (auto& v : y) v = uniform01(rng) < 0.5;
    const auto tree = baselines::dt_train(x, y, {}, {3, 5, baselines::Criterion::gini});
    EXPECT_LE(tree.depth(), 3);
    for (const auto& n : tree.nodes)
        if (n.is_leaf()) EXPECT_GE(n.samples, 5u);
}

TEST(DecisionTree, VarianceCriterionPredictsLeafMeans) {
    Eigen::MatrixXd x(4, 1);
    x << 0, 1, 10, 11;
    const std::vector<double> y{1.0, 3.0, 10.0, 12.0};
    const auto tree = baselines::dt_train(x, y, {}, {1, 1, baselines::Criterion::variance});
    EXPECT_DOUBLE_EQ(baselines::dt_predict(tree, x.row(0)), 2.0);
    EXPECT_DOUBLE_EQ(baselines::dt_predict(tree, x.row(3)), 11.0);
}

TEST(Mlp, GradientsMatchCentralDifferences) {
    const auto o = checks::mlp_gradients(10, 302);
    EXPECT_TRUE(o.pass) << o.detail;
}

TEST(Mlp, LearnsSeparableProblem) {
    Rng rng(4);
    Eigen::MatrixXd x(80, 2);
    std::vector<double> y(80);
    for (Index i = 0; i < 80; ++i) {
        x(i, 0) = normal(rng);
        x(i, 1) = normal(rng);
        y[i] = x(i, 0) + x(i, 1) > 0;
    }
    baselines::MlpConfig cfg;
    cfg.epochs = 300;
    const auto p = baselines::mlp_train(x, y, {}, cfg);
    const Eigen::VectorXd pred = baselines::mlp_predict_batch(p, x);
    int correct = 0;
    for (Index i = 0; i < 80; ++i) correct += (pred(i) > 0.5) == (y[i] > 0.5);
    EXPECT_GE(correct, 76);
}

TEST(Mlp, SameSeedSameParameters) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 3);
    const std::vector<double> y{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    baselines::MlpConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 9;
    EXPECT_EQ(baselines::mlp_flatten(baselines::mlp_train(x, y, {}, cfg)),
              baselines::mlp_flatten(baselines::mlp_train(x, y, {}, cfg)));
}

TEST(PairSamples, ConcatenateEndpointFeatures) {
    Eigen::MatrixXd f(3, 2);
    f << 1, 2, 3, 4, 5, 6;
    const std::vector<data::NodePair> pairs{{0, 2}};
    const auto s = baselines::make_pair_samples(pairs, std::vector<int>{1}, f);
    ASSERT_EQ(s.x.cols(), 4);
    EXPECT_EQ(s.x.row(0), (Eigen::RowVector4d(1, 2, 5, 6)));
}
