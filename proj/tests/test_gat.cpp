#include <gtest/gtest.h>

#include "checks.hpp"
#include "peernet/error.hpp"
#include "peernet/gat.hpp"
#include "peernet/train.hpp"

using namespace peernet;
using data::Index;

TEST(GatGradients, MatchCentralDifferences) {
    const auto o = checks::gat_gradients(5, 101);
    EXPECT_TRUE(o.pass) << o.detail;
    EXPECT_LT(o.worst, 1e-4);
}

TEST(GatGradients, CheckerCatchesCorruptedGradient) {
    Rng rng(7);
    const auto in = checks::random_instance(rng, 10);
    const auto rep = gat::grad_check(in.model, in.x, in.graph, in.batch, 1e-5, 1e-4,
                                     [](gat::Vector<long double>& g) { g(0) += 0.05L; });
    EXPECT_FALSE(rep.passed);
    EXPECT_EQ(rep.worst_index, 0);
}

TEST(GatAttention, SoftmaxRowsSumToOne) {
    const auto o = checks::softmax_rows(30, 102);
    EXPECT_TRUE(o.pass) << o.detail;
}

TEST(GatAttention, OutputIgnoresNodesOutsideReceptiveField) {
    const auto o = checks::receptive_field(30, 103);
    EXPECT_TRUE(o.pass) << o.detail;
}

TEST(GatAttention, PermutationEquivariant) {
    const auto o = checks::permutation_equivariance(30, 104);
    EXPECT_TRUE(o.pass) << o.detail;
}

TEST(GatAttention, NeighbourFeaturesDoMatter) {
    // positive control for the locality test
    Rng rng(5);
    const auto graph = data::Graph::from_pairs(3, std::vector<data::NodePair>{{0, 1}, {1, 2}});
    const auto model = gat::init_model(gat::Architecture{}, 4, 9);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4);
    const Eigen::MatrixXd before = gat::embed(model, x, graph);
    x.row(2) *= -3.0;
    const Eigen::MatrixXd after = gat::embed(model, x, graph);
    EXPECT_GT((before.row(0) - after.row(0)).norm(), 0.0);
}

TEST(GatShapes, DefaultArchitectureWidths) {
    for (Index f : {1, 5, 66}) {
        EXPECT_EQ(checks::default_widths(f), (std::vector<Index>{128, 128, 7}));
    }
}

TEST(GatShapes, ValidateRejectsInconsistentModels) {
    auto model = gat::init_model(gat::Architecture{}, 5, 1);
    EXPECT_NO_THROW(gat::validate(model));
    model.layers[1].heads[0].weight.resize(3, 3);
    EXPECT_THROW(gat::validate(model), Error);
    auto single = gat::init_model(gat::Architecture{}, 5, 1);
    single.layers.back().heads.push_back(single.layers.back().heads.front());
    EXPECT_THROW(gat::validate(single), Error);
}

TEST(GatShapes, FeatureWidthMismatchIsModelError) {
    const auto model = gat::init_model(gat::Architecture{}, 5, 1);
    const auto graph = data::Graph::from_pairs(2, std::vector<data::NodePair>{{0, 1}});
    try {
        gat::embed(model, Eigen::MatrixXd::Zero(2, 4), graph);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::model);
    }
}

TEST(GatOracles, LogitsAggregationAndLoss) {
    for (const auto& o : {checks::logits_oracle(50, 105), checks::aggregation_oracle(50, 106),
                          checks::bce_oracle(50, 107)}) {
        EXPECT_TRUE(o.pass) << o.detail;
        EXPECT_LT(o.worst, 1e-10);
    }
}

TEST(GatLoss, ClampedProbabilitiesStayFinite) {
    Eigen::MatrixXd z(2, 1);
    z << 100.0, 100.0;
    gat::LinkBatch batch;
    batch.add({0, 1}, 0);
    const auto lg = gat::link_loss(z, batch);
    EXPECT_NEAR(lg.loss, -std::log(1e-7), 1e-9);
    EXPECT_TRUE(lg.d_embeddings.allFinite());
}

TEST(GatTrain, SameSeedSameModel) {
    Rng rng(3);
    std::vector<data::NodePair> pairs;
    for (Index i = 0; i < 30; ++i) pairs.emplace_back(i, (i + 1) % 30);
    for (auto& p : pairs) p = data::ordered(p.first, p.second);
    const auto split = data::split_edges(pairs, data::default_split(), 4);
    const auto graph = data::Graph::from_pairs(30, split.train);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(30, 4);
    gat::Architecture arch;
    arch.layers = {{4, 2, gat::Combine::concatenate}, {3, 1, gat::Combine::single}};
    gat::TrainConfig cfg;
    cfg.epochs = 20;
    cfg.seed = 11;
    const auto a = gat::train(gat::init_model(arch, 4, 1), x, graph, split, cfg);
    const auto b = gat::train(gat::init_model(arch, 4, 1), x, graph, split, cfg);
    EXPECT_EQ(gat::flatten(a.model), gat::flatten(b.model));
    EXPECT_EQ(a.history.size(), 20u);
    EXPECT_GE(a.best_epoch, 0);
}
