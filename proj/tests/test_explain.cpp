#include <gtest/gtest.h>

#include <set>

#include "checks.hpp"
#include "peernet/explain.hpp"

using namespace peernet;
using data::Index;

namespace {

struct Fixture {
    data::NodeTable nodes;
    data::FeatureMatrix features;
    data::Graph graph;
    gat::GatModel<double> model;
};

Fixture ring_fixture(std::uint64_t seed) {
    Fixture f;
    f.nodes = data::NodeTable({{"Age", data::ColumnKind::numeric}});
    const Index n = 16;
    for (Index i = 0; i < n; ++i) f.nodes.add_row("P" + std::to_string(i), {std::to_string(20 + i)});
    std::vector<data::NodePair> pairs;
    for (Index i = 0; i < n; ++i) {
        pairs.push_back(data::ordered(i, (i + 1) % n));
        if (i % 3 == 0) pairs.push_back(data::ordered(i, (i + 7) % n));
    }
    f.graph = data::Graph::from_pairs(n, pairs);
    Rng rng(seed);
    f.features.values = Eigen::MatrixXd::Random(n, 4);
    for (int c = 0; c < 4; ++c) f.features.columns.push_back({"f" + std::to_string(c)});
    gat::Architecture arch;
    arch.layers = {{4, 2, gat::Combine::concatenate}, {3, 1, gat::Combine::single}};
    f.model = gat::init_model(arch, 4, seed);
    return f;
}

} // namespace

TEST(ExplainSubgraph, MatchesBreadthFirstOracle) {
    const auto f = ring_fixture(1);
    for (int hops : {1, 2, 3}) {
        const auto sub = explain::extract_subgraph(f.graph, 0, 5, hops);
        const auto du = checks::hop_distances(f.graph, 0);
        const auto dv = checks::hop_distances(f.graph, 5);
        std::set<Index> expect;
        for (Index i = 0; i < f.graph.size(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            if ((du[k] >= 0 && du[k] <= hops) || (dv[k] >= 0 && dv[k] <= hops)) expect.insert(i);
        }
        EXPECT_EQ(std::set<Index>(sub.nodes.begin(), sub.nodes.end()), expect);
        std::size_t induced = 0;
        for (const auto& [a, b] : f.graph.pairs()) induced += expect.count(a) && expect.count(b);
        EXPECT_EQ(sub.edges.size(), induced);
        EXPECT_EQ(sub.nodes[static_cast<std::size_t>(sub.u)], 0);
        EXPECT_EQ(sub.nodes[static_cast<std::size_t>(sub.v)], 5);
    }
}

TEST(ExplainMask, GradientsMatchFiniteDifferences) {
    const auto f = ring_fixture(2);
    explain::MaskedLink link(f.model, f.features.values, explain::extract_subgraph(f.graph, 2, 9, 2));
    Rng rng(3);
    for (int target : {0, 1}) {
        explain::MaskParams p;
        p.edge = Eigen::VectorXd::Random(link.edge_count());
        p.feature = Eigen::VectorXd::Random(link.feature_count());
        const auto rep = explain::mask_grad_check(link, p, target, explain::ExplainConfig{});
        EXPECT_TRUE(rep.passed) << rep.worst_parameter << ' ' << rep.max_relative_error;
    }
}

TEST(ExplainMask, FullMasksReproduceModelScore) {
    const auto f = ring_fixture(4);
    const auto sub = explain::extract_subgraph(f.graph, 1, 2, 3);
    explain::MaskedLink link(f.model, f.features.values, sub);
    const Eigen::MatrixXd z = gat::embed(f.model, f.features.values, f.graph);
    const double direct = gat::logistic(z.row(1).dot(z.row(2)));
    const double masked = link.score(Eigen::VectorXd::Ones(link.edge_count()), Eigen::VectorXd::Ones(4));
    EXPECT_NEAR(masked, direct, 1e-10);
}

TEST(ExplainLink, PlantedFeatureRanksFirst) {
    int hits = 0;
    for (int run = 0; run < 3; ++run) {
        const auto r = checks::planted_feature_run(run);
        hits += r.top1;
        EXPECT_TRUE(r.hash_unchanged);
    }
    EXPECT_GE(hits, 2);
}

TEST(ExplainLink, LargeSizePenaltyEmptiesMasks) {
    const auto [edge, feature] = checks::size_penalty_means(10.0);
    EXPECT_LT(edge, 0.05);
    EXPECT_LT(feature, 0.05);
}

TEST(ExplainLink, ModelUntouchedAndJsonRoundTrips) {
    const auto f = ring_fixture(5);
    const auto before = explain::model_hash(f.model);
    explain::ExplainConfig cfg;
    cfg.epochs = 30;
    const auto e = explain::explain_link(f.model, f.features, f.graph, 3, 4, cfg);
    EXPECT_EQ(explain::model_hash(f.model), before);
    EXPECT_GE(e.fidelity, 0.0);
    EXPECT_EQ(e.shared_neighbors, explain::shared_neighbor_count(f.graph, 3, 4));
    EXPECT_EQ(static_cast<Index>(e.feature_mask.size()), 4);

    const auto back = explain::explanation_from_json(explain::explanation_to_json(e, f.nodes), f.nodes);
    EXPECT_EQ(back.u, e.u);
    EXPECT_EQ(back.v, e.v);
    EXPECT_EQ(back.predicted, e.predicted);
    ASSERT_EQ(back.top_features.size(), e.top_features.size());
    for (std::size_t k = 0; k < e.top_features.size(); ++k) {
        EXPECT_EQ(back.top_features[k].name, e.top_features[k].name);
        EXPECT_DOUBLE_EQ(back.top_features[k].weight, e.top_features[k].weight);
    }
    ASSERT_EQ(back.top_edges.size(), e.top_edges.size());
}

TEST(ExplainLink, SameSeedSameMasks) {
    const auto f = ring_fixture(6);
    explain::ExplainConfig cfg;
    cfg.epochs = 20;
    cfg.seed = 8;
    const auto a = explain::explain_link(f.model, f.features, f.graph, 0, 1, cfg);
    const auto b = explain::explain_link(f.model, f.features, f.graph, 0, 1, cfg);
    EXPECT_EQ(a.edge_mask, b.edge_mask);
    EXPECT_EQ(a.feature_mask, b.feature_mask);
}

TEST(ExplainSharedNeighbours, CountsCommonAlters) {
    const auto g = data::Graph::from_pairs(5, std::vector<data::NodePair>{{0, 2}, {1, 2}, {0, 3}, {1, 3}, {0, 1}, {3, 4}});
    EXPECT_EQ(explain::shared_neighbor_count(g, 0, 1), 2u);
    EXPECT_EQ(explain::shared_neighbor_count(g, 0, 4), 1u);
    EXPECT_EQ(explain::shared_neighbor_count(g, 2, 4), 0u);
}

TEST(ExplainReport, FrequenciesOverTopK) {
    std::vector<explain::Explanation> es(4);
    for (std::size_t k = 0; k < es.size(); ++k) {
        es[k].top_features = {{0, "Age", 0.9}, {1, k % 2 ? "Rank=E4" : "Gender=F", 0.5}, {2, "Unit", 0.1}};
    }
    const auto r = explain::explanation_report(es, 2);
    EXPECT_EQ(r.cases, 4u);
    ASSERT_FALSE(r.features.empty());
    EXPECT_EQ(r.features.front().name, "Age");
    EXPECT_DOUBLE_EQ(r.features.front().frequency, 1.0);
    for (const auto& fq : r.features) EXPECT_NE(fq.name, "Unit");
}
