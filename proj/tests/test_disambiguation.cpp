#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "checks.hpp"
#include "peernet/disambiguation.hpp"
#include "peernet/error.hpp"

using namespace peernet;
using data::Index;
using disambig::CaseKind;

namespace {

Eigen::MatrixXd line_embeddings() {
    Eigen::MatrixXd z(5, 2);
    z << 0, 0, 1, 0, 3, 0, 1, 0, 10, 0;
    return z;
}

} // namespace

TEST(Threshold, MatchesExhaustiveSearch) {
    const auto o = checks::threshold_oracle(300, 401);
    EXPECT_TRUE(o.pass) << o.detail;
}

TEST(Threshold, TiesFavourLargerCutoff) {
    // 1.5 and 4.5 both give F1 = 2/3; the larger one wins.
    const std::vector<double> d{1.0, 2.0, 3.0, 4.0, 5.0};
    const std::vector<int> y{1, 0, 0, 1, 0};
    const auto th = disambig::calibrate_threshold(d, y);
    EXPECT_DOUBLE_EQ(th.tau, 4.5);
    EXPECT_NEAR(th.f1, 2.0 / 3.0, 1e-12);
}

TEST(Threshold, NeedsBothClasses) {
    EXPECT_THROW(disambig::calibrate_threshold(std::vector<double>{1, 2}, std::vector<int>{1, 1}), Error);
}

TEST(Resolve, PairPicksCloserCandidate) {
    const auto z = line_embeddings();
    const auto r = disambig::resolve_pair(0, 2, 1, z);
    EXPECT_EQ(r.chosen, 1);
    EXPECT_DOUBLE_EQ(r.margin, 2.0);
    EXPECT_FALSE(r.low_confidence);
}

TEST(Resolve, ExactTieGoesToSmallerIndexAndIsFlagged) {
    const auto z = line_embeddings();
    const auto r = disambig::resolve_pair(0, 3, 1, z);
    EXPECT_EQ(r.chosen, 1);
    EXPECT_TRUE(r.low_confidence);
}

TEST(Resolve, ExistenceIsStrictlyBelowThreshold) {
    const auto z = line_embeddings();
    EXPECT_FALSE(disambig::link_exists(0, 1, z, 1.0).exists);
    EXPECT_TRUE(disambig::link_exists(0, 1, z, 1.0 + 1e-12).exists);
    EXPECT_NEAR(disambig::link_exists(0, 2, z, 1.0).margin, 2.0, 1e-15);
}

TEST(Resolve, CosineDistance) {
    Eigen::RowVectorXd a(2), b(2);
    a << 1, 0;
    b << 0, 2;
    EXPECT_NEAR(disambig::embedding_distance(a, b, disambig::DistanceMetric::cosine), 1.0, 1e-15);
    EXPECT_NEAR(disambig::embedding_distance(a, 3 * a, disambig::DistanceMetric::cosine), 0.0, 1e-15);
}

TEST(Resolve, CaseValidation) {
    disambig::AmbiguityCase c;
    c.id = "x";
    c.source = 0;
    c.first = 1;
    c.second = 1;
    EXPECT_THROW(c.validate(), Error);
    c.second = 0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(ResolveEdgeList, NoCasesLeavesEdgesUnchanged) {
    data::EdgeTable edges;
    edges.edges = {{0, 1, data::Confidence::confident}, {1, 2, data::Confidence::confident}};
    const auto out = disambig::resolve_edge_list(edges, {}, line_embeddings(), 1.0);
    EXPECT_TRUE(out.log.empty());
    EXPECT_EQ(out.edges.edges, edges.edges);
}

TEST(ResolveEdgeList, UncoveredUncertainEdgesBecomeExistenceCases) {
    data::EdgeTable edges;
    edges.edges = {{0, 1, data::Confidence::confident},
                   {0, 3, data::Confidence::uncertain},
                   {0, 4, data::Confidence::uncertain},
                   {0, 2, data::Confidence::uncertain}};
    disambig::AmbiguityCase pair;
    pair.id = "p";
    pair.source = 0;
    pair.first = 2;
    pair.second = 3;
    const auto out = disambig::resolve_edge_list(edges, std::vector{pair}, line_embeddings(), 2.0);
    ASSERT_EQ(out.log.size(), 2u);  // the pair case plus (0, 4)
    EXPECT_EQ(out.log[1].kind, CaseKind::existence);
    EXPECT_FALSE(out.log[1].exists);
    // pair resolves to 3 (distance 1); duplicate edges are not added twice
    std::set<data::NodePair> got;
    for (const auto& e : out.edges.edges) got.insert(data::ordered(e.src, e.dst));
    EXPECT_EQ(got, (std::set<data::NodePair>{{0, 1}, {0, 3}}));
}

TEST(Simulate, PairCasesAreValidAndShuffled) {
    std::vector<data::NodePair> test;
    for (Index i = 0; i < 20; ++i) test.emplace_back(i, i + 20);
    const data::PairSet all(test);
    const auto cases = disambig::simulate_pair_cases(test, all, 40, 200, 5);
    ASSERT_EQ(cases.size(), 200u);
    int truth_first = 0;
    for (const auto& c : cases) {
        c.validate();
        ASSERT_TRUE(c.truth_node);
        EXPECT_TRUE(all.contains(c.source, *c.truth_node));
        const Index decoy = *c.truth_node == c.first ? c.second : c.first;
        EXPECT_FALSE(all.contains(c.source, decoy));
        truth_first += *c.truth_node == c.first;
    }
    EXPECT_GT(truth_first, 60);
    EXPECT_LT(truth_first, 140);
}

TEST(Simulate, LinkCasesAreBalanced) {
    std::vector<data::NodePair> test;
    for (Index i = 0; i < 15; ++i) test.emplace_back(i, i + 15);
    const auto cases = disambig::simulate_link_cases(test, data::PairSet(test), 30, 6);
    ASSERT_EQ(cases.size(), 30u);
    int positives = 0;
    for (const auto& c : cases) positives += c.truth_exists.value();
    EXPECT_EQ(positives, 15);
}

TEST(ResolutionLog, JsonRoundTrip) {
    data::NodeTable nodes({{"x", data::ColumnKind::numeric}});
    for (const auto* pid : {"a", "b", "c", "d", "e"}) nodes.add_row(pid, {std::string("1")});
    const auto z = line_embeddings();
    for (const auto& r : {disambig::resolve_pair(0, 2, 1, z), disambig::link_exists(0, 4, z, 2.0)}) {
        const auto back = disambig::resolution_from_json(disambig::resolution_to_json(r, nodes), nodes);
        EXPECT_EQ(back.kind, r.kind);
        EXPECT_EQ(back.chosen, r.chosen);
        EXPECT_EQ(back.exists, r.exists);
        EXPECT_DOUBLE_EQ(back.margin, r.margin);
        EXPECT_DOUBLE_EQ(back.first_distance, r.first_distance);
    }
}
