#include <gtest/gtest.h>

#include <sstream>

#include "peernet/data.hpp"
#include "peernet/error.hpp"

using namespace peernet;
using data::Index;

namespace {

data::NodeTable small_table() {
    const data::Schema schema{{"Age", data::ColumnKind::numeric}, {"Gender", data::ColumnKind::categorical},
                              {"Rank", data::ColumnKind::categorical}};
    std::istringstream in("PID,Age,Gender,Rank\nA,20,M,\nB,30,F,\nC,,M,E4\nD,40,F,\n");
    return data::read_nodes(in, schema);
}

} // namespace

TEST(Graph, SymmetricWithSelfLoops) {
    const auto g = data::Graph::from_pairs(4, std::vector<data::NodePair>{{0, 1}, {1, 2}, {1, 2}});
    EXPECT_TRUE(g.adjacent(1, 0));
    EXPECT_TRUE(g.adjacent(2, 1));
    EXPECT_TRUE(g.adjacent(3, 3));
    EXPECT_FALSE(g.adjacent(0, 2));
    EXPECT_EQ(g.degree(1), 2);
    EXPECT_EQ(g.degree(3), 0);
    EXPECT_EQ(g.pairs().size(), 2u);
    for (Index i = 0; i < 4; ++i) {
        const auto n = g.neighbors(i);
        EXPECT_TRUE(std::is_sorted(n.begin(), n.end()));
    }
}

TEST(Split, DisjointAndProportional) {
    std::vector<data::NodePair> pairs;
    for (Index i = 0; i < 100; ++i) pairs.emplace_back(i, i + 1);
    const auto s = data::split_edges(pairs, data::default_split(), 3);
    EXPECT_EQ(s.train.size(), 60u);
    EXPECT_EQ(s.validation.size(), 20u);
    EXPECT_EQ(s.test.size(), 20u);
    data::PairSet seen;
    for (const auto* part : {&s.train, &s.validation, &s.test})
        for (const auto& [a, b] : *part) EXPECT_TRUE(seen.insert(a, b));
    const auto again = data::split_edges(pairs, data::default_split(), 3);
    EXPECT_EQ(again.test, s.test);
}

TEST(Nodes, MissingCellsAndLookup) {
    const auto t = small_table();
    EXPECT_EQ(t.size(), 4);
    EXPECT_EQ(t.index_of("C"), 2);
    EXPECT_FALSE(t.cell(2, 0).has_value());
    EXPECT_THROW(t.index_of("Z"), Error);
}

TEST(Nodes, DuplicatePidRejected) {
    std::istringstream in("PID,Age\nA,1\nA,2\n");
    EXPECT_THROW(data::read_nodes(in, {{"Age", data::ColumnKind::numeric}}), Error);
}

TEST(Preprocess, DropsSparseColumnsAndEncodes) {
    const auto fm = data::preprocess(small_table());
    // Rank is missing in 3 of 4 rows and is dropped.
    ASSERT_EQ(fm.dropped, std::vector<std::string>{"Rank"});
    bool has_age = false;
    for (Index c = 0; c < fm.cols(); ++c) {
        if (fm.column_name(c) == "Age") {
            has_age = true;
            EXPECT_NEAR(fm.values.col(c).mean(), 0.0, 1e-12);
        }
    }
    EXPECT_TRUE(has_age);
    EXPECT_TRUE(fm.values.allFinite());
    EXPECT_EQ(fm.column_map_hash(), data::preprocess(small_table()).column_map_hash());
}

TEST(Edges, RoundTripThroughCsv) {
    const auto t = small_table();
    data::EdgeTable e;
    e.edges = {{0, 1, data::Confidence::confident}, {2, 3, data::Confidence::uncertain}};
    std::ostringstream out;
    data::write_edges(out, e, t);
    std::istringstream in(out.str());
    const auto back = data::read_edges(in, t);
    EXPECT_EQ(back.edges, e.edges);
    EXPECT_EQ(back.count(data::Confidence::uncertain), 1u);
}

TEST(Edges, UnknownEndpointIsDataError) {
    const auto t = small_table();
    std::istringstream in("src,dst,confidence\nA,Q,confident\n");
    try {
        data::read_edges(in, t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
    }
}
