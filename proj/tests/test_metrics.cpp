#include <gtest/gtest.h>

#include "checks.hpp"
#include "peernet/error.hpp"
#include "peernet/metrics.hpp"

using namespace peernet;
using data::Index;

TEST(Metrics, SingleTruePositiveOfTwo) {
    metrics::ConfusionCounts c;
    c.tp = 1;
    c.fn = 1;
    const auto m = metrics::classification_metrics(c);
    EXPECT_DOUBLE_EQ(m.precision, 1.0);
    EXPECT_DOUBLE_EQ(m.recall, 0.5);
    EXPECT_NEAR(m.f1, 2.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
}

TEST(Metrics, ConfusionFromPredictions) {
    const std::vector<int> pred{1, 1, 0, 0, 1}, label{1, 0, 0, 1, 1};
    const auto c = metrics::confusion(pred, label);
    EXPECT_EQ(c.tp, 2u);
    EXPECT_EQ(c.fp, 1u);
    EXPECT_EQ(c.tn, 1u);
    EXPECT_EQ(c.fn, 1u);
    const auto m = metrics::classification_metrics(pred, label);
    EXPECT_NEAR(m.accuracy, 0.6, 1e-15);
}

TEST(Metrics, ZeroDenominatorsAreFlagged) {
    const std::vector<int> pred{0, 0}, label{0, 0};
    const auto m = metrics::classification_metrics(pred, label);
    EXPECT_TRUE(m.precision_undefined);
    EXPECT_TRUE(m.recall_undefined);
    EXPECT_EQ(m.f1, 0.0);
    EXPECT_EQ(m.accuracy, 1.0);
}

TEST(Metrics, AucMatchesPairCounting) {
    const auto o = checks::auc_oracle(100, 201);
    EXPECT_TRUE(o.pass) << o.detail;
}

TEST(Metrics, AucBounds) {
    const std::vector<double> s{0.1, 0.2, 0.3, 0.4};
    EXPECT_DOUBLE_EQ(metrics::auc(s, std::vector<int>{0, 0, 1, 1}), 1.0);
    EXPECT_DOUBLE_EQ(metrics::auc(s, std::vector<int>{1, 1, 0, 0}), 0.0);
    EXPECT_DOUBLE_EQ(metrics::auc(std::vector<double>{1, 1}, std::vector<int>{0, 1}), 0.5);
}

TEST(Metrics, AucNeedsBothClasses) {
    try {
        metrics::auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
    }
}

TEST(Metrics, MeanAbsoluteError) {
    EXPECT_DOUBLE_EQ(metrics::mae(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 5}), 1.0);
}
