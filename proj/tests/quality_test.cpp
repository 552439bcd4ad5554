#include <gtest/gtest.h>

#include <vector>

#include "alphadesk/quality.hpp"
#include "test_util.hpp"

namespace alphadesk {
namespace {

constexpr double M = kMissing;

TEST(EvaluateSeries, CoverageOfTenSlotsWithEightObserved) {
    const std::vector<double> xs{1, 2, M, 4, 5, 6, M, 8, 9, 10};
    const auto q = evaluate_series(xs, {});
    EXPECT_DOUBLE_EQ(q.coverage_ratio, 0.8);
    EXPECT_DOUBLE_EQ(q.missing_ratio, 0.2);
    EXPECT_DOUBLE_EQ(q.coverage_ratio + q.missing_ratio, 1.0);
}

TEST(EvaluateSeries, ConstantSeriesNeverChanges) {
    const std::vector<double> xs{5, 5, 5, 5, 5};
    const auto q = evaluate_series(xs, {});
    EXPECT_EQ(*q.frequency_ratio, 0.0);
    EXPECT_EQ(*q.duplicate_ratio, 1.0);
    EXPECT_EQ(q.max_gap, 0U);
    EXPECT_FALSE(q.skewness.has_value());
}

TEST(EvaluateSeries, OutlierRatioAboveThreshold) {
    QualityConfig cfg;
    cfg.outlier_threshold = 50.0;
    const std::vector<double> xs{1, 2, 3, 100};
    EXPECT_DOUBLE_EQ(*evaluate_series(xs, cfg).outlier_ratio, 0.25);
    EXPECT_FALSE(evaluate_series(xs, {}).outlier_ratio.has_value());
}

TEST(EvaluateSeries, DeviationFromExpectedMedian) {
    QualityConfig cfg;
    cfg.expected_median = 100.0;
    const std::vector<double> xs{90, 110, 130};
    EXPECT_NEAR(*evaluate_series(xs, cfg).deviation_from_expected, 0.10, 1e-15);
}

TEST(EvaluateSeries, MaxGapCountsSkippedSlots) {
    const std::vector<double> xs{1, 2, M, M, M, 3};
    EXPECT_EQ(evaluate_series(xs, {}).max_gap, 3U);
}

TEST(EvaluateSeries, SymmetricFixtureMoments) {
    const std::vector<double> xs{-2, -1, 0, 1, 2};
    const auto q = evaluate_series(xs, {});
    EXPECT_NEAR(*q.skewness, 0.0, 1e-12);
    // m2 = 2, m4 = 6.8, excess kurtosis = 6.8 / 4 - 3
    EXPECT_NEAR(*q.kurtosis, -1.3, 1e-12);
}

TEST(EvaluateSeries, FrequencyCountsChangesOverConsecutivePairs) {
    const std::vector<double> xs{1, 1, 2, 2, 3};
    const auto q = evaluate_series(xs, {});
    EXPECT_DOUBLE_EQ(*q.frequency_ratio, 0.5);
    EXPECT_DOUBLE_EQ(*q.duplicate_ratio, 0.5);
}

TEST(EvaluateSeries, Errors) {
    const std::vector<double> empty{M, M};
    try {
        evaluate_series(empty, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoData);
    }
    QualityConfig cfg;
    cfg.expected_median = 0.0;
    const std::vector<double> xs{1, 2};
    try {
        evaluate_series(xs, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroExpected);
    }
}

TEST(EvaluateSeries, SelfConcatenationKeepsCoverage) {
    std::vector<double> xs{1, M, 3, 4, M, 6, 7};
    const double before = evaluate_series(xs, {}).coverage_ratio;
    std::vector<double> twice = xs;
    twice.insert(twice.end(), xs.begin(), xs.end());
    EXPECT_DOUBLE_EQ(evaluate_series(twice, {}).coverage_ratio, before);
}

TEST(EvaluateSeries, VolatilityRatioNeedsAFullWindow) {
    std::vector<double> xs(200);
    for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = (k % 2 ? 1.0 : -1.0) * (k >= 100 ? 3.0 : 1.0);
    const auto q = evaluate_series(xs, {});
    ASSERT_TRUE(q.volatility_ratio.has_value());
    EXPECT_GT(*q.volatility_ratio, 1.0);
    const std::vector<double> short_series(10, 1.0);
    EXPECT_FALSE(evaluate_series(short_series, {}).volatility_ratio.has_value());
}

TEST(EvaluateField, MetricRangesHoldOnRandomPanels) {
    QualityConfig cfg;
    cfg.outlier_threshold = 1.5;
    const PanelSet p = testing::random_panel(3, 120, 8, 0.2);
    const auto r = evaluate_field(p.field("x"), p.symbols(), cfg);
    ASSERT_EQ(r.per_symbol.size(), 8U);
    for (const auto& q : r.per_symbol) {
        for (double v : {q.coverage_ratio, q.missing_ratio, *q.outlier_ratio, *q.duplicate_ratio, *q.frequency_ratio}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_NEAR(q.coverage_ratio + q.missing_ratio, 1.0, 1e-15);
    }
}

TEST(EvaluateField, PooledIgnoresFullyMissingSymbols) {
    QualityConfig cfg;
    cfg.outlier_threshold = 1.0;
    cfg.expected_median = 0.5;
    const PanelSet p = testing::random_panel(4, 80, 5, 0.1);
    const Matrix& x = p.field("x").values;
    Matrix wider(x.rows(), x.cols() + 2);
    for (std::size_t t = 0; t < x.rows(); ++t) {
        for (std::size_t j = 0; j < x.cols(); ++j) wider(t, j) = x(t, j);
    }
    const auto a = evaluate_field(p.field("x"), p.symbols(), cfg).pooled;
    const auto b = evaluate_field({"x", wider}, testing::symbol_names(7), cfg).pooled;
    EXPECT_EQ(a.coverage_ratio, b.coverage_ratio);
    EXPECT_EQ(*a.frequency_ratio, *b.frequency_ratio);
    EXPECT_EQ(*a.outlier_ratio, *b.outlier_ratio);
    EXPECT_EQ(*a.deviation_from_expected, *b.deviation_from_expected);
    EXPECT_EQ(*a.skewness, *b.skewness);
    EXPECT_EQ(*a.kurtosis, *b.kurtosis);
    EXPECT_EQ(*a.duplicate_ratio, *b.duplicate_ratio);
    EXPECT_EQ(a.max_gap, b.max_gap);
}

TEST(EvaluateField, SyntheticCloseChangesDaily) {
    SyntheticConfig cfg;
    cfg.n_symbols = 10;
    cfg.n_days = 300;
    const PanelSet p = generate_synthetic(cfg);
    const auto r = evaluate_field(p.field("close"), p.symbols(), {});
    EXPECT_NEAR(*r.pooled.frequency_ratio, 1.0, 1e-12);
    EXPECT_EQ(recommend_windows(r), (std::vector<int>{5, 10, 21, 63}));
}

TEST(RecommendWindows, DecisionTable) {
    EXPECT_EQ(recommend_windows(0.01), (std::vector<int>{63, 252}));
    EXPECT_EQ(recommend_windows(0.02), (std::vector<int>{63, 252}));
    EXPECT_EQ(recommend_windows(0.1), (std::vector<int>{21, 63}));
    EXPECT_EQ(recommend_windows(0.2), (std::vector<int>{21, 63}));
    EXPECT_EQ(recommend_windows(0.95), (std::vector<int>{5, 10, 21, 63}));
}

TEST(QualityJson, UndefinedMetricsAreNull) {
    const std::vector<double> xs{5, 5, 5};
    const auto j = to_json(evaluate_series(xs, {}));
    EXPECT_TRUE(j["outlier_ratio"].is_null());
    EXPECT_TRUE(j["skewness"].is_null());
    EXPECT_EQ(j["coverage_ratio"], 1.0);
}

}  // namespace
}  // namespace alphadesk
