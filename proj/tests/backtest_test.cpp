#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "alphadesk/backtest.hpp"
#include "test_util.hpp"

namespace alphadesk {
namespace {

using testing::matrix_of;
using testing::panel_of;

TEST(SignalToWeights, RankDemeanScale) {
    const Matrix w = signal_to_weights(matrix_of({{3, 1, 2}}));
    EXPECT_DOUBLE_EQ(w(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(w(0, 1), -0.5);
    EXPECT_DOUBLE_EQ(w(0, 2), 0.0);
}

TEST(SignalToWeights, DegenerateDaysAreFlat) {
    const Matrix w = signal_to_weights(matrix_of({{2, 2, 2}, {kMissing, 1, kMissing}, {1, kMissing, 3}}));
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(w(0, j), 0.0);
        EXPECT_EQ(w(1, j), 0.0);
    }
    EXPECT_DOUBLE_EQ(w(2, 0), -0.5);
    EXPECT_EQ(w(2, 1), 0.0);
    EXPECT_DOUBLE_EQ(w(2, 2), 0.5);
}

TEST(SignalToWeights, OnlyRequestedRowsAreFilled) {
    const Matrix w = signal_to_weights(matrix_of({{3, 1}, {1, 3}, {3, 1}}), DateRange{1, 2});
    EXPECT_EQ(w(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(w(1, 1), 0.5);
    EXPECT_EQ(w(2, 0), 0.0);
}

TEST(SignalToWeights, NeutralAndUnitGrossOnRandomSignals) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 30;
        Matrix s(5, n);
        for (double& v : s.values()) v = unit(rng) < 0.2 ? kMissing : (unit(rng) < 0.3 ? 1.0 : normal(rng));
        const Matrix w = signal_to_weights(s);
        for (std::size_t t = 0; t < 5; ++t) {
            double net = 0, gross = 0;
            for (std::size_t j = 0; j < n; ++j) {
                ASSERT_FALSE(is_missing(w(t, j)));
                net += w(t, j);
                gross += std::fabs(w(t, j));
            }
            EXPECT_NEAR(net, 0.0, 1e-12);
            EXPECT_TRUE(gross == 0.0 || std::fabs(gross - 1.0) < 1e-12) << gross;
        }
    }
}

TEST(SignalToWeights, ScaleInvariant) {
    const PanelSet p = testing::random_panel(4, 20, 9, 0.1);
    Matrix scaled = p.field("x").values;
    for (double& v : scaled.values()) {
        if (!is_missing(v)) v *= 37.5;
    }
    EXPECT_TRUE(identical(signal_to_weights(p.field("x").values), signal_to_weights(scaled)));
}

TEST(Metrics, SharpeFixture) {
    // mean 0.001, sample std exactly 0.01
    const double c = 0.01 * std::sqrt(0.5);
    const std::vector<double> daily{0.001 + c, 0.001 - c};
    EXPECT_NEAR(annualized_sharpe(daily), 0.1 * std::sqrt(252.0), 1e-12);
    EXPECT_NEAR(annualized_sharpe(daily), 1.587, 1e-3);
}

TEST(Metrics, AlternatingPnlHasZeroSharpe) {
    std::vector<double> daily;
    for (int k = 0; k < 100; ++k) daily.push_back(k % 2 == 0 ? 0.01 : -0.01);
    EXPECT_NEAR(annualized_sharpe(daily), 0.0, 1e-12);
    EXPECT_EQ(annualized_sharpe(std::vector<double>{0.01}), 0.0);
    EXPECT_EQ(annualized_sharpe(std::vector<double>{0.01, 0.01}), 0.0);
}

TEST(Metrics, DrawdownFixture) {
    EXPECT_NEAR(max_drawdown(std::vector<double>{0, 0.2, -0.1, 0.1}), 0.3, 1e-12);
    EXPECT_NEAR(max_drawdown(std::vector<double>{-0.1, -0.05}), 0.1, 1e-12);
    EXPECT_EQ(max_drawdown(std::vector<double>{0.1, 0.2}), 0.0);
}

TEST(Metrics, AnnualizedReturn) {
    EXPECT_NEAR(annualized_return(0.21, 504), 0.1, 1e-12);
    EXPECT_EQ(annualized_return(-1.5, 252), -1.0);
    EXPECT_EQ(annualized_return(0.0, 0), 0.0);
}

TEST(RunBacktest, TurnoverFixture) {
    PanelSet p = panel_of({{"returns", matrix_of({{0, 0}, {0, 0}})}});
    const auto r = run_backtest(matrix_of({{0.5, -0.5}, {0.3, -0.7}}), p);
    // day 1 from flat: 0.5, day 2: 0.2
    EXPECT_NEAR(r.report.turnover, (0.5 + 0.2) / 2.0, 1e-12);
    const auto day2 = run_backtest(matrix_of({{0.5, -0.5}, {0.3, -0.7}}), p, 0.0, DateRange{1, 2});
    EXPECT_NEAR(day2.report.turnover, 0.2, 1e-12);
}

TEST(RunBacktest, StaticWeightsTradeOnlyOnce) {
    const PanelSet p = testing::random_panel(5, 10, 4);
    Matrix w(10, 4, 0.0);
    for (std::size_t t = 0; t < 10; ++t) {
        w(t, 0) = 0.5;
        w(t, 1) = -0.5;
    }
    const auto r = run_backtest(w, p);
    EXPECT_NEAR(r.report.turnover, 0.5 / 10.0, 1e-12);
    EXPECT_NEAR(r.report.margin, 1.0, 1e-12);
}

// Independent daily loop over the stated PnL formula.
std::vector<double> naive_pnl(const Matrix& w, const Matrix& r, double cost_bps) {
    std::vector<double> out;
    for (std::size_t t = 0; t < w.rows(); ++t) {
        double pnl = 0, turn = 0;
        for (std::size_t j = 0; j < w.cols(); ++j) {
            const double prev = t == 0 ? 0.0 : w(t - 1, j);
            if (t > 0 && !is_missing(r(t, j))) pnl += prev * r(t, j);
            turn += std::fabs(w(t, j) - prev);
        }
        out.push_back(pnl - cost_bps * 1e-4 * 0.5 * turn);
    }
    return out;
}

TEST(RunBacktest, MatchesNaiveDailyLoop) {
    const PanelSet p = testing::random_panel(6, 80, 12, 0.05);
    const Matrix w = signal_to_weights(p.field("x").values);
    for (double cost : {0.0, 5.0}) {
        const auto r = run_backtest(w, p, cost);
        const auto want = naive_pnl(w, p.field("returns").values, cost);
        ASSERT_EQ(r.pnl.size(), want.size());
        double cum = 0;
        for (std::size_t t = 0; t < want.size(); ++t) {
            cum += want[t];
            EXPECT_NEAR(r.pnl.daily_pnl[t], want[t], 1e-15);
            EXPECT_NEAR(r.pnl.cum_pnl[t], cum, 1e-13);
        }
        EXPECT_NEAR(r.report.sharpe, annualized_sharpe(want), 1e-9);
        EXPECT_EQ(r.report.n_days, 80U);
    }
}

TEST(RunBacktest, NoLookahead) {
    const PanelSet p = testing::random_panel(7, 60, 10);
    const Matrix w = signal_to_weights(p.field("x").values);
    const auto base = run_backtest(w, p);
    for (std::size_t t : {5UL, 30UL, 59UL}) {
        Matrix r = p.field("returns").values;
        for (std::size_t j = 0; j < 10; ++j) r(t, j) += 0.5;
        PanelSet q = p;
        q.set_field("returns", r);
        const auto bumped = run_backtest(w, q);
        for (std::size_t s = 0; s < t; ++s) EXPECT_EQ(bumped.pnl.daily_pnl[s], base.pnl.daily_pnl[s]);
    }
}

TEST(RunBacktest, CostIsMonotone) {
    const PanelSet p = testing::random_panel(8, 60, 10);
    const Matrix w = signal_to_weights(p.field("x").values);
    double prev = run_backtest(w, p, 0.0).pnl.cum_pnl.back();
    for (double cost : {1.0, 5.0, 20.0, 100.0}) {
        const double total = run_backtest(w, p, cost).pnl.cum_pnl.back();
        EXPECT_LE(total, prev);
        prev = total;
    }
}

TEST(RunBacktest, ZeroReturnsGiveZeroMetrics) {
    PanelSet p = testing::random_panel(9, 40, 6);
    p.set_field("returns", Matrix(40, 6, 0.0));
    const auto r = run_backtest(signal_to_weights(p.field("x").values), p);
    for (double v : r.pnl.daily_pnl) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(r.report.sharpe, 0.0);
    EXPECT_EQ(r.report.max_drawdown, 0.0);
    EXPECT_EQ(r.report.annual_return, 0.0);
}

TEST(RunBacktest, MissingReturnsField) {
    const PanelSet p = panel_of({{"x", matrix_of({{1, 2}})}});
    try {
        run_backtest(matrix_of({{0.5, -0.5}}), p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingReturns);
    }
}

TEST(SplitSample, DefaultFractions) {
    const SampleSplit s = split_sample(TradingCalendar(testing::consecutive_dates(1000)));
    EXPECT_EQ(s.train, (DateRange{0, 600}));
    EXPECT_EQ(s.validation, (DateRange{600, 800}));
    EXPECT_EQ(s.test, (DateRange{800, 1000}));
}

TEST(SplitSample, SmallCalendarWithLoweredMinimum) {
    const SampleSplit s = split_sample(TradingCalendar(testing::consecutive_dates(8)), {0.5, 0.25, 0.25}, 8);
    EXPECT_EQ(s.train.size(), 4U);
    EXPECT_EQ(s.validation.size(), 2U);
    EXPECT_EQ(s.test.size(), 2U);
}

TEST(SplitSample, Errors) {
    const TradingCalendar small(testing::consecutive_dates(59));
    try {
        split_sample(small);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewDates);
    }
    const TradingCalendar cal(testing::consecutive_dates(100));
    for (std::array<double, 3> bad : {std::array<double, 3>{0.5, 0.5, 0.0}, {0.6, 0.3, 0.3}, {-0.2, 0.6, 0.6}}) {
        try {
            split_sample(cal, bad);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
        }
    }
}

TEST(SplitSample, RangesTileRandomCalendars) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 60 + rng() % 3000;
        double a = unit(rng), b = unit(rng), c = unit(rng);
        const double sum = a + b + c;
        a /= sum;
        b /= sum;
        c = 1.0 - a - b;
        SampleSplit s;
        try {
            s = split_sample(TradingCalendar(testing::consecutive_dates(n)), {a, b, c});
        } catch (const Error& e) {
            // rounding can leave an empty range on tiny fractions
            EXPECT_EQ(e.code(), ErrorCode::TooFewDates);
            continue;
        }
        EXPECT_EQ(s.train.begin, 0U);
        EXPECT_EQ(s.train.end, s.validation.begin);
        EXPECT_EQ(s.validation.end, s.test.begin);
        EXPECT_EQ(s.test.end, n);
        EXPECT_GT(s.train.size(), 0U);
        EXPECT_GT(s.validation.size(), 0U);
        EXPECT_GT(s.test.size(), 0U);
    }
}

TEST(Serialization, ReportRoundTrip) {
    const PanelSet p = testing::random_panel(11, 30, 5);
    const auto r = run_backtest(signal_to_weights(p.field("x").values), p);
    EXPECT_EQ(report_from_json(to_json(r.report)), r.report);
}

}  // namespace
}  // namespace alphadesk
