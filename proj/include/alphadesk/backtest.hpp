// Dollar-neutral positions from signals, daily PnL simulation and the metric suite.
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphadesk/eval.hpp"
#include "alphadesk/panel.hpp"

namespace alphadesk {

/// Capital-fraction weights, dates x symbols. Each row sums to 0 with gross 1,
/// or is all zero (flat day). Never contains missing cells.
using PositionMatrix = Matrix;

struct PnlSeries {
    std::vector<Date> dates;
    std::vector<double> daily_pnl;
    std::vector<double> cum_pnl;

    std::size_t size() const noexcept { return daily_pnl.size(); }
};

struct BacktestReport {
    double sharpe = 0.0;
    double annual_return = 0.0;
    double max_drawdown = 0.0;
    double turnover = 0.0;
    double margin = 0.0;
    std::size_t n_days = 0;

    friend bool operator==(const BacktestReport&, const BacktestReport&) = default;
};

struct BacktestResult {
    PnlSeries pnl;
    BacktestReport report;
};

struct SampleSplit {
    DateRange train;
    DateRange validation;
    DateRange test;
};

/// Rank, demean and scale each date's cross-section to gross 1. Dates with fewer
/// than two names or a fully tied cross-section are flat. Only rows in `rows`
/// are filled; the rest stay zero.
PositionMatrix signal_to_weights(const SignalMatrix& signal, std::optional<DateRange> rows = {});

/// Simulates dates in `range` (whole calendar by default). Positions held at
/// t-1 earn returns at t; a missing return contributes 0. Turnover on the
/// first simulated date is measured against the previous calendar date's book.
/// Throws MissingReturns when the panel has no `returns` field.
BacktestResult run_backtest(const PositionMatrix& weights, const PanelSet& panel,
                            double cost_bps = 0.0, std::optional<DateRange> range = {});

/// Contiguous chronological split; train and validation sizes are rounded,
/// test takes the remainder. Throws TooFewDates below `min_dates` and
/// InvalidConfig for fractions that are not positive or do not sum to 1.
SampleSplit split_sample(const TradingCalendar& calendar,
                         std::array<double, 3> fractions = {0.6, 0.2, 0.2},
                         std::size_t min_dates = 60);

/// sqrt(252) * mean / sample std; 0 with fewer than two points or std < kStdFloor.
double annualized_sharpe(std::span<const double> daily);
/// Largest drop of a cumulative series from its running peak; the peak starts at 0.
double max_drawdown(std::span<const double> cum);
/// (1 + total)^(252 / n_days) - 1, or -1 once the total loss reaches 100%.
double annualized_return(double total, std::size_t n_days);

nlohmann::json to_json(const BacktestReport& r);
BacktestReport report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PnlSeries& p);
nlohmann::json to_json(const SampleSplit& s);

/// CSV `date,daily_pnl,cum_pnl`.
void write_pnl_csv(const PnlSeries& pnl, const std::filesystem::path& path);

}  // namespace alphadesk
