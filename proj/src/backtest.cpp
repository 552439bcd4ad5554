#include "alphadesk/backtest.hpp"

#include <cmath>
#include <fstream>

#include "alphadesk/stats.hpp"

namespace alphadesk {

PositionMatrix signal_to_weights(const SignalMatrix& signal, std::optional<DateRange> rows) {
    PositionMatrix w(signal.rows(), signal.cols(), 0.0);
    const DateRange r = rows.value_or(DateRange{0, signal.rows()});
    std::vector<std::size_t> idx;
    std::vector<double> vals;
    for (std::size_t t = r.begin; t < std::min(r.end, signal.rows()); ++t) {
        idx.clear();
        vals.clear();
        for (std::size_t j = 0; j < signal.cols(); ++j) {
            const double v = signal(t, j);
            if (is_missing(v)) continue;
            idx.push_back(j);
            vals.push_back(v);
        }
        if (idx.size() < 2) continue;
        auto ranks = fractional_ranks(vals);
        const double m = mean(ranks);
        double gross = 0.0;
        for (double& x : ranks) {
            x -= m;
            gross += std::fabs(x);
        }
        if (gross < kStdFloor) continue;
        for (std::size_t k = 0; k < idx.size(); ++k) w(t, idx[k]) = ranks[k] / gross;
    }
    return w;
}

double annualized_sharpe(std::span<const double> daily) {
    if (daily.size() < 2) return 0.0;
    const double sd = sample_std(daily);
    if (sd < kStdFloor) return 0.0;
    return std::sqrt(kTradingDaysPerYear) * mean(daily) / sd;
}

double max_drawdown(std::span<const double> cum) {
    double peak = 0.0;
    double worst = 0.0;
    for (double c : cum) {
        peak = std::max(peak, c);
        worst = std::max(worst, peak - c);
    }
    return worst;
}

double annualized_return(double total, std::size_t n_days) {
    if (n_days == 0) return 0.0;
    if (1.0 + total <= 0.0) return -1.0;
    return std::pow(1.0 + total, kTradingDaysPerYear / static_cast<double>(n_days)) - 1.0;
}

BacktestResult run_backtest(const PositionMatrix& weights, const PanelSet& panel, double cost_bps,
                            std::optional<DateRange> range) {
    if (!panel.has_field("returns")) {
        throw Error(ErrorCode::MissingReturns, "panel has no returns field");
    }
    const Matrix& ret = panel.field("returns").values;
    if (!weights.same_shape(ret)) {
        throw Error(ErrorCode::ShapeMismatch, "weights do not match the panel shape");
    }
    const DateRange r = range.value_or(DateRange{0, panel.n_dates()});
    const std::size_t end = std::min(r.end, panel.n_dates());
    const std::size_t n = weights.cols();
    const double cost = cost_bps * 1e-4;

    BacktestResult out;
    auto& pnl = out.pnl;
    double cum = 0.0;
    double turnover_sum = 0.0;
    double gross_sum = 0.0;
    for (std::size_t t = r.begin; t < end; ++t) {
        double day = 0.0;
        double turnover = 0.0;
        double gross = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double prev = t > 0 ? weights(t - 1, j) : 0.0;
            const double rv = ret(t, j);
            if (prev != 0.0 && !is_missing(rv)) day += prev * rv;
            turnover += std::fabs(weights(t, j) - prev);
            gross += std::fabs(weights(t, j));
        }
        turnover *= 0.5;
        day -= cost * turnover;
        cum += day;
        turnover_sum += turnover;
        gross_sum += gross;
        pnl.dates.push_back(panel.calendar()[t]);
        pnl.daily_pnl.push_back(day);
        pnl.cum_pnl.push_back(cum);
    }

    auto& rep = out.report;
    rep.n_days = pnl.size();
    if (rep.n_days == 0) return out;
    const double days = static_cast<double>(rep.n_days);
    rep.sharpe = annualized_sharpe(pnl.daily_pnl);
    rep.annual_return = annualized_return(cum, rep.n_days);
    rep.max_drawdown = max_drawdown(pnl.cum_pnl);
    rep.turnover = turnover_sum / days;
    rep.margin = gross_sum / days;
    return out;
}

SampleSplit split_sample(const TradingCalendar& calendar, std::array<double, 3> fractions,
                         std::size_t min_dates) {
    const std::size_t n = calendar.size();
    if (n < min_dates) {
        throw Error(ErrorCode::TooFewDates, "calendar has " + std::to_string(n) + " dates, need " +
                                                std::to_string(min_dates));
    }
    double total = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) throw Error(ErrorCode::InvalidConfig, "split fractions must be positive");
        total += f;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
        throw Error(ErrorCode::InvalidConfig, "split fractions must sum to 1");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
        throw Error(ErrorCode::TooFewDates, "split leaves an empty segment");
    }
    SampleSplit s;
    s.train = {0, n_train};
    s.validation = {n_train, n_train + n_val};
    s.test = {n_train + n_val, n};
    return s;
}

nlohmann::json to_json(const BacktestReport& r) {
    return {{"sharpe", r.sharpe},
            {"annual_return", r.annual_return},
            {"max_drawdown", r.max_drawdown},
            {"turnover", r.turnover},
            {"margin", r.margin},
            {"n_days", r.n_days}};
}

BacktestReport report_from_json(const nlohmann::json& j) {
    BacktestReport r;
    r.sharpe = j.at("sharpe").get<double>();
    r.annual_return = j.at("annual_return").get<double>();
    r.max_drawdown = j.at("max_drawdown").get<double>();
    r.turnover = j.at("turnover").get<double>();
    r.margin = j.at("margin").get<double>();
    r.n_days = j.at("n_days").get<std::size_t>();
    return r;
}

nlohmann::json to_json(const PnlSeries& p) {
    nlohmann::json dates = nlohmann::json::array();
    for (const auto& d : p.dates) dates.push_back(d.iso());
    return {{"dates", dates}, {"daily_pnl", p.daily_pnl}, {"cum_pnl", p.cum_pnl}};
}

nlohmann::json to_json(const SampleSplit& s) {
    auto range = [](const DateRange& r) { return nlohmann::json::array({r.begin, r.end}); };
    return {{"train", range(s.train)}, {"validation", range(s.validation)}, {"test", range(s.test)}};
}

void write_pnl_csv(const PnlSeries& pnl, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "date,daily_pnl,cum_pnl\n";
    char buf[96];
    for (std::size_t t = 0; t < pnl.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", pnl.daily_pnl[t], pnl.cum_pnl[t]);
        out << pnl.dates[t].iso() << ',' << buf << '\n';
    }
}

}  // namespace alphadesk
