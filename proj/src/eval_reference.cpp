// Cell-by-cell reference evaluator. Each cell is computed directly from the
// values of its children at the cells it depends on; nothing is shared with the
// vectorised kernels in eval.cpp. Child cells are memoised per node.
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "alphadesk/eval.hpp"

namespace alphadesk {

namespace {

class Reference {
public:
    explicit Reference(const PanelSet& panel) : panel_(panel) {}

    double cell(const AlphaExpr& e, std::size_t t, std::size_t j) {
        auto& slot = memo_[&e];
        if (slot.empty()) slot.assign(panel_.n_dates() * panel_.n_symbols(), kUnset);
        double& v = slot[t * panel_.n_symbols() + j];
        if (!is_unset(v)) return v;
        const double raw = compute(e, t, j);
        v = std::isfinite(raw) ? raw : kMissing;
        return v;
    }

private:
    // Signalling value distinct from the quiet-NaN missing sentinel.
    static constexpr double kUnset = std::numeric_limits<double>::infinity();
    static bool is_unset(double v) { return v == kUnset; }

    // Values of `e` at dates t-w+1..t for symbol j; empty if any is missing.
    std::vector<double> window(const AlphaExpr& e, std::size_t t, std::size_t j, int w) {
        const auto uw = static_cast<std::size_t>(w);
        if (t + 1 < uw) return {};
        std::vector<double> out;
        out.reserve(uw);
        for (std::size_t s = t + 1 - uw; s <= t; ++s) {
            const double v = cell(e, s, j);
            if (is_missing(v)) return {};
            out.push_back(v);
        }
        return out;
    }

    // Non-missing values of `e` at date t over the given columns, with their columns.
    std::vector<std::pair<std::size_t, double>> section(const AlphaExpr& e, std::size_t t,
                                                        const std::vector<std::size_t>& cols) {
        std::vector<std::pair<std::size_t, double>> out;
        for (std::size_t k : cols) {
            const double v = cell(e, t, k);
            if (!is_missing(v)) out.emplace_back(k, v);
        }
        return out;
    }

    std::vector<std::size_t> all_columns() const {
        std::vector<std::size_t> c(panel_.n_symbols());
        for (std::size_t k = 0; k < c.size(); ++k) c[k] = k;
        return c;
    }

    std::vector<std::size_t> group_columns(std::size_t j) const {
        std::vector<std::size_t> c;
        const auto& gid = panel_.group_ids();
        for (std::size_t k = 0; k < gid.size(); ++k) {
            if (gid[k] == gid[j]) c.push_back(k);
        }
        return c;
    }

    static double rank_in(const std::vector<std::pair<std::size_t, double>>& xs, std::size_t j) {
        if (xs.size() == 1) return 0.5;
        double mine = 0.0;
        for (const auto& [k, v] : xs) {
            if (k == j) mine = v;
        }
        double less = 0.0, equal = 0.0;
        for (const auto& [k, v] : xs) {
            if (v < mine) less += 1.0;
            if (v == mine) equal += 1.0;
        }
        return (less + (equal - 1.0) * 0.5) / static_cast<double>(xs.size() - 1);
    }

    static double mean_of(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }

    static double sum_sq_dev(const std::vector<double>& v, double mean) {
        double s = 0.0;
        for (double x : v) s += (x - mean) * (x - mean);
        return s;
    }

    double horizontal(const AlphaExpr& child, Op op, std::size_t t, std::size_t j, bool group) {
        if (group && panel_.group_ids()[j] < 0) return kMissing;
        const double mine = cell(child, t, j);
        if (is_missing(mine)) return kMissing;
        const auto xs = section(child, t, group ? group_columns(j) : all_columns());
        std::vector<double> vals;
        for (const auto& p : xs) vals.push_back(p.second);
        switch (op) {
            case Op::Rank:
            case Op::GroupRank: return rank_in(xs, j);
            case Op::Normalize: {
                double gross = 0.0;
                for (double v : vals) gross += std::fabs(v);
                return gross == 0.0 ? 0.0 : mine / gross;
            }
            case Op::Demean: return mine - mean_of(vals);
            case Op::GroupMean: return mean_of(vals);
            case Op::Zscore:
            case Op::GroupZscore: {
                if (vals.size() < 2) return kMissing;
                const double m = mean_of(vals);
                const double sd = std::sqrt(sum_sq_dev(vals, m) / static_cast<double>(vals.size() - 1));
                if (sd < kStdFloor) return kMissing;
                return (mine - m) / sd;
            }
            default: return kMissing;
        }
    }

    double compute(const AlphaExpr& e, std::size_t t, std::size_t j) {
        if (e.is_number()) return e.number;
        if (e.is_field()) return panel_.field(e.name).values(t, j);
        const auto& a = e.args;

        auto unary = [&](auto f) {
            const double x = cell(a[0], t, j);
            return is_missing(x) ? kMissing : f(x);
        };
        auto binary = [&](auto f) {
            const double x = cell(a[0], t, j);
            const double y = cell(a[1], t, j);
            return (is_missing(x) || is_missing(y)) ? kMissing : f(x, y);
        };
        const int w = a.size() > 1 && a.back().is_number() ? static_cast<int>(a.back().number) : 0;

        switch (e.op) {
            case Op::Add: return binary([](double x, double y) { return x + y; });
            case Op::Subtract: return binary([](double x, double y) { return x - y; });
            case Op::Multiply: return binary([](double x, double y) { return x * y; });
            case Op::Divide: return binary([](double x, double y) { return y == 0.0 ? kMissing : x / y; });
            case Op::Power: return binary([](double x, double y) { return std::pow(x, y); });
            case Op::Min: return binary([](double x, double y) { return y < x ? y : x; });
            case Op::Max: return binary([](double x, double y) { return x < y ? y : x; });
            case Op::Neg: return unary([](double x) { return -x; });
            case Op::Abs: return unary([](double x) { return x < 0 ? -x : x; });
            case Op::Sign: return unary([](double x) { return x > 0 ? 1.0 : x < 0 ? -1.0 : 0.0; });
            case Op::Log: return unary([](double x) { return x > 0 ? std::log(x) : kMissing; });
            case Op::Sqrt: return unary([](double x) { return x >= 0 ? std::sqrt(x) : kMissing; });
            case Op::Inverse: return unary([](double x) { return x != 0 ? 1.0 / x : kMissing; });

            case Op::Rank:
            case Op::Zscore:
            case Op::Demean:
            case Op::Normalize: return horizontal(a[0], e.op, t, j, false);
            case Op::Quantile: {
                const double r = horizontal(a[0], Op::Rank, t, j, false);
                if (is_missing(r)) return kMissing;
                const double q = a[1].number;
                const double b = std::floor(r * q);
                return b > q - 1.0 ? q - 1.0 : b;
            }
            case Op::GroupRank:
            case Op::GroupMean:
            case Op::GroupZscore: return horizontal(a[0], e.op, t, j, true);

            case Op::And: return binary([](double x, double y) { return x != 0 && y != 0 ? 1.0 : 0.0; });
            case Op::Or: return binary([](double x, double y) { return x != 0 || y != 0 ? 1.0 : 0.0; });
            case Op::Not: return unary([](double x) { return x != 0 ? 0.0 : 1.0; });
            case Op::Equal: return binary([](double x, double y) { return x == y ? 1.0 : 0.0; });
            case Op::Less: return binary([](double x, double y) { return x < y ? 1.0 : 0.0; });
            case Op::Greater: return binary([](double x, double y) { return x > y ? 1.0 : 0.0; });
            case Op::IfElse: {
                const double c = cell(a[0], t, j);
                if (is_missing(c)) return kMissing;
                return c != 0 ? cell(a[1], t, j) : cell(a[2], t, j);
            }

            case Op::TsDelay:
            case Op::TsDelta: {
                const auto lag = static_cast<std::size_t>(w);
                if (t < lag) return kMissing;
                const double past = cell(a[0], t - lag, j);
                if (is_missing(past)) return kMissing;
                if (e.op == Op::TsDelay) return past;
                const double now = cell(a[0], t, j);
                return is_missing(now) ? kMissing : now - past;
            }
            case Op::TsMacd: return macd_cell(a[0], t, j, static_cast<int>(a[1].number),
                                              static_cast<int>(a[2].number));
            case Op::TaRsi: {
                const auto xs = window(a[0], t, j, w + 1);
                if (xs.empty()) return kMissing;
                double gain = 0.0, loss = 0.0;
                for (std::size_t k = 1; k < xs.size(); ++k) {
                    const double d = xs[k] - xs[k - 1];
                    if (d > 0) gain += d;
                    if (d < 0) loss += -d;
                }
                const double ag = gain / w;
                const double al = loss / w;
                if (al == 0.0) return ag > 0.0 ? 100.0 : 50.0;
                return 100.0 - 100.0 / (1.0 + ag / al);
            }
            case Op::Sin: return unary([](double x) { return std::sin(x); });
            case Op::Cos: return unary([](double x) { return std::cos(x); });
            case Op::Tail: {
                const double lo = a[1].number, hi = a[2].number, v = a[3].number;
                return unary([&](double x) { return x > lo && x < hi ? v : x; });
            }
            default: break;
        }

        const auto& sig = signature(e.op);
        if (sig.slots.size() == 2) {
            const auto xs = window(a[0], t, j, w);
            if (xs.empty()) return kMissing;
            return ts_single(e.op, xs);
        }
        const auto xs = window(a[0], t, j, w);
        const auto ys = window(a[1], t, j, w);
        if (xs.empty() || ys.empty()) return kMissing;
        return ts_pair(e.op, xs, ys);
    }

    double macd_cell(const AlphaExpr& x, std::size_t t, std::size_t j, int fast, int slow) {
        if (is_missing(cell(x, t, j))) return kMissing;
        std::size_t start = t;
        while (start > 0 && !is_missing(cell(x, start - 1, j))) --start;
        const std::size_t need = static_cast<std::size_t>(std::max(fast, slow));
        if (t - start + 1 < need) return kMissing;
        const double af = 2.0 / (fast + 1.0);
        const double as = 2.0 / (slow + 1.0);
        double ef = cell(x, start, j);
        double es = ef;
        for (std::size_t s = start + 1; s <= t; ++s) {
            const double v = cell(x, s, j);
            ef = af * v + (1.0 - af) * ef;
            es = as * v + (1.0 - as) * es;
        }
        return ef - es;
    }

    static double ts_single(Op op, const std::vector<double>& xs) {
        const auto n = static_cast<double>(xs.size());
        const double today = xs.back();
        const double m = mean_of(xs);
        const double sd = std::sqrt(sum_sq_dev(xs, m) / (n - 1.0));
        switch (op) {
            case Op::TsMean: return m;
            case Op::TsSum: {
                double s = 0.0;
                for (double x : xs) s += x;
                return s;
            }
            case Op::TsStd: return sd;
            case Op::TsMin: {
                double v = xs[0];
                for (double x : xs) v = x < v ? x : v;
                return v;
            }
            case Op::TsMax: {
                double v = xs[0];
                for (double x : xs) v = x > v ? x : v;
                return v;
            }
            case Op::TsRank: {
                double less = 0.0, equal = 0.0;
                for (double x : xs) {
                    if (x < today) less += 1.0;
                    if (x == today) equal += 1.0;
                }
                return (less + 0.5 * (equal - 1.0)) / (n - 1.0);
            }
            case Op::TsZscore: return sd < kStdFloor ? kMissing : (today - m) / sd;
            case Op::TsIr: return sd < kStdFloor ? kMissing : m / sd;
            case Op::TsSharpe: return sd < kStdFloor ? kMissing : std::sqrt(kTradingDaysPerYear) * (m / sd);
            case Op::TsSkew:
            case Op::TsKurtosis: {
                double m2 = 0.0, m3 = 0.0, m4 = 0.0;
                for (double x : xs) {
                    const double d = x - m;
                    m2 += d * d;
                    m3 += d * d * d;
                    m4 += d * d * d * d;
                }
                m2 /= n;
                m3 /= n;
                m4 /= n;
                if (std::sqrt(m2) < kStdFloor) return kMissing;
                return op == Op::TsSkew ? m3 / std::pow(m2, 1.5) : m4 / (m2 * m2) - 3.0;
            }
            case Op::TsArgMax:
            case Op::TsArgMin: {
                // Scan newest to oldest; strict improvement keeps the most recent tie.
                std::size_t best = xs.size() - 1;
                for (std::size_t k = xs.size() - 1; k-- > 0;) {
                    const bool better = op == Op::TsArgMax ? xs[k] > xs[best] : xs[k] < xs[best];
                    if (better) best = k;
                }
                return static_cast<double>(xs.size() - 1 - best);
            }
            default: return kMissing;
        }
    }

    static double ts_pair(Op op, const std::vector<double>& xs, const std::vector<double>& ys) {
        const auto n = static_cast<double>(xs.size());
        const double mx = mean_of(xs);
        const double my = mean_of(ys);
        double sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            sxx += (xs[k] - mx) * (xs[k] - mx);
            syy += (ys[k] - my) * (ys[k] - my);
            sxy += (xs[k] - mx) * (ys[k] - my);
        }
        const double sdx = std::sqrt(sxx / (n - 1.0));
        const double sdy = std::sqrt(syy / (n - 1.0));
        switch (op) {
            case Op::TsCorr: {
                if (sdx < kStdFloor || sdy < kStdFloor) return kMissing;
                const double r = sxy / std::sqrt(sxx * syy);
                return r > 1.0 ? 1.0 : r < -1.0 ? -1.0 : r;
            }
            case Op::TsCov: return sxy / (n - 1.0);
            case Op::TsBeta: return sdy < kStdFloor ? kMissing : sxy / syy;
            case Op::TsRegression:
            case Op::TsRegressionRes: {
                // first argument is the dependent variable
                const auto& y = xs;
                const auto& x = ys;
                if (sdy < kStdFloor) return kMissing;
                const double beta = sxy / syy;
                const double fitted = (mx - beta * my) + beta * x.back();
                return op == Op::TsRegression ? fitted : y.back() - fitted;
            }
            case Op::TsCoSkewness:
            case Op::TsCoKurtosis: {
                const double px = std::sqrt(sxx / n);
                const double py = std::sqrt(syy / n);
                if (px < kStdFloor || py < kStdFloor) return kMissing;
                double acc = 0.0;
                for (std::size_t k = 0; k < xs.size(); ++k) {
                    const double dx = xs[k] - mx;
                    const double dy = ys[k] - my;
                    acc += op == Op::TsCoSkewness ? dx * dy * dy : dx * dy * dy * dy;
                }
                const double moment = acc / n;
                return op == Op::TsCoSkewness ? moment / (px * py * py) : moment / (px * py * py * py);
            }
            default: return kMissing;
        }
    }

    const PanelSet& panel_;
    std::unordered_map<const AlphaExpr*, std::vector<double>> memo_;
};

}  // namespace

SignalMatrix reference_evaluate(const AlphaExpr& expr, const PanelSet& panel) {
    Reference ref(panel);
    SignalMatrix out(panel.n_dates(), panel.n_symbols());
    for (std::size_t t = 0; t < panel.n_dates(); ++t) {
        for (std::size_t j = 0; j < panel.n_symbols(); ++j) out(t, j) = ref.cell(expr, t, j);
    }
    return out;
}

}  // namespace alphadesk
