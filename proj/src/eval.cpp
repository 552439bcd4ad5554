#include "alphadesk/eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace alphadesk {

Schema schema_of(const PanelSet& panel, int max_depth) {
    Schema s;
    s.fields = panel.field_names();
    s.has_groups = panel.has_groups();
    s.max_depth = max_depth;
    return s;
}

namespace {

inline double clean(double v) { return std::isfinite(v) ? v : kMissing; }

template <class F>
Matrix map1(const Matrix& a, F f) {
    Matrix out(a.rows(), a.cols());
    auto in = a.values();
    auto o = out.values();
    for (std::size_t k = 0; k < in.size(); ++k) {
        if (!is_missing(in[k])) o[k] = clean(f(in[k]));
    }
    return out;
}

template <class F>
Matrix map2(const Matrix& a, const Matrix& b, F f) {
    Matrix out(a.rows(), a.cols());
    auto x = a.values();
    auto y = b.values();
    auto o = out.values();
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!is_missing(x[k]) && !is_missing(y[k])) o[k] = clean(f(x[k], y[k]));
    }
    return out;
}

// ---- window statistics over contiguous oldest->newest buffers -------------

struct Centered {
    double mean;
    double ss;  // sum of squared deviations
};

inline Centered centered(const double* x, int w) {
    double sum = 0.0;
    for (int k = 0; k < w; ++k) sum += x[k];
    const double mean = sum / w;
    double ss = 0.0;
    for (int k = 0; k < w; ++k) {
        const double d = x[k] - mean;
        ss += d * d;
    }
    return {mean, ss};
}

double w_mean(const double* x, int w) {
    double sum = 0.0;
    for (int k = 0; k < w; ++k) sum += x[k];
    return sum / w;
}

double w_sum(const double* x, int w) {
    double sum = 0.0;
    for (int k = 0; k < w; ++k) sum += x[k];
    return sum;
}

double w_std(const double* x, int w) {
    const auto c = centered(x, w);
    return std::sqrt(c.ss / (w - 1));
}

double w_zscore(const double* x, int w) {
    const auto c = centered(x, w);
    const double sd = std::sqrt(c.ss / (w - 1));
    if (sd < kStdFloor) return kMissing;
    return (x[w - 1] - c.mean) / sd;
}

double w_ir(const double* x, int w) {
    const auto c = centered(x, w);
    const double sd = std::sqrt(c.ss / (w - 1));
    if (sd < kStdFloor) return kMissing;
    return c.mean / sd;
}

double w_sharpe(const double* x, int w) {
    const double ir = w_ir(x, w);
    return is_missing(ir) ? kMissing : std::sqrt(kTradingDaysPerYear) * ir;
}

double w_min(const double* x, int w) { return *std::min_element(x, x + w); }
double w_max(const double* x, int w) { return *std::max_element(x, x + w); }

double w_rank(const double* x, int w) {
    const double today = x[w - 1];
    double less = 0.0;
    double equal_others = 0.0;
    for (int k = 0; k < w - 1; ++k) {
        if (x[k] < today) less += 1.0;
        else if (x[k] == today) equal_others += 1.0;
    }
    return (less + 0.5 * equal_others) / (w - 1);
}

template <bool Max>
double w_arg_extreme(const double* x, int w) {
    double best = x[w - 1];
    int arg = 0;
    for (int back = 1; back < w; ++back) {
        const double v = x[w - 1 - back];
        if (Max ? v > best : v < best) {
            best = v;
            arg = back;
        }
    }
    return arg;
}

template <bool Kurt>
double w_shape(const double* x, int w) {
    const double mean = w_mean(x, w);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (int k = 0; k < w; ++k) {
        const double d = x[k] - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= w;
    m3 /= w;
    m4 /= w;
    if (std::sqrt(m2) < kStdFloor) return kMissing;
    return Kurt ? m4 / (m2 * m2) - 3.0 : m3 / std::pow(m2, 1.5);
}

double w_rsi(const double* x, int n_values) {
    // n_values = w + 1 observations -> w changes
    const int w = n_values - 1;
    double gain = 0.0, loss = 0.0;
    for (int k = 1; k < n_values; ++k) {
        const double d = x[k] - x[k - 1];
        if (d > 0) gain += d;
        else if (d < 0) loss += -d;
    }
    const double avg_gain = gain / w;
    const double avg_loss = loss / w;
    if (avg_loss == 0.0) return avg_gain > 0.0 ? 100.0 : 50.0;
    const double rs = avg_gain / avg_loss;
    return 100.0 - 100.0 / (1.0 + rs);
}

struct Co {
    double mx, my, sxx, syy, sxy;
};

inline Co co_moments(const double* x, const double* y, int w) {
    const double mx = w_mean(x, w);
    const double my = w_mean(y, w);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int k = 0; k < w; ++k) {
        const double dx = x[k] - mx;
        const double dy = y[k] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    return {mx, my, sxx, syy, sxy};
}

double w_corr(const double* x, const double* y, int w) {
    const auto c = co_moments(x, y, w);
    if (std::sqrt(c.sxx / (w - 1)) < kStdFloor || std::sqrt(c.syy / (w - 1)) < kStdFloor) {
        return kMissing;
    }
    return std::clamp(c.sxy / std::sqrt(c.sxx * c.syy), -1.0, 1.0);
}

double w_cov(const double* x, const double* y, int w) {
    return co_moments(x, y, w).sxy / (w - 1);
}

double w_beta(const double* x, const double* y, int w) {
    const auto c = co_moments(x, y, w);
    if (std::sqrt(c.syy / (w - 1)) < kStdFloor) return kMissing;
    return c.sxy / c.syy;
}

// y on x: fitted value at today.
template <bool Residual>
double w_regression(const double* y, const double* x, int w) {
    const auto c = co_moments(x, y, w);
    if (std::sqrt(c.sxx / (w - 1)) < kStdFloor) return kMissing;
    const double beta = c.sxy / c.sxx;
    const double alpha = c.my - beta * c.mx;
    const double fitted = alpha + beta * x[w - 1];
    return Residual ? y[w - 1] - fitted : fitted;
}

template <int Power>
double w_co_moment(const double* x, const double* y, int w) {
    const auto c = co_moments(x, y, w);
    const double sx = std::sqrt(c.sxx / w);
    const double sy = std::sqrt(c.syy / w);
    if (sx < kStdFloor || sy < kStdFloor) return kMissing;
    double acc = 0.0;
    for (int k = 0; k < w; ++k) {
        const double dx = x[k] - c.mx;
        const double dy = y[k] - c.my;
        acc += Power == 2 ? dx * dy * dy : dx * dy * dy * dy;
    }
    const double e = acc / w;
    return Power == 2 ? e / (sx * sy * sy) : e / (sx * sy * sy * sy);
}

// ---- column drivers --------------------------------------------------------

std::vector<std::size_t> missing_prefix(const std::vector<double>& c) {
    std::vector<std::size_t> pm(c.size() + 1, 0);
    for (std::size_t k = 0; k < c.size(); ++k) pm[k + 1] = pm[k] + (is_missing(c[k]) ? 1 : 0);
    return pm;
}

// `span` consecutive observations ending today must be present.
template <class F>
Matrix rolling1(const Matrix& a, int span, F f) {
    Matrix out(a.rows(), a.cols());
    const auto n = a.rows();
    const auto s = static_cast<std::size_t>(span);
    std::vector<double> col;
    std::vector<double> res(n);
    for (std::size_t j = 0; j < a.cols(); ++j) {
        col = a.column(j);
        const auto pm = missing_prefix(col);
        std::fill(res.begin(), res.end(), kMissing);
        for (std::size_t t = s - 1; t < n; ++t) {
            if (pm[t + 1] - pm[t + 1 - s] != 0) continue;
            res[t] = clean(f(col.data() + t + 1 - s, span));
        }
        out.set_column(j, res);
    }
    return out;
}

template <class F>
Matrix rolling2(const Matrix& a, const Matrix& b, int span, F f) {
    Matrix out(a.rows(), a.cols());
    const auto n = a.rows();
    const auto s = static_cast<std::size_t>(span);
    std::vector<double> res(n);
    for (std::size_t j = 0; j < a.cols(); ++j) {
        const auto x = a.column(j);
        const auto y = b.column(j);
        const auto px = missing_prefix(x);
        const auto py = missing_prefix(y);
        std::fill(res.begin(), res.end(), kMissing);
        for (std::size_t t = s - 1; t < n; ++t) {
            if (px[t + 1] - px[t + 1 - s] != 0 || py[t + 1] - py[t + 1 - s] != 0) continue;
            res[t] = clean(f(x.data() + t + 1 - s, y.data() + t + 1 - s, span));
        }
        out.set_column(j, res);
    }
    return out;
}

Matrix lagged(const Matrix& a, int lag, bool delta) {
    Matrix out(a.rows(), a.cols());
    const auto l = static_cast<std::size_t>(lag);
    for (std::size_t t = l; t < a.rows(); ++t) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double past = a(t - l, j);
            if (is_missing(past)) continue;
            if (!delta) {
                out(t, j) = past;
            } else if (!is_missing(a(t, j))) {
                out(t, j) = clean(a(t, j) - past);
            }
        }
    }
    return out;
}

Matrix macd(const Matrix& a, int fast, int slow) {
    Matrix out(a.rows(), a.cols());
    const double af = 2.0 / (fast + 1.0);
    const double as = 2.0 / (slow + 1.0);
    const auto need = static_cast<std::size_t>(std::max(fast, slow));
    for (std::size_t j = 0; j < a.cols(); ++j) {
        std::size_t run = 0;
        double ef = 0.0, es = 0.0;
        for (std::size_t t = 0; t < a.rows(); ++t) {
            const double v = a(t, j);
            if (is_missing(v)) {
                run = 0;
                continue;
            }
            if (run == 0) {
                ef = v;
                es = v;
            } else {
                ef = af * v + (1.0 - af) * ef;
                es = as * v + (1.0 - as) * es;
            }
            ++run;
            if (run >= need) out(t, j) = clean(ef - es);
        }
    }
    return out;
}

// ---- cross-sectional -------------------------------------------------------

// Fractional ranks of `vals` (average ties), scaled to [0, 1].
void fractional_ranks(const std::vector<double>& vals, std::vector<double>& ranks,
                      std::vector<std::size_t>& order) {
    const std::size_t n = vals.size();
    ranks.assign(n, 0.5);
    if (n < 2) return;
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::size_t p = 0;
    while (p < n) {
        std::size_t q = p;
        while (q + 1 < n && vals[order[q + 1]] == vals[order[p]]) ++q;
        const double avg = (static_cast<double>(p) + static_cast<double>(q)) / 2.0;
        for (std::size_t k = p; k <= q; ++k) ranks[order[k]] = avg / static_cast<double>(n - 1);
        p = q + 1;
    }
}

enum class Xs { Rank, Zscore, Demean, Normalize, Mean };

// Applies `kind` to the values at `idx` within row `r` of `in`, writing into `out`.
void cross_section(const Matrix& in, std::size_t r, const std::vector<std::size_t>& idx, Xs kind,
                   Matrix& out, std::vector<double>& vals, std::vector<double>& ranks,
                   std::vector<std::size_t>& order) {
    const std::size_t n = idx.size();
    if (n == 0) return;
    vals.resize(n);
    for (std::size_t k = 0; k < n; ++k) vals[k] = in(r, idx[k]);
    switch (kind) {
        case Xs::Rank:
            fractional_ranks(vals, ranks, order);
            for (std::size_t k = 0; k < n; ++k) out(r, idx[k]) = ranks[k];
            return;
        case Xs::Normalize: {
            double gross = 0.0;
            for (double v : vals) gross += std::fabs(v);
            for (std::size_t k = 0; k < n; ++k) {
                out(r, idx[k]) = gross == 0.0 ? 0.0 : clean(vals[k] / gross);
            }
            return;
        }
        default: break;
    }
    double sum = 0.0;
    for (double v : vals) sum += v;
    const double mean = sum / static_cast<double>(n);
    if (kind == Xs::Mean) {
        for (std::size_t k = 0; k < n; ++k) out(r, idx[k]) = clean(mean);
        return;
    }
    if (kind == Xs::Demean) {
        for (std::size_t k = 0; k < n; ++k) out(r, idx[k]) = clean(vals[k] - mean);
        return;
    }
    if (n < 2) return;
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd < kStdFloor) return;
    for (std::size_t k = 0; k < n; ++k) out(r, idx[k]) = clean((vals[k] - mean) / sd);
}

Matrix horizontal(const Matrix& a, Xs kind) {
    Matrix out(a.rows(), a.cols());
    std::vector<std::size_t> idx;
    std::vector<double> vals, ranks;
    std::vector<std::size_t> order;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        idx.clear();
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (!is_missing(a(r, j))) idx.push_back(j);
        }
        cross_section(a, r, idx, kind, out, vals, ranks, order);
    }
    return out;
}

Matrix grouped(const Matrix& a, const std::vector<int>& gid, Xs kind) {
    Matrix out(a.rows(), a.cols());
    const int n_groups = gid.empty() ? 0 : *std::max_element(gid.begin(), gid.end()) + 1;
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(std::max(n_groups, 0)));
    std::vector<double> vals, ranks;
    std::vector<std::size_t> order;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (auto& m : members) m.clear();
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (gid[j] >= 0 && !is_missing(a(r, j))) members[static_cast<std::size_t>(gid[j])].push_back(j);
        }
        for (const auto& m : members) cross_section(a, r, m, kind, out, vals, ranks, order);
    }
    return out;
}

Matrix quantile(const Matrix& a, int q) {
    Matrix ranks = horizontal(a, Xs::Rank);
    const double qd = q;
    return map1(ranks, [&](double r) { return std::min(qd - 1.0, std::floor(r * qd)); });
}

Matrix constant_like(const PanelSet& p, double v) { return Matrix(p.n_dates(), p.n_symbols(), v); }

int as_int(const AlphaExpr& e) { return static_cast<int>(e.number); }

Matrix eval_node(const AlphaExpr& e, const PanelSet& panel) {
    if (e.is_number()) return constant_like(panel, e.number);
    if (e.is_field()) return panel.field(e.name).values;

    const auto& a = e.args;
    auto arg = [&](std::size_t k) { return eval_node(a[k], panel); };
    switch (e.op) {
        case Op::Add: return map2(arg(0), arg(1), [](double x, double y) { return x + y; });
        case Op::Subtract: return map2(arg(0), arg(1), [](double x, double y) { return x - y; });
        case Op::Multiply: return map2(arg(0), arg(1), [](double x, double y) { return x * y; });
        case Op::Divide:
            return map2(arg(0), arg(1), [](double x, double y) { return y == 0.0 ? kMissing : x / y; });
        case Op::Power: return map2(arg(0), arg(1), [](double x, double y) { return std::pow(x, y); });
        case Op::Min: return map2(arg(0), arg(1), [](double x, double y) { return std::min(x, y); });
        case Op::Max: return map2(arg(0), arg(1), [](double x, double y) { return std::max(x, y); });
        case Op::Neg: return map1(arg(0), [](double x) { return -x; });
        case Op::Abs: return map1(arg(0), [](double x) { return std::fabs(x); });
        case Op::Sign: return map1(arg(0), [](double x) { return x > 0 ? 1.0 : x < 0 ? -1.0 : 0.0; });
        case Op::Log: return map1(arg(0), [](double x) { return x <= 0 ? kMissing : std::log(x); });
        case Op::Sqrt: return map1(arg(0), [](double x) { return x < 0 ? kMissing : std::sqrt(x); });
        case Op::Inverse: return map1(arg(0), [](double x) { return x == 0 ? kMissing : 1.0 / x; });

        case Op::Rank: return horizontal(arg(0), Xs::Rank);
        case Op::Zscore: return horizontal(arg(0), Xs::Zscore);
        case Op::Demean: return horizontal(arg(0), Xs::Demean);
        case Op::Normalize: return horizontal(arg(0), Xs::Normalize);
        case Op::Quantile: return quantile(arg(0), as_int(a[1]));

        case Op::GroupRank: return grouped(arg(0), panel.group_ids(), Xs::Rank);
        case Op::GroupMean: return grouped(arg(0), panel.group_ids(), Xs::Mean);
        case Op::GroupZscore: return grouped(arg(0), panel.group_ids(), Xs::Zscore);

        case Op::And:
            return map2(arg(0), arg(1), [](double x, double y) { return (x != 0 && y != 0) ? 1.0 : 0.0; });
        case Op::Or:
            return map2(arg(0), arg(1), [](double x, double y) { return (x != 0 || y != 0) ? 1.0 : 0.0; });
        case Op::Not: return map1(arg(0), [](double x) { return x == 0 ? 1.0 : 0.0; });
        case Op::Equal: return map2(arg(0), arg(1), [](double x, double y) { return x == y ? 1.0 : 0.0; });
        case Op::Less: return map2(arg(0), arg(1), [](double x, double y) { return x < y ? 1.0 : 0.0; });
        case Op::Greater:
            return map2(arg(0), arg(1), [](double x, double y) { return x > y ? 1.0 : 0.0; });
        case Op::IfElse: {
            const Matrix c = arg(0);
            const Matrix yes = arg(1);
            const Matrix no = arg(2);
            Matrix out(c.rows(), c.cols());
            auto cv = c.values();
            auto yv = yes.values();
            auto nv = no.values();
            auto ov = out.values();
            for (std::size_t k = 0; k < cv.size(); ++k) {
                if (is_missing(cv[k])) continue;
                ov[k] = cv[k] != 0 ? yv[k] : nv[k];
            }
            return out;
        }

        case Op::TsMean: return rolling1(arg(0), as_int(a[1]), w_mean);
        case Op::TsStd: return rolling1(arg(0), as_int(a[1]), w_std);
        case Op::TsSum: return rolling1(arg(0), as_int(a[1]), w_sum);
        case Op::TsMin: return rolling1(arg(0), as_int(a[1]), w_min);
        case Op::TsMax: return rolling1(arg(0), as_int(a[1]), w_max);
        case Op::TsDelay: return lagged(arg(0), as_int(a[1]), false);
        case Op::TsDelta: return lagged(arg(0), as_int(a[1]), true);
        case Op::TsRank: return rolling1(arg(0), as_int(a[1]), w_rank);
        case Op::TsZscore: return rolling1(arg(0), as_int(a[1]), w_zscore);
        case Op::TsSkew: return rolling1(arg(0), as_int(a[1]), w_shape<false>);
        case Op::TsKurtosis: return rolling1(arg(0), as_int(a[1]), w_shape<true>);
        case Op::TsArgMax: return rolling1(arg(0), as_int(a[1]), w_arg_extreme<true>);
        case Op::TsArgMin: return rolling1(arg(0), as_int(a[1]), w_arg_extreme<false>);
        case Op::TsCorr: return rolling2(arg(0), arg(1), as_int(a[2]), w_corr);
        case Op::TsCov: return rolling2(arg(0), arg(1), as_int(a[2]), w_cov);
        case Op::TsIr: return rolling1(arg(0), as_int(a[1]), w_ir);
        case Op::TsCoSkewness: return rolling2(arg(0), arg(1), as_int(a[2]), w_co_moment<2>);
        case Op::TsCoKurtosis: return rolling2(arg(0), arg(1), as_int(a[2]), w_co_moment<3>);
        case Op::TsRegression: return rolling2(arg(0), arg(1), as_int(a[2]), w_regression<false>);
        case Op::TsRegressionRes: return rolling2(arg(0), arg(1), as_int(a[2]), w_regression<true>);
        case Op::TsBeta: return rolling2(arg(0), arg(1), as_int(a[2]), w_beta);
        case Op::TsSharpe: return rolling1(arg(0), as_int(a[1]), w_sharpe);

        case Op::Sin: return map1(arg(0), [](double x) { return std::sin(x); });
        case Op::Cos: return map1(arg(0), [](double x) { return std::cos(x); });
        case Op::Tail: {
            const double lo = a[1].number, hi = a[2].number, v = a[3].number;
            return map1(arg(0), [=](double x) { return (lo < x && x < hi) ? v : x; });
        }
        case Op::TsMacd: return macd(arg(0), as_int(a[1]), as_int(a[2]));
        case Op::TaRsi: return rolling1(arg(0), as_int(a[1]) + 1, w_rsi);
    }
    throw Error(ErrorCode::UnknownOperator, "unhandled operator");
}

}  // namespace

SignalMatrix evaluate(const AlphaExpr& expr, const PanelSet& panel) {
    return eval_node(expr, panel);
}

void write_signal_csv(const SignalMatrix& signal, const PanelSet& panel,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "date,symbol,value\n";
    char buf[40];
    for (std::size_t t = 0; t < signal.rows(); ++t) {
        const auto iso = panel.calendar()[t].iso();
        for (std::size_t j = 0; j < signal.cols(); ++j) {
            if (is_missing(signal(t, j))) continue;
            std::snprintf(buf, sizeof buf, "%.17g", signal(t, j));
            out << iso << ',' << panel.symbols()[j] << ',' << buf << '\n';
        }
    }
}

}  // namespace alphadesk
