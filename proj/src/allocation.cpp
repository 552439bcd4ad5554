#include "alphadesk/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "alphadesk/stats.hpp"

namespace alphadesk {

// ---- statistics -------------------------------------------------------------

BookSeries simulate_book(const PositionMatrix& book, const PanelSet& panel, DateRange range) {
    if (!panel.has_field("returns")) throw Error(ErrorCode::MissingReturns, "panel has no returns field");
    const Matrix& ret = panel.field("returns").values;
    if (!book.same_shape(ret)) throw Error(ErrorCode::CalendarMismatch, "book does not match the panel");
    BookSeries s;
    s.pnl = run_backtest(book, panel, 0.0, range).pnl;
    const std::size_t end = std::min(range.end, panel.n_dates());
    for (std::size_t t = range.begin; t < end; ++t) {
        double lo = 0.0, sh = 0.0, turnover = 0.0, pos = 0.0, gross = 0.0;
        for (std::size_t j = 0; j < book.cols(); ++j) {
            const double prev = t > 0 ? book(t - 1, j) : 0.0;
            const double r = ret(t, j);
            if (!is_missing(r)) {
                if (prev > 0) lo += prev * r;
                if (prev < 0) sh += prev * r;
            }
            turnover += std::fabs(book(t, j) - prev);
            if (book(t, j) > 0) pos += book(t, j);
            gross += std::fabs(book(t, j));
        }
        s.long_pnl.push_back(lo);
        s.short_pnl.push_back(sh);
        s.turnover.push_back(0.5 * turnover);
        s.long_fraction.push_back(gross > 0.0 ? std::optional<double>(pos / gross) : std::nullopt);
    }
    return s;
}

namespace {

double capped_ir(std::span<const double> daily) {
    if (daily.empty()) return 0.0;
    const double m = mean(daily);
    const double sd = sample_std(daily);
    if (sd < kStdFloor) return m > 0 ? kIrCap : m < 0 ? -kIrCap : 0.0;
    return std::sqrt(kTradingDaysPerYear) * m / sd;
}

std::span<const double> tail(std::span<const double> xs, std::size_t n) {
    return xs.subspan(xs.size() - std::min(n, xs.size()));
}

}  // namespace

std::vector<AlphaStats> compute_alpha_stats(std::span<const BookSeries> series) {
    for (const auto& s : series) {
        if (s.pnl.dates != series.front().pnl.dates) {
            throw Error(ErrorCode::CalendarMismatch, "PnL series do not share dates");
        }
    }
    const std::size_t n = series.size();
    std::vector<AlphaStats> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& s = series[k];
        const std::span<const double> daily = s.pnl.daily_pnl;
        auto& a = out[k];
        const double m = mean(daily);
        const double sd = sample_std(daily);
        a.ir = capped_ir(daily);
        a.volatility = sd * std::sqrt(kTradingDaysPerYear);
        a.turnover = mean(s.turnover);
        a.drawdown = max_drawdown(s.pnl.cum_pnl);
        a.expected_pnl = kTradingDaysPerYear * m;

        const auto recent = tail(daily, kMomentumWindow);
        const double rsd = sample_std(recent);
        a.momentum = rsd < kStdFloor ? 0.0 : mean(recent) / rsd;

        const auto last = tail(daily, kZscoreWindow);
        a.zscore = sd < kStdFloor || last.empty()
                       ? 0.0
                       : (mean(last) - m) / (sd / std::sqrt(static_cast<double>(last.size())));

        double ls = 0.0;
        std::size_t invested = 0;
        for (const auto& f : s.long_fraction) {
            if (!f) continue;
            ls += *f;
            ++invested;
        }
        a.long_short_ratio = invested == 0 ? 0.5 : ls / static_cast<double>(invested);
        a.ir_long = capped_ir(s.long_pnl);
        a.ir_short = capped_ir(s.short_pnl);

        double corr = 0.0;
        for (std::size_t o = 0; o < n; ++o) {
            if (o != k) corr += correlation(daily, series[o].pnl.daily_pnl);
        }
        a.avg_corr = n > 1 ? corr / static_cast<double>(n - 1) : 0.0;
    }
    std::vector<double> ir(n), pnl(n), neg_turnover(n);
    for (std::size_t k = 0; k < n; ++k) {
        ir[k] = out[k].ir;
        pnl[k] = out[k].expected_pnl;
        neg_turnover[k] = -out[k].turnover;
    }
    const auto r_ir = fractional_ranks(ir);
    const auto r_pnl = fractional_ranks(pnl);
    const auto r_to = fractional_ranks(neg_turnover);
    for (std::size_t k = 0; k < n; ++k) {
        out[k].rank_sharpe = r_ir[k];
        out[k].rank_pnl = r_pnl[k];
        out[k].rank_turnover = r_to[k];
    }
    return out;
}

std::vector<AlphaStats> compute_alpha_stats(std::span<const PositionMatrix> books, const PanelSet& panel,
                                            DateRange range) {
    std::vector<BookSeries> series;
    series.reserve(books.size());
    for (const auto& b : books) series.push_back(simulate_book(b, panel, range));
    return compute_alpha_stats(series);
}

nlohmann::json to_json(const AlphaStats& s) {
    return {{"ir", s.ir},
            {"volatility", s.volatility},
            {"turnover", s.turnover},
            {"avg_corr", s.avg_corr},
            {"momentum", s.momentum},
            {"drawdown", s.drawdown},
            {"expected_pnl", s.expected_pnl},
            {"long_short_ratio", s.long_short_ratio},
            {"zscore", s.zscore},
            {"ir_long", s.ir_long},
            {"ir_short", s.ir_short},
            {"rank_sharpe", s.rank_sharpe},
            {"rank_pnl", s.rank_pnl},
            {"rank_turnover", s.rank_turnover}};
}

// ---- schemes ----------------------------------------------------------------

namespace {

constexpr std::pair<SchemeId, std::string_view> kSchemeNames[] = {
    {SchemeId::IrExpTurnover, "ir_exp_turnover"},
    {SchemeId::InvAvgCorr, "inv_avg_corr"},
    {SchemeId::InvVolatility, "inv_volatility"},
    {SchemeId::SigmoidMomentum, "sigmoid_momentum"},
    {SchemeId::LsBalance, "ls_balance"},
    {SchemeId::ZscoreGate, "zscore_gate"},
    {SchemeId::PosExpectedPnl, "pos_expected_pnl"},
    {SchemeId::Composite, "composite"},
    {SchemeId::IrLongShortMean, "ir_long_short_mean"},
    {SchemeId::InvDrawdown, "inv_drawdown"},
    {SchemeId::RankAggregate, "rank_aggregate"},
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string_view to_string(SchemeId s) noexcept {
    for (const auto& [id, name] : kSchemeNames) {
        if (id == s) return name;
    }
    return "unknown";
}

SchemeId scheme_from_string(std::string_view name) {
    for (const auto& [id, n] : kSchemeNames) {
        if (n == name) return id;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown scheme '" + std::string(name) + "'");
}

double scheme_raw_score(SchemeId scheme, const AlphaStats& s) {
    switch (scheme) {
        case SchemeId::IrExpTurnover: return s.ir * std::exp(-s.turnover);
        case SchemeId::InvAvgCorr: return 1.0 / (1.0 + s.avg_corr);
        case SchemeId::InvVolatility: return 1.0 / (1.0 + s.volatility);
        case SchemeId::SigmoidMomentum: return sigmoid(s.momentum);
        case SchemeId::LsBalance: return 1.0 - std::fabs(0.5 - s.long_short_ratio);
        case SchemeId::ZscoreGate: return std::fabs(s.zscore) < 2.0 ? 1.0 : 0.0;
        case SchemeId::PosExpectedPnl: return std::max(s.expected_pnl, 0.0);
        case SchemeId::Composite:
            return (s.ir + 1.0 / (1.0 + s.volatility) + sigmoid(s.momentum)) / 3.0;
        case SchemeId::IrLongShortMean: return (s.ir_short + s.ir_long) / 2.0;
        case SchemeId::InvDrawdown: return 1.0 / (1.0 + s.drawdown);
        case SchemeId::RankAggregate: return (s.rank_sharpe + s.rank_pnl + s.rank_turnover) / 3.0;
    }
    return 0.0;
}

PortfolioWeights scheme_weight(SchemeId scheme, std::span<const AlphaStats> stats) {
    if (stats.empty()) throw Error(ErrorCode::InvalidConfig, "no alphas to weight");
    PortfolioWeights w(stats.size());
    double total = 0.0;
    for (std::size_t k = 0; k < stats.size(); ++k) {
        const double raw = scheme_raw_score(scheme, stats[k]);
        w[k] = std::isfinite(raw) && raw > 0.0 ? raw : 0.0;
        total += w[k];
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
        return w;
    }
    for (double& v : w) v /= total;
    return w;
}

PositionMatrix combine_books(const PortfolioWeights& weights, std::span<const PositionMatrix> books) {
    if (books.empty() || weights.size() != books.size()) {
        throw Error(ErrorCode::ShapeMismatch, "one weight per book required");
    }
    for (const auto& b : books) {
        if (!b.same_shape(books.front())) throw Error(ErrorCode::ShapeMismatch, "books are not aligned");
    }
    PositionMatrix out(books.front().rows(), books.front().cols(), 0.0);
    for (std::size_t k = 0; k < books.size(); ++k) {
        if (weights[k] == 0.0) continue;
        auto o = out.values();
        auto b = books[k].values();
        for (std::size_t c = 0; c < o.size(); ++c) o[c] += weights[k] * b[c];
    }
    for (std::size_t t = 0; t < out.rows(); ++t) {
        auto row = out.row(t);
        double gross = 0.0;
        for (double v : row) gross += std::fabs(v);
        if (gross < kStdFloor) {
            std::fill(row.begin(), row.end(), 0.0);
            continue;
        }
        for (double& v : row) v /= gross;
    }
    return out;
}

// ---- mean-variance ----------------------------------------------------------

MvoInputs mvo_inputs(std::span<const PnlSeries> pnls) {
    if (pnls.empty()) throw Error(ErrorCode::InvalidConfig, "no PnL series");
    const std::size_t n = pnls.size();
    const std::size_t t = pnls.front().size();
    for (const auto& p : pnls) {
        if (p.dates != pnls.front().dates) throw Error(ErrorCode::CalendarMismatch, "PnL series do not share dates");
    }
    if (t < 2) throw Error(ErrorCode::TooFewDates, "need two PnL observations");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t d = 0; d < t; ++d) {
            x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = pnls[k].daily_pnl[d];
        }
    }
    MvoInputs in;
    in.mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd c = x.rowwise() - in.mu.transpose();
    in.sigma = (c.transpose() * c) / static_cast<double>(t - 1);
    return in;
}

double mvo_objective(const Eigen::VectorXd& w, const MvoInputs& in) {
    const double var = w.dot(in.sigma * w);
    if (!(var >= 1e-16)) return -std::numeric_limits<double>::infinity();
    return w.dot(in.mu) / std::sqrt(var);
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    const auto n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        cum += u[static_cast<std::size_t>(k)];
        const double t = (cum - 1.0) / static_cast<double>(k + 1);
        if (u[static_cast<std::size_t>(k)] - t > 0.0) theta = t;
    }
    return (v.array() - theta).max(0.0);
}

namespace {

void check_inputs(const MvoInputs& in) {
    const auto n = in.mu.size();
    if (n == 0 || in.sigma.rows() != n || in.sigma.cols() != n) {
        throw Error(ErrorCode::ShapeMismatch, "mu and sigma dimensions differ");
    }
    const double scale = std::max(1.0, in.sigma.cwiseAbs().maxCoeff());
    if ((in.sigma - in.sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw Error(ErrorCode::InvalidConfig, "sigma is not symmetric");
    }
    if ((in.sigma.diagonal().array() < 0.0).any()) throw Error(ErrorCode::InvalidConfig, "negative variance");
}

}  // namespace

MvoResult mvo_hill_climb(std::uint64_t seed, const MvoInputs& inputs, const MvoConstraints& constraints) {
    check_inputs(inputs);
    const auto n = static_cast<std::size_t>(inputs.mu.size());
    if (!(constraints.step_size > 0.0)) throw Error(ErrorCode::InvalidConfig, "step_size must be positive");
    std::mt19937_64 rng(seed);

    std::vector<std::size_t> active(n);
    std::iota(active.begin(), active.end(), std::size_t{0});
    if (constraints.cardinality) {
        const std::size_t k = *constraints.cardinality;
        if (k < 1 || k > n) {
            throw Error(ErrorCode::InfeasibleCardinality,
                        "cardinality " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
        }
        std::shuffle(active.begin(), active.end(), rng);
        active.resize(k);
        std::sort(active.begin(), active.end());
    }
    const auto m = active.size();

    Eigen::VectorXd sub = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
    auto expand = [&](const Eigen::VectorXd& s) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < m; ++k) w(static_cast<Eigen::Index>(active[k])) = s(static_cast<Eigen::Index>(k));
        return w;
    };

    MvoResult res;
    res.selected = active;
    double best = mvo_objective(expand(sub), inputs);
    res.accepted_objectives.push_back(best);
    if (m >= 2) {
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        std::uniform_real_distribution<double> mag(0.0, 1.0);
        for (std::size_t step = 0; step < constraints.n_steps; ++step) {
            const std::size_t i = pick(rng);
            std::size_t j = pick(rng);
            while (j == i) j = pick(rng);
            const double delta = constraints.step_size * mag(rng);
            Eigen::VectorXd cand = sub;
            cand(static_cast<Eigen::Index>(i)) += delta;
            cand(static_cast<Eigen::Index>(j)) -= delta;
            cand = project_to_simplex(cand);
            const double f = mvo_objective(expand(cand), inputs);
            if (f > best) {
                best = f;
                sub = cand;
                res.accepted_objectives.push_back(f);
            }
        }
    }
    res.weights = expand(sub);
    res.objective = best;
    return res;
}

std::string_view to_string(Baseline b) noexcept {
    switch (b) {
        case Baseline::Equal: return "equal";
        case Baseline::InverseVolatility: return "inverse_volatility";
        case Baseline::RiskParity: return "risk_parity";
    }
    return "unknown";
}

Eigen::VectorXd risk_contributions(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma) {
    return w.cwiseProduct(sigma * w);
}

PortfolioWeights baseline_allocate(Baseline method, const MvoInputs& inputs) {
    check_inputs(inputs);
    const auto n = inputs.mu.size();
    if (method == Baseline::Equal) return PortfolioWeights(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
    const Eigen::VectorXd var = inputs.sigma.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(var(i) > 0.0)) {
            throw Error(ErrorCode::ZeroVolatilityAsset, "asset " + std::to_string(i) + " has zero variance");
        }
    }
    Eigen::VectorXd w;
    if (method == Baseline::InverseVolatility) {
        w = var.cwiseSqrt().cwiseInverse();
    } else {
        // Cyclical coordinate descent on 0.5 y'Sy - (1/n) sum log y; the
        // normalised minimiser has equal risk contributions.
        const double b = 1.0 / static_cast<double>(n);
        Eigen::VectorXd y = var.cwiseSqrt().cwiseInverse();
        y /= y.sum();
        bool converged = false;
        for (int iter = 0; iter < 10000 && !converged; ++iter) {
            double moved = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double c = inputs.sigma.row(i).dot(y) - var(i) * y(i);
                const double next = (-c + std::sqrt(c * c + 4.0 * var(i) * b)) / (2.0 * var(i));
                moved = std::max(moved, std::fabs(next - y(i)) / std::max(next, 1e-300));
                y(i) = next;
            }
            if (!y.allFinite()) break;
            converged = moved < 1e-13;
        }
        if (!converged) throw Error(ErrorCode::NoConvergence, "risk parity did not converge");
        w = y;
    }
    w /= w.sum();
    return PortfolioWeights(w.data(), w.data() + n);
}

// ---- comparison -------------------------------------------------------------

std::vector<AllocationRow> compare_allocations(std::span<const PositionMatrix> books, const PanelSet& panel,
                                               DateRange in_sample, DateRange out_sample,
                                               const AllocationConfig& cfg) {
    if (books.size() < 2) throw Error(ErrorCode::CalendarMismatch, "allocation needs at least two books");
    std::vector<BookSeries> series;
    for (const auto& b : books) series.push_back(simulate_book(b, panel, in_sample));
    const auto stats = compute_alpha_stats(series);
    std::vector<PnlSeries> pnls;
    for (const auto& s : series) pnls.push_back(s.pnl);
    const auto inputs = mvo_inputs(pnls);

    std::vector<AllocationRow> rows;
    auto add = [&](std::string name, std::string kind, PortfolioWeights w, std::string note = {}) {
        AllocationRow row;
        row.name = std::move(name);
        row.kind = std::move(kind);
        row.weights = std::move(w);
        row.note = std::move(note);
        const auto book = combine_books(row.weights, books);
        row.in_sample = run_backtest(book, panel, cfg.cost_bps, in_sample).report;
        auto out = run_backtest(book, panel, cfg.cost_bps, out_sample);
        row.out_sample = out.report;
        row.out_sample_pnl = std::move(out.pnl);
        rows.push_back(std::move(row));
    };
    for (SchemeId s : cfg.schemes) add(std::string(to_string(s)), "scheme", scheme_weight(s, stats));
    const PortfolioWeights equal(books.size(), 1.0 / static_cast<double>(books.size()));
    for (Baseline b : {Baseline::Equal, Baseline::InverseVolatility, Baseline::RiskParity}) {
        try {
            add(std::string(to_string(b)), "baseline", baseline_allocate(b, inputs));
        } catch (const Error& e) {
            add(std::string(to_string(b)), "baseline", equal, e.what());
        }
    }
    const auto mvo = mvo_hill_climb(derive_seed(cfg.seed, 0x3e0), inputs, cfg.mvo);
    add("mvo", "mvo", PortfolioWeights(mvo.weights.data(), mvo.weights.data() + mvo.weights.size()));
    return rows;
}

void write_allocation_table(const std::vector<AllocationRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "scheme,in_sample_sharpe,out_sample_sharpe,returns,drawdown,turnover\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g", r.in_sample.sharpe,
                      r.out_sample.sharpe, r.out_sample.annual_return, r.out_sample.max_drawdown,
                      r.out_sample.turnover);
        out << r.name << ',' << buf << '\n';
    }
}

nlohmann::json to_json(const AllocationRow& row, const std::vector<std::string>& book_names) {
    nlohmann::json w = nlohmann::json::object();
    for (std::size_t k = 0; k < row.weights.size(); ++k) {
        w[k < book_names.size() ? book_names[k] : std::to_string(k)] = row.weights[k];
    }
    nlohmann::json j{{"scheme", row.name},
                     {"kind", row.kind},
                     {"weights", w},
                     {"in_sample", to_json(row.in_sample)},
                     {"out_sample", to_json(row.out_sample)}};
    if (!row.note.empty()) j["note"] = row.note;
    return j;
}

}  // namespace alphadesk
