#include "alphadesk/search.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <thread>
#include <unordered_set>

#include "alphadesk/stats.hpp"

namespace alphadesk {

void SearchConfig::validate() const {
    if (n_restarts == 0 || steps_per_restart == 0 || patience == 0 || eval_budget == 0) {
        throw Error(ErrorCode::InvalidConfig, "search counts must be positive");
    }
    if (!std::isfinite(sharpe_threshold)) {
        throw Error(ErrorCode::InvalidConfig, "sharpe_threshold must be finite");
    }
    if (max_depth < 1) throw Error(ErrorCode::InvalidConfig, "max_depth must be >= 1");
    if (!(cost_bps >= 0.0)) throw Error(ErrorCode::InvalidConfig, "cost_bps must be >= 0");
}

const ArchiveEntry* AlphaArchive::best_by_validation() const {
    const ArchiveEntry* best = nullptr;
    for (const auto& e : entries) {
        if (best == nullptr || e.validation.sharpe > best->validation.sharpe) best = &e;
    }
    return best;
}

bool accept(double old_score, double new_score, double old_turnover, double new_turnover) {
    if (new_score > old_score) return true;
    return std::fabs(new_score - old_score) <= 1e-12 && new_turnover < old_turnover;
}

namespace {

// Lowest objective, used for candidates with nothing to score.
constexpr double kWorstScore = std::numeric_limits<double>::lowest();

double negative_mse(const SignalMatrix& signal, const PanelSet& panel, const DateRange& range) {
    const Matrix& ret = panel.field("returns").values;
    const std::size_t n = signal.cols();
    double sse = 0.0;
    std::size_t count = 0;
    std::vector<std::size_t> idx;
    std::vector<double> xs, ys;
    for (std::size_t t = range.begin; t + 1 < range.end; ++t) {
        idx.clear();
        xs.clear();
        ys.clear();
        for (std::size_t j = 0; j < n; ++j) {
            const double s = signal(t, j);
            const double r = ret(t + 1, j);
            if (is_missing(s) || is_missing(r)) continue;
            idx.push_back(j);
            xs.push_back(s);
            ys.push_back(r);
        }
        const auto zx = zscores(xs);
        const auto zy = zscores(ys);
        if (zx.empty() || zy.empty()) continue;
        for (std::size_t k = 0; k < zx.size(); ++k) {
            sse += (zx[k] - zy[k]) * (zx[k] - zy[k]);
            ++count;
        }
    }
    return count == 0 ? kWorstScore : -sse / static_cast<double>(count);
}

struct Scored {
    CandidateScore score;
    SignalMatrix signal;
};

Scored score_with_signal(const AlphaExpr& expr, const PanelSet& panel, const SampleSplit& split,
                         Objective objective, double cost_bps) {
    Scored out;
    out.signal = evaluate(expr, panel);
    const DateRange& v = split.validation;
    const DateRange rows{v.begin > 0 ? v.begin - 1 : 0, v.end};
    const auto weights = signal_to_weights(out.signal, rows);
    const auto bt = run_backtest(weights, panel, cost_bps, v);
    out.score.sharpe = bt.report.sharpe;
    out.score.turnover = bt.report.turnover;
    out.score.score = objective == Objective::ValidationSharpe
                          ? bt.report.sharpe
                          : negative_mse(out.signal, panel, v);
    return out;
}

ArchiveEntry entry_from_signal(const AlphaExpr& expr, const SignalMatrix& signal,
                               const PanelSet& panel, const SampleSplit& split, double cost_bps) {
    ArchiveEntry e;
    e.expr = canonicalize(expr);
    e.text = print(e.expr);
    e.hash = canonical_hash(e.expr);
    const auto weights = signal_to_weights(signal);
    auto run = [&](const DateRange& r, BacktestReport& rep, PnlSeries& pnl) {
        auto bt = run_backtest(weights, panel, cost_bps, r);
        rep = bt.report;
        pnl = std::move(bt.pnl);
    };
    run(split.train, e.train, e.train_pnl);
    run(split.validation, e.validation, e.validation_pnl);
    run(split.test, e.test, e.test_pnl);
    return e;
}

struct Candidate {
    std::size_t eval_index;
    ArchiveEntry entry;
};

struct RestartOutcome {
    std::size_t evaluations = 0;
    std::vector<std::pair<std::size_t, double>> accepted;  // (eval index, score)
    std::vector<Candidate> archived;
    double best = kWorstScore;
    std::vector<double> scores;  // by eval index
};

RestartOutcome run_restart(const SearchConfig& cfg, const PanelSet& panel, const SampleSplit& split,
                           const WindowMenu& windows, std::size_t restart, std::size_t cap) {
    RestartOutcome out;
    const std::uint64_t seed = derive_seed(cfg.seed, restart);
    const Schema schema = schema_of(panel, cfg.max_depth);
    std::unordered_set<std::uint64_t> seen;

    auto consider = [&](const AlphaExpr& expr) {
        auto scored = score_with_signal(expr, panel, split, cfg.objective, cfg.cost_bps);
        const std::size_t index = out.evaluations++;
        out.scores.push_back(scored.score.score);
        if (scored.score.sharpe >= cfg.sharpe_threshold) {
            const auto h = canonical_hash(expr);
            if (seen.insert(h).second) {
                out.archived.push_back(
                    {index, entry_from_signal(expr, scored.signal, panel, split, cfg.cost_bps)});
            }
        }
        return scored.score;
    };

    AlphaExpr current = random_instantiate(derive_seed(seed, 0), schema, windows, cfg.max_depth);
    CandidateScore cur = consider(current);
    out.accepted.emplace_back(0, cur.score);
    std::size_t rejections = 0;
    for (std::size_t step = 1; step <= cfg.steps_per_restart && out.evaluations < cap; ++step) {
        AlphaExpr proposal = mutate(derive_seed(seed, step), current, schema, windows);
        const CandidateScore s = consider(proposal);
        if (accept(cur.score, s.score, cur.turnover, s.turnover)) {
            current = std::move(proposal);
            cur = s;
            out.accepted.emplace_back(out.evaluations - 1, cur.score);
            rejections = 0;
        } else if (++rejections >= cfg.patience) {
            break;
        }
    }
    return out;
}

}  // namespace

CandidateScore score_candidate(const AlphaExpr& expr, const PanelSet& panel, const SampleSplit& split,
                               Objective objective, double cost_bps) {
    return score_with_signal(expr, panel, split, objective, cost_bps).score;
}

ArchiveEntry backtest_entry(const AlphaExpr& expr, const PanelSet& panel, const SampleSplit& split,
                            double cost_bps) {
    return entry_from_signal(expr, evaluate(expr, panel), panel, split, cost_bps);
}

AlphaArchive hill_climb(const SearchConfig& cfg, const PanelSet& panel, const SampleSplit& split,
                        const WindowMenu& windows, unsigned threads) {
    cfg.validate();
    if (!panel.has_field("returns")) {
        throw Error(ErrorCode::MissingReturns, "panel has no returns field");
    }
    threads = std::max(1u, threads);
    const std::size_t cap = cfg.steps_per_restart + 1;

    AlphaArchive archive;
    archive.best_score = kWorstScore;
    std::unordered_set<std::uint64_t> hashes;
    std::size_t remaining = cfg.eval_budget;
    std::size_t next = 0;
    while (remaining > 0 && next < cfg.n_restarts) {
        const std::size_t batch = std::min<std::size_t>(threads, cfg.n_restarts - next);
        const std::size_t batch_cap = std::min(cap, remaining);
        std::vector<RestartOutcome> outcomes(batch);
        if (batch == 1) {
            outcomes[0] = run_restart(cfg, panel, split, windows, next, batch_cap);
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t k = 0; k < batch; ++k) {
                pool.emplace_back([&, k] {
                    outcomes[k] = run_restart(cfg, panel, split, windows, next + k, batch_cap);
                });
            }
        }
        // Merge in restart order; each restart's prefix is what a serial run
        // with the remaining budget would have produced.
        for (auto& o : outcomes) {
            if (remaining == 0) break;
            const std::size_t used = std::min(o.evaluations, remaining);
            RestartTrace trace;
            trace.evaluations = used;
            for (const auto& [index, score] : o.accepted) {
                if (index < used) trace.accepted_scores.push_back(score);
            }
            for (std::size_t k = 0; k < used; ++k) archive.best_score = std::max(archive.best_score, o.scores[k]);
            for (auto& c : o.archived) {
                if (c.eval_index >= used) break;
                if (!hashes.insert(c.entry.hash).second) continue;
                c.entry.restart = archive.restarts.size();
                archive.entries.push_back(std::move(c.entry));
            }
            archive.restarts.push_back(std::move(trace));
            archive.n_evaluated += used;
            remaining -= used;
        }
        next += batch;
    }
    if (archive.n_evaluated == 0) archive.best_score = 0.0;
    return archive;
}

nlohmann::json to_json(const ArchiveEntry& e) {
    return {{"expr", e.text},
            {"restart", e.restart},
            {"train", to_json(e.train)},
            {"validation", to_json(e.validation)},
            {"test", to_json(e.test)}};
}

void write_archive(const AlphaArchive& archive, std::ostream& out) {
    for (const auto& e : archive.entries) out << to_json(e).dump() << '\n';
}

void write_archive(const AlphaArchive& archive, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    write_archive(archive, out);
}

AlphaArchive read_archive(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    AlphaArchive archive;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ArchiveEntry e;
            e.expr = canonicalize(parse(j.at("expr").get<std::string>()));
            e.text = print(e.expr);
            e.hash = canonical_hash(e.expr);
            e.restart = j.value("restart", std::size_t{0});
            e.train = report_from_json(j.at("train"));
            e.validation = report_from_json(j.at("validation"));
            e.test = report_from_json(j.at("test"));
            archive.entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorCode::MalformedRow,
                        path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return archive;
}

}  // namespace alphadesk
