// Randomised hill climbing over expression space with a threshold archive.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphadesk/backtest.hpp"
#include "alphadesk/expr.hpp"

namespace alphadesk {

enum class Objective { ValidationSharpe, NegativeMse };

struct SearchConfig {
    std::uint64_t seed = 1;
    std::size_t n_restarts = 50;
    std::size_t steps_per_restart = 200;
    /// Consecutive rejections that end a restart.
    std::size_t patience = 40;
    std::size_t eval_budget = 2000;
    double sharpe_threshold = 1.5;
    Objective objective = Objective::ValidationSharpe;
    int max_depth = kDefaultMaxDepth;
    double cost_bps = 0.0;

    /// Throws InvalidConfig.
    void validate() const;
};

struct ArchiveEntry {
    AlphaExpr expr;  // canonical form
    std::string text;
    std::uint64_t hash = 0;
    std::size_t restart = 0;
    BacktestReport train, validation, test;
    PnlSeries train_pnl, validation_pnl, test_pnl;
};

struct RestartTrace {
    std::size_t evaluations = 0;
    /// Objective value of the start point followed by every accepted move.
    std::vector<double> accepted_scores;
};

struct AlphaArchive {
    std::vector<ArchiveEntry> entries;
    std::size_t n_evaluated = 0;
    /// Best validation objective over every scored candidate.
    double best_score = 0.0;
    std::vector<RestartTrace> restarts;

    const ArchiveEntry* best_by_validation() const;
};

/// True iff new_score > old_score, or the scores tie within 1e-12 and the
/// new candidate trades less.
bool accept(double old_score, double new_score, double old_turnover, double new_turnover);

/// Objective value of one candidate on the validation range.
struct CandidateScore {
    double score = 0.0;
    double sharpe = 0.0;
    double turnover = 0.0;
};

CandidateScore score_candidate(const AlphaExpr& expr, const PanelSet& panel, const SampleSplit& split,
                               Objective objective, double cost_bps = 0.0);

/// Full per-split backtest of an expression, as stored in the archive.
ArchiveEntry backtest_entry(const AlphaExpr& expr, const PanelSet& panel, const SampleSplit& split,
                            double cost_bps = 0.0);

/// Restart r is seeded with derive_seed(cfg.seed, r) and capped at
/// steps_per_restart + 1 evaluations; restarts are consumed in index order
/// until the budget is spent. `threads` changes wall time only.
AlphaArchive hill_climb(const SearchConfig& cfg, const PanelSet& panel, const SampleSplit& split,
                        const WindowMenu& windows = {}, unsigned threads = 1);

/// One JSON object per line: expression text plus per-split metrics.
nlohmann::json to_json(const ArchiveEntry& e);
void write_archive(const AlphaArchive& archive, std::ostream& out);
void write_archive(const AlphaArchive& archive, const std::filesystem::path& path);

/// Reads an archive written by write_archive. PnL series are not stored and
/// come back empty; restart traces are not restored.
AlphaArchive read_archive(const std::filesystem::path& path);

}  // namespace alphadesk
