// Supervised datasets over archived alpha signals, model fitting, ensemble
// combiners, ensemble hill climbing and the randomised composition study.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "alphadesk/backtest.hpp"
#include "alphadesk/models.hpp"
#include "alphadesk/search.hpp"

namespace alphadesk {

inline constexpr std::size_t kMinEnsembleAlphas = 10;
inline constexpr std::size_t kMaxEnsembleAlphas = 20;

/// Rows are (date, symbol) cells of `range` where every feature and the
/// forward target exist. Targets compound returns over t+1..t+horizon and
/// never leave `range`, so the last `horizon` dates of the range are dropped.
struct SupervisedDataset {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::size_t> dates;
    std::vector<std::size_t> symbols;
    DateRange range;
    std::size_t horizon = 1;

    std::size_t rows() const noexcept { return dates.size(); }
};

/// Throws EmptyDataset when no row survives, InvalidConfig for horizon 0.
SupervisedDataset build_dataset(std::span<const SignalMatrix> features, const PanelSet& panel,
                                DateRange range, std::size_t horizon = 1);
/// Features are the signals of archive entries `alpha_ids`.
SupervisedDataset build_dataset(const AlphaArchive& archive, const std::vector<std::size_t>& alpha_ids,
                                const PanelSet& panel, DateRange range, std::size_t horizon = 1);

struct FitOutput {
    /// Predictions on every cell of the score range with all features present.
    SignalMatrix signal;
    /// In-sample predictions, aligned with the training rows.
    Eigen::VectorXd train_prediction;
    bool singular_fallback = false;
};

FitOutput fit_predict(const ModelSpec& model, const SupervisedDataset& train,
                      std::span<const SignalMatrix> features, DateRange score_range);

enum class CombinerKind { WeightedVote, Stacking, Bagging };

struct Combiner {
    CombinerKind kind = CombinerKind::WeightedVote;
    /// weighted_vote only: one non-negative weight per member, summing to 1.
    std::vector<double> weights;
    /// bagging only.
    std::size_t n_bags = 5;
    /// bagging only: false fits every bag on the full training sample.
    bool bootstrap = true;

    friend bool operator==(const Combiner&, const Combiner&) = default;
};

std::string_view to_string(CombinerKind k) noexcept;

/// Weighted vote: cell-wise convex combination; zero-weight members are ignored.
/// Stacking: OLS with intercept of the train target on member train predictions.
/// Bagging: members (already bag-averaged at fit time) are averaged with equal weight.
/// Throws WeightMismatch for weights that do not fit the member list.
SignalMatrix combine(std::span<const SignalMatrix> member_signals,
                     std::span<const Eigen::VectorXd> member_train_predictions,
                     const Combiner& combiner, const SupervisedDataset& train);

struct EnsembleSpec {
    /// Archive indices, ascending.
    std::vector<std::size_t> alpha_ids;
    std::vector<ModelSpec> members;
    Combiner combiner;
    std::size_t horizon = 1;
    /// Drives bootstrap resampling.
    std::uint64_t seed = 0;

    /// Throws InvalidConfig / WeightMismatch.
    void validate() const;
    friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

/// Signals of the strongest archive entries, computed once.
class AlphaPool {
public:
    /// Keeps the `top_k` entries with the highest validation sharpe (ties by index).
    static AlphaPool from_archive(const AlphaArchive& archive, const PanelSet& panel,
                                  std::size_t top_k = 40);

    std::size_t size() const noexcept { return ids_.size(); }
    /// Archive indices in the pool, ascending.
    const std::vector<std::size_t>& ids() const noexcept { return ids_; }
    const SignalMatrix& signal(std::size_t archive_id) const;
    const std::string& text(std::size_t archive_id) const;
    double validation_sharpe(std::size_t archive_id) const;

private:
    std::vector<std::size_t> ids_;
    std::vector<SignalMatrix> signals_;
    std::vector<std::string> texts_;
    std::vector<double> sharpes_;
    std::size_t index_of(std::size_t archive_id) const;
};

struct EnsembleEvaluation {
    BacktestReport validation;
    PnlSeries validation_pnl;
    std::optional<BacktestReport> test;
    PnlSeries test_pnl;
    bool singular_fallback = false;
};

/// Fits on the train range and backtests the combined signal on validation
/// (and test when requested).
EnsembleEvaluation evaluate_ensemble(const EnsembleSpec& spec, const AlphaPool& pool,
                                     const PanelSet& panel, const SampleSplit& split,
                                     bool with_test = false, double cost_bps = 0.0);

nlohmann::json to_json(const EnsembleSpec& spec, const AlphaPool* pool = nullptr);

enum class EnsembleMove { AddAlpha, DropAlpha, SwapAlpha, ChangeFamily, JitterHyper, SwitchCombiner };

struct EnsembleSearchConfig {
    std::uint64_t seed = 1;
    /// Ensemble evaluations, including the starting point.
    std::size_t budget = 40;
    std::size_t horizon = 1;
    double cost_bps = 0.0;
};

struct EnsembleSearchResult {
    EnsembleSpec spec;
    EnsembleEvaluation evaluation;  // with test
    std::vector<double> accepted_scores;
    std::size_t n_evaluated = 0;
};

/// Starts from the ten strongest pool alphas under a single OLS member and
/// climbs validation sharpe with the acceptance rule of the alpha search.
/// Throws ArchiveTooSmall for pools below ten alphas.
EnsembleSearchResult ensemble_search(const EnsembleSearchConfig& cfg, const AlphaPool& pool,
                                     const PanelSet& panel, const SampleSplit& split);

/// Uniform draw of one trial: alpha count in [10, 20], subset, one to three
/// members with hyperparameters, and combiner.
EnsembleSpec random_ensemble_spec(std::uint64_t seed, const AlphaPool& pool, std::size_t horizon = 1);

struct StudyTrial {
    std::size_t index = 0;
    EnsembleSpec spec;
    BacktestReport validation;
    /// Present for the top decile by validation sharpe only.
    std::optional<BacktestReport> test;
};

/// Trial i uses derive_seed(seed, i). Sorted stably by descending validation
/// sharpe. `threads` changes wall time only.
std::vector<StudyTrial> random_composition_study(std::uint64_t seed, const AlphaPool& pool,
                                                 const PanelSet& panel, const SampleSplit& split,
                                                 std::size_t n_trials = 200, std::size_t horizon = 1,
                                                 unsigned threads = 1);

nlohmann::json to_json(const StudyTrial& trial, const AlphaPool* pool = nullptr);
void write_study(const std::vector<StudyTrial>& trials, const AlphaPool& pool,
                 const std::filesystem::path& path);

}  // namespace alphadesk
