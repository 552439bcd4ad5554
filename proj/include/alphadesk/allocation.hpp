// Capital allocation across alpha books: per-alpha statistics, score-based
// weighting schemes, book combination, stochastic mean-variance hill climbing
// and classical baselines.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "alphadesk/backtest.hpp"

namespace alphadesk {

inline constexpr std::size_t kMomentumWindow = 63;
inline constexpr std::size_t kZscoreWindow = 21;
/// |ir| reported when PnL has no dispersion.
inline constexpr double kIrCap = 10.0;

/// Derived from a book's PnL over one date range.
struct AlphaStats {
    double ir = 0.0;            // annualised sharpe, +-kIrCap when std < kStdFloor
    double volatility = 0.0;    // annualised std of daily PnL
    double turnover = 0.0;      // mean daily turnover
    double avg_corr = 0.0;      // mean PnL correlation against the other books
    double momentum = 0.0;      // trailing-63 mean / std
    double drawdown = 0.0;
    double expected_pnl = 0.0;  // 252 * mean daily PnL
    double long_short_ratio = 0.5;
    double zscore = 0.0;        // (trailing-21 mean - mean) / (std / sqrt(21))
    double ir_long = 0.0;
    double ir_short = 0.0;
    double rank_sharpe = 0.5;
    double rank_pnl = 0.5;
    double rank_turnover = 0.5;  // lower turnover ranks higher
};

/// Daily series of one book over a range.
struct BookSeries {
    PnlSeries pnl;
    std::vector<double> long_pnl;
    std::vector<double> short_pnl;
    std::vector<double> turnover;
    /// Long share of gross exposure per date; empty entries are flat days.
    std::vector<std::optional<double>> long_fraction;
};

BookSeries simulate_book(const PositionMatrix& book, const PanelSet& panel, DateRange range);

/// Throws CalendarMismatch when the books do not match the panel shape.
std::vector<AlphaStats> compute_alpha_stats(std::span<const PositionMatrix> books,
                                            const PanelSet& panel, DateRange range);
/// Statistics from already simulated series; throws CalendarMismatch when the
/// series do not share dates.
std::vector<AlphaStats> compute_alpha_stats(std::span<const BookSeries> series);

nlohmann::json to_json(const AlphaStats& s);

enum class SchemeId {
    IrExpTurnover,
    InvAvgCorr,
    InvVolatility,
    SigmoidMomentum,
    LsBalance,
    ZscoreGate,
    PosExpectedPnl,
    Composite,
    IrLongShortMean,
    InvDrawdown,
    RankAggregate,
};

inline constexpr std::array<SchemeId, 11> kAllSchemes = {
    SchemeId::IrExpTurnover,   SchemeId::InvAvgCorr,     SchemeId::InvVolatility,
    SchemeId::SigmoidMomentum, SchemeId::LsBalance,      SchemeId::ZscoreGate,
    SchemeId::PosExpectedPnl,  SchemeId::Composite,      SchemeId::IrLongShortMean,
    SchemeId::InvDrawdown,     SchemeId::RankAggregate,
};

std::string_view to_string(SchemeId s) noexcept;
/// Throws InvalidConfig.
SchemeId scheme_from_string(std::string_view name);

/// Raw, unclamped score of one alpha under a scheme.
double scheme_raw_score(SchemeId scheme, const AlphaStats& s);

/// Non-negative weights summing to 1.
using PortfolioWeights = std::vector<double>;

/// Raw scores clamped at 0 and L1-normalised; equal weights when no score is positive.
PortfolioWeights scheme_weight(SchemeId scheme, std::span<const AlphaStats> stats);

/// Cell-wise weighted sum, then each date rescaled to gross 1 (flat dates stay flat).
/// Throws ShapeMismatch.
PositionMatrix combine_books(const PortfolioWeights& weights, std::span<const PositionMatrix> books);

struct MvoInputs {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
};

/// Sample mean and covariance (n - 1) of aligned daily PnL series.
MvoInputs mvo_inputs(std::span<const PnlSeries> pnls);

/// w'mu / sqrt(w'Sigma w); -infinity when the variance is below 1e-16.
double mvo_objective(const Eigen::VectorXd& w, const MvoInputs& in);

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

struct MvoConstraints {
    std::optional<std::size_t> cardinality;
    std::size_t n_steps = 10000;
    double step_size = 0.05;
};

struct MvoResult {
    Eigen::VectorXd weights;
    double objective = 0.0;
    /// Start point followed by every accepted step.
    std::vector<double> accepted_objectives;
    std::vector<std::size_t> selected;
};

/// Pairwise perturbation hill climbing on the simplex. Throws
/// InfeasibleCardinality and ShapeMismatch.
MvoResult mvo_hill_climb(std::uint64_t seed, const MvoInputs& inputs, const MvoConstraints& constraints = {});

enum class Baseline { Equal, InverseVolatility, RiskParity };
std::string_view to_string(Baseline b) noexcept;

/// Throws ZeroVolatilityAsset and, for risk parity, NoConvergence.
PortfolioWeights baseline_allocate(Baseline method, const MvoInputs& inputs);

/// Per-asset w_i (Sigma w)_i.
Eigen::VectorXd risk_contributions(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma);

struct AllocationConfig {
    std::vector<SchemeId> schemes{kAllSchemes.begin(), kAllSchemes.end()};
    MvoConstraints mvo;
    std::uint64_t seed = 1;
    double cost_bps = 0.0;
};

struct AllocationRow {
    std::string name;
    std::string kind;  // scheme | baseline | mvo
    PortfolioWeights weights;
    BacktestReport in_sample;
    BacktestReport out_sample;
    PnlSeries out_sample_pnl;
    /// Set when the method failed and equal weights were used instead.
    std::string note;
};

/// Weights are chosen from in-sample statistics; every combined book is
/// backtested on both ranges. Rows: the configured schemes, then equal,
/// inverse_volatility, risk_parity, mvo. Needs at least two books.
std::vector<AllocationRow> compare_allocations(std::span<const PositionMatrix> books, const PanelSet& panel,
                                               DateRange in_sample, DateRange out_sample,
                                               const AllocationConfig& cfg);

/// CSV columns: scheme, in_sample_sharpe, out_sample_sharpe, returns, drawdown, turnover.
void write_allocation_table(const std::vector<AllocationRow>& rows, const std::filesystem::path& path);
nlohmann::json to_json(const AllocationRow& row, const std::vector<std::string>& book_names);

}  // namespace alphadesk
