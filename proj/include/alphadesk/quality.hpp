// Field-level data evaluation metrics and the frequency -> lookback window map.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphadesk/panel.hpp"

namespace alphadesk {

struct QualityConfig {
    /// |value| > outlier_threshold counts as an outlier; metric skipped when unset.
    std::optional<double> outlier_threshold;
    /// Benchmark for deviation_from_expected; metric skipped when unset.
    std::optional<double> expected_median;

    void validate() const;
};

/// Metrics for one series (or the pooled field). Undefined metrics are empty.
struct SeriesQuality {
    std::string symbol;  // empty for the pooled entry
    double coverage_ratio = 0.0;
    double missing_ratio = 1.0;
    std::optional<double> frequency_ratio;
    std::optional<double> outlier_ratio;
    std::optional<double> deviation_from_expected;
    std::optional<double> skewness;
    std::optional<double> kurtosis;  // excess
    std::optional<double> duplicate_ratio;
    std::size_t max_gap = 0;
    std::optional<double> volatility_ratio;
};

struct QualityReport {
    std::string field;
    SeriesQuality pooled;
    std::vector<SeriesQuality> per_symbol;
};

/// Window length used for the rolling-std component of volatility_ratio.
inline constexpr std::size_t kVolatilityWindow = 63;

/// Metrics of a single series of expected length `values.size()`.
/// Throws NoData when every value is missing.
SeriesQuality evaluate_series(std::span<const double> values, const QualityConfig& cfg);

/// Per-symbol and pooled metrics. Pooled values ignore fully-missing symbols.
QualityReport evaluate_field(const PanelField& field, const std::vector<std::string>& symbols,
                             const QualityConfig& cfg);

/// frequency <= 0.02 -> {63, 252}; <= 0.2 -> {21, 63}; otherwise {5, 10, 21, 63}.
std::vector<int> recommend_windows(double frequency_ratio);
std::vector<int> recommend_windows(const QualityReport& report);

nlohmann::json to_json(const SeriesQuality& q);
nlohmann::json to_json(const QualityReport& r);

}  // namespace alphadesk
