// Small descriptive-statistics helpers shared by the backtest, search, ensemble
// and allocation code.
#pragma once

#include <span>
#include <vector>

namespace alphadesk {

double mean(std::span<const double> xs);
/// n - 1 denominator; 0 for fewer than two values.
double sample_std(std::span<const double> xs);
/// Pearson correlation; 0 when either side has std < kStdFloor.
double correlation(std::span<const double> xs, std::span<const double> ys);

/// Average-tie ranks scaled to [0, 1] by (r - 1) / (n - 1); a single value gets 0.5.
std::vector<double> fractional_ranks(std::span<const double> xs);

/// Cross-sectional z-score with sample std; empty when n < 2 or std < kStdFloor.
std::vector<double> zscores(std::span<const double> xs);

}  // namespace alphadesk
