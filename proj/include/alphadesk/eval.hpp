// Evaluation of alpha expressions over a panel.
//
// Semantics shared by both evaluators:
//  * element-wise operators propagate missing; non-finite results are missing;
//    log(x <= 0), sqrt(x < 0), inverse(0) and divide(_, 0) are missing.
//  * horizontal operators act per date over the non-missing symbols; rank is the
//    average-tie fractional rank scaled by (r - 1) / (n - 1), 0.5 for a single name.
//  * time-series operators use the trailing window ending today and need every
//    value in it; ts_delay / ts_delta only need the two endpoints.
//  * any operator dividing by a window or cross-section std yields missing when
//    that std is below kStdFloor.
//  * ts_macd seeds both EMAs with the first value of the current unbroken run and
//    needs at least max(fast, slow) observations in that run.
#pragma once

#include <filesystem>

#include "alphadesk/expr.hpp"
#include "alphadesk/panel.hpp"

namespace alphadesk {

using SignalMatrix = Matrix;

/// Schema (field names + group availability) of a panel.
Schema schema_of(const PanelSet& panel, int max_depth = kDefaultMaxDepth);

/// Vectorised evaluation. Expects `validate(expr, schema_of(panel))` to pass.
SignalMatrix evaluate(const AlphaExpr& expr, const PanelSet& panel);

/// Cell-by-cell reference evaluator; re-derives every window from scratch.
SignalMatrix reference_evaluate(const AlphaExpr& expr, const PanelSet& panel);

/// Long CSV `date,symbol,value`; missing cells are skipped.
void write_signal_csv(const SignalMatrix& signal, const PanelSet& panel,
                      const std::filesystem::path& path);

}  // namespace alphadesk
