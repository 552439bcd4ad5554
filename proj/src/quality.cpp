#include "alphadesk/quality.hpp"

#include <algorithm>
#include <cmath>

namespace alphadesk {

namespace {

struct Moments {
    std::optional<double> skewness;
    std::optional<double> kurtosis;
};

// Biased sample moments g1 = m3 / m2^1.5 and g2 = m4 / m2^2 - 3.
Moments shape_moments(const std::vector<double>& xs) {
    Moments out;
    if (xs.size() < 2) return out;
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (std::sqrt(m2) < kStdFloor) return out;
    out.skewness = m3 / std::pow(m2, 1.5);
    out.kurtosis = m4 / (m2 * m2) - 3.0;
    return out;
}

double median_of(std::vector<double> xs) {
    const auto mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
    const double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    const double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double sample_std(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (n - 1.0));
}

std::optional<double> volatility_ratio(const std::vector<double>& observed) {
    if (observed.size() < kVolatilityWindow) return std::nullopt;
    const double full = sample_std(observed);
    if (full < kStdFloor) return std::nullopt;
    double best = 0.0;
    for (std::size_t end = kVolatilityWindow; end <= observed.size(); ++end) {
        std::span<const double> w(observed.data() + end - kVolatilityWindow, kVolatilityWindow);
        best = std::max(best, sample_std(w) / full);
    }
    return best;
}

// Raw counts shared by per-symbol and pooled aggregation.
struct Counts {
    std::size_t expected = 0;
    std::size_t non_null = 0;
    std::size_t changes = 0;
    std::size_t pairs = 0;
    std::size_t outliers = 0;
    std::size_t max_gap = 0;
    std::vector<double> observed;
};

Counts count_series(std::span<const double> values, const QualityConfig& cfg) {
    Counts c;
    c.expected = values.size();
    std::optional<std::size_t> last_idx;
    double last_val = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double v = values[k];
        if (is_missing(v)) continue;
        ++c.non_null;
        c.observed.push_back(v);
        if (cfg.outlier_threshold && std::fabs(v) > *cfg.outlier_threshold) ++c.outliers;
        if (last_idx) {
            ++c.pairs;
            if (v != last_val) ++c.changes;
            c.max_gap = std::max(c.max_gap, k - *last_idx - 1);
        }
        last_idx = k;
        last_val = v;
    }
    return c;
}

SeriesQuality finish(const Counts& c, const QualityConfig& cfg, std::size_t n_series,
                     std::optional<double> vol_ratio) {
    SeriesQuality q;
    const double expected = static_cast<double>(c.expected);
    q.coverage_ratio = static_cast<double>(c.non_null) / expected;
    q.missing_ratio = 1.0 - q.coverage_ratio;
    const std::size_t series_len = c.expected / n_series;
    if (series_len > 1) {
        q.frequency_ratio = static_cast<double>(c.changes) /
                            static_cast<double>(n_series * (series_len - 1));
    }
    if (cfg.outlier_threshold) {
        q.outlier_ratio = static_cast<double>(c.outliers) / static_cast<double>(c.non_null);
    }
    if (cfg.expected_median) {
        q.deviation_from_expected =
            std::fabs(median_of(c.observed) - *cfg.expected_median) / std::fabs(*cfg.expected_median);
    }
    const auto m = shape_moments(c.observed);
    q.skewness = m.skewness;
    q.kurtosis = m.kurtosis;
    if (c.pairs > 0) {
        q.duplicate_ratio = static_cast<double>(c.pairs - c.changes) / static_cast<double>(c.pairs);
    }
    q.max_gap = c.max_gap;
    q.volatility_ratio = vol_ratio;
    return q;
}

}  // namespace

void QualityConfig::validate() const {
    if (outlier_threshold && !(*outlier_threshold > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "outlier threshold must be > 0");
    }
    if (expected_median && *expected_median == 0.0) {
        throw Error(ErrorCode::ZeroExpected, "expected median must be non-zero");
    }
}

SeriesQuality evaluate_series(std::span<const double> values, const QualityConfig& cfg) {
    cfg.validate();
    const Counts c = count_series(values, cfg);
    if (c.non_null == 0) throw Error(ErrorCode::NoData, "series has no observations");
    return finish(c, cfg, 1, volatility_ratio(c.observed));
}

QualityReport evaluate_field(const PanelField& field, const std::vector<std::string>& symbols,
                             const QualityConfig& cfg) {
    cfg.validate();
    QualityReport report;
    report.field = field.name;
    const Matrix& m = field.values;
    Counts pooled;
    std::size_t observed_series = 0;
    std::optional<double> pooled_vol;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        const auto col = m.column(j);
        const Counts c = count_series(col, cfg);
        SeriesQuality q;
        if (c.non_null > 0) {
            const auto vr = volatility_ratio(c.observed);
            q = finish(c, cfg, 1, vr);
            if (vr) pooled_vol = std::max(pooled_vol.value_or(0.0), *vr);
            ++observed_series;
            pooled.expected += c.expected;
            pooled.non_null += c.non_null;
            pooled.changes += c.changes;
            pooled.pairs += c.pairs;
            pooled.outliers += c.outliers;
            pooled.max_gap = std::max(pooled.max_gap, c.max_gap);
            pooled.observed.insert(pooled.observed.end(), c.observed.begin(), c.observed.end());
        } else {
            q.coverage_ratio = 0.0;
            q.missing_ratio = 1.0;
        }
        q.symbol = j < symbols.size() ? symbols[j] : std::to_string(j);
        report.per_symbol.push_back(std::move(q));
    }
    if (observed_series == 0) throw Error(ErrorCode::NoData, "field '" + field.name + "' is all missing");
    report.pooled = finish(pooled, cfg, observed_series, pooled_vol);
    return report;
}

std::vector<int> recommend_windows(double frequency_ratio) {
    if (frequency_ratio <= 0.02) return {63, 252};
    if (frequency_ratio <= 0.2) return {21, 63};
    return {5, 10, 21, 63};
}

std::vector<int> recommend_windows(const QualityReport& report) {
    return recommend_windows(report.pooled.frequency_ratio.value_or(1.0));
}

namespace {
nlohmann::json opt(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
}  // namespace

nlohmann::json to_json(const SeriesQuality& q) {
    nlohmann::json j;
    if (!q.symbol.empty()) j["symbol"] = q.symbol;
    j["coverage_ratio"] = q.coverage_ratio;
    j["missing_ratio"] = q.missing_ratio;
    j["frequency_ratio"] = opt(q.frequency_ratio);
    j["outlier_ratio"] = opt(q.outlier_ratio);
    j["deviation_from_expected"] = opt(q.deviation_from_expected);
    j["skewness"] = opt(q.skewness);
    j["kurtosis"] = opt(q.kurtosis);
    j["duplicate_ratio"] = opt(q.duplicate_ratio);
    j["max_gap"] = q.max_gap;
    j["volatility_ratio"] = opt(q.volatility_ratio);
    return j;
}

nlohmann::json to_json(const QualityReport& r) {
    nlohmann::json j;
    j["field"] = r.field;
    j["pooled"] = to_json(r.pooled);
    auto& per = j["per_symbol"] = nlohmann::json::array();
    for (const auto& q : r.per_symbol) per.push_back(to_json(q));
    j["recommended_windows"] = recommend_windows(r);
    return j;
}

}  // namespace alphadesk
