// Panel data: aligned date x symbol matrices, one per named field.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "alphadesk/common.hpp"

namespace alphadesk {

/// Strictly increasing list of dates.
class TradingCalendar {
public:
    TradingCalendar() = default;
    /// Throws InvalidConfig unless `dates` is strictly increasing.
    explicit TradingCalendar(std::vector<Date> dates);

    std::size_t size() const noexcept { return dates_.size(); }
    const Date& operator[](std::size_t i) const noexcept { return dates_[i]; }
    const std::vector<Date>& dates() const noexcept { return dates_; }

    friend bool operator==(const TradingCalendar&, const TradingCalendar&) = default;

private:
    std::vector<Date> dates_;
};

struct PanelField {
    std::string name;
    Matrix values;
};

/// Immutable once built; safe to share between threads.
class PanelSet {
public:
    PanelSet() = default;
    PanelSet(TradingCalendar calendar, std::vector<std::string> symbols);

    const TradingCalendar& calendar() const noexcept { return calendar_; }
    const std::vector<std::string>& symbols() const noexcept { return symbols_; }
    std::size_t n_dates() const noexcept { return calendar_.size(); }
    std::size_t n_symbols() const noexcept { return symbols_.size(); }

    /// Adds or replaces a field. Throws ShapeMismatch on a wrong shape.
    void set_field(std::string name, Matrix values);
    bool has_field(const std::string& name) const { return fields_.count(name) != 0; }
    /// Throws UnknownField.
    const PanelField& field(const std::string& name) const;
    std::vector<std::string> field_names() const;

    /// Symbol -> group label; symbols without a label are absent.
    void set_groups(std::map<std::string, std::string> groups);
    bool has_groups() const noexcept { return !groups_.empty(); }
    const std::map<std::string, std::string>& groups() const noexcept { return groups_; }
    /// Dense group id per symbol column, -1 when unlabelled.
    const std::vector<int>& group_ids() const noexcept { return group_ids_; }

    /// Adds `returns` = close_t / close_{t-1} - 1 (row 0 missing).
    void derive_returns();

    friend bool operator==(const PanelSet& a, const PanelSet& b);

private:
    TradingCalendar calendar_;
    std::vector<std::string> symbols_;
    std::map<std::string, PanelField> fields_;
    std::map<std::string, std::string> groups_;
    std::vector<int> group_ids_;
};

const PanelField& get_field(const PanelSet& panel, const std::string& name);

enum class CsvLayout { Long, WideOhlcv };

/// Long: `date,symbol,field,value`. Wide: `date,symbol,open,high,low,close,volume`.
/// Empty value cells are treated as missing.
PanelSet ingest_csv(const std::filesystem::path& path, CsvLayout layout);
PanelSet ingest_csv_text(const std::string& text, CsvLayout layout);

/// Reads `symbol,group` rows and attaches them to the panel.
void load_groups_csv(PanelSet& panel, const std::filesystem::path& path);

struct SyntheticConfig {
    std::uint64_t seed = 1;
    std::size_t n_symbols = 50;
    std::size_t n_days = 1500;
    double signal_strength = 0.3;
    double noise_vol = 0.02;
    /// Symbols are labelled round-robin into this many groups; 0 disables groups.
    std::size_t n_groups = 5;

    void validate() const;
};

/// Emits close, volume, returns and the planted field `sig`, with
/// returns_{t+1} = strength * cs_zscore(sig_t) * noise_vol + N(0, noise_vol^2).
PanelSet generate_synthetic(const SyntheticConfig& cfg);

/// Writes a panel as long CSV (missing cells omitted).
void write_long_csv(const PanelSet& panel, const std::filesystem::path& path);

}  // namespace alphadesk
