// Small fixtures shared by the unit tests.
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "alphadesk/panel.hpp"

namespace alphadesk::testing {

inline std::vector<Date> consecutive_dates(std::size_t n, std::int32_t first = 18262) {
    std::vector<Date> out;
    for (std::size_t k = 0; k < n; ++k) out.emplace_back(first + static_cast<std::int32_t>(k));
    return out;
}

inline std::vector<std::string> symbol_names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back("s" + std::to_string(k));
    return out;
}

/// Matrix from row-major nested initializer data.
inline Matrix matrix_of(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

/// Panel with one field per (name, matrix) pair, all sharing a shape.
inline PanelSet panel_of(const std::vector<std::pair<std::string, Matrix>>& fields) {
    const Matrix& first = fields.front().second;
    PanelSet p(TradingCalendar(consecutive_dates(first.rows())), symbol_names(first.cols()));
    for (const auto& [name, m] : fields) p.set_field(name, m);
    return p;
}

/// Random panel with fields x, y, z and returns; `missing` is the chance a cell is missing.
inline PanelSet random_panel(std::uint64_t seed, std::size_t n_dates, std::size_t n_symbols,
                             double missing = 0.0, bool groups = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PanelSet p(TradingCalendar(consecutive_dates(n_dates)), symbol_names(n_symbols));
    for (const char* name : {"x", "y", "z", "returns"}) {
        Matrix m(n_dates, n_symbols);
        for (auto& v : m.values()) {
            v = unit(rng) < missing ? kMissing : normal(rng) * (std::string(name) == "returns" ? 0.01 : 1.0);
        }
        p.set_field(name, m);
    }
    if (groups) {
        std::map<std::string, std::string> g;
        for (std::size_t j = 0; j < n_symbols; ++j) g["s" + std::to_string(j)] = "g" + std::to_string(j % 3);
        p.set_groups(g);
    }
    return p;
}

}  // namespace alphadesk::testing
