#include "alphadesk/panel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

namespace alphadesk {

TradingCalendar::TradingCalendar(std::vector<Date> dates) : dates_(std::move(dates)) {
    for (std::size_t i = 1; i < dates_.size(); ++i) {
        if (!(dates_[i - 1] < dates_[i])) {
            throw Error(ErrorCode::InvalidConfig, "calendar dates must be strictly increasing");
        }
    }
}

PanelSet::PanelSet(TradingCalendar calendar, std::vector<std::string> symbols)
    : calendar_(std::move(calendar)), symbols_(std::move(symbols)) {
    std::set<std::string> seen(symbols_.begin(), symbols_.end());
    if (seen.size() != symbols_.size()) {
        throw Error(ErrorCode::InvalidConfig, "duplicate symbol in symbol list");
    }
    group_ids_.assign(symbols_.size(), -1);
}

void PanelSet::set_field(std::string name, Matrix values) {
    if (values.rows() != n_dates() || values.cols() != n_symbols()) {
        throw Error(ErrorCode::ShapeMismatch, "field '" + name + "' has the wrong shape");
    }
    PanelField f{name, std::move(values)};
    fields_.insert_or_assign(std::move(name), std::move(f));
}

const PanelField& PanelSet::field(const std::string& name) const {
    auto it = fields_.find(name);
    if (it == fields_.end()) throw Error(ErrorCode::UnknownField, "no field '" + name + "'");
    return it->second;
}

std::vector<std::string> PanelSet::field_names() const {
    std::vector<std::string> out;
    out.reserve(fields_.size());
    for (const auto& [k, _] : fields_) out.push_back(k);
    return out;
}

void PanelSet::set_groups(std::map<std::string, std::string> groups) {
    groups_ = std::move(groups);
    std::map<std::string, int> label_ids;
    for (const auto& [_, label] : groups_) label_ids.emplace(label, 0);
    int next = 0;
    for (auto& [_, id] : label_ids) id = next++;
    group_ids_.assign(symbols_.size(), -1);
    for (std::size_t j = 0; j < symbols_.size(); ++j) {
        auto it = groups_.find(symbols_[j]);
        if (it != groups_.end()) group_ids_[j] = label_ids.at(it->second);
    }
}

void PanelSet::derive_returns() {
    const Matrix& close = field("close").values;
    Matrix ret(n_dates(), n_symbols());
    for (std::size_t t = 1; t < n_dates(); ++t) {
        for (std::size_t j = 0; j < n_symbols(); ++j) {
            const double prev = close(t - 1, j);
            const double cur = close(t, j);
            if (!is_missing(prev) && !is_missing(cur) && prev != 0.0) ret(t, j) = cur / prev - 1.0;
        }
    }
    set_field("returns", std::move(ret));
}

bool operator==(const PanelSet& a, const PanelSet& b) {
    if (!(a.calendar_ == b.calendar_) || a.symbols_ != b.symbols_ || a.groups_ != b.groups_) {
        return false;
    }
    if (a.fields_.size() != b.fields_.size()) return false;
    for (const auto& [name, f] : a.fields_) {
        auto it = b.fields_.find(name);
        if (it == b.fields_.end() || !identical(f.values, it->second.values)) return false;
    }
    return true;
}

const PanelField& get_field(const PanelSet& panel, const std::string& name) {
    return panel.field(name);
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    for (auto& s : out) {
        while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
        while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    }
    return out;
}

double parse_value(std::string_view s, std::size_t line_no) {
    if (s.empty() || s == "NA" || s == "NaN" || s == "nan") return kMissing;
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::MalformedRow,
                    "line " + std::to_string(line_no) + ": bad value '" + std::string(s) + "'");
    }
    return v;
}

struct Record {
    Date date;
    std::string symbol;
    std::string field;
    double value;
};

PanelSet assemble(std::vector<Record> records, const std::vector<std::string>& declared_fields) {
    if (records.empty()) throw Error(ErrorCode::EmptyInput, "no data rows");
    std::sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
        return std::tie(a.date, a.symbol, a.field) < std::tie(b.date, b.symbol, b.field);
    });
    for (std::size_t k = 1; k < records.size(); ++k) {
        const auto& a = records[k - 1];
        const auto& b = records[k];
        if (a.date == b.date && a.symbol == b.symbol && a.field == b.field) {
            throw Error(ErrorCode::DuplicateRecord,
                        a.date.iso() + "," + a.symbol + "," + a.field + " appears twice");
        }
    }
    std::set<Date> dates;
    std::set<std::string> symbols;
    std::set<std::string> fields(declared_fields.begin(), declared_fields.end());
    for (const auto& r : records) {
        dates.insert(r.date);
        symbols.insert(r.symbol);
        fields.insert(r.field);
    }
    std::vector<Date> date_list(dates.begin(), dates.end());
    std::vector<std::string> symbol_list(symbols.begin(), symbols.end());
    PanelSet panel(TradingCalendar(date_list), symbol_list);

    std::map<std::string, Matrix> mats;
    for (const auto& f : fields) mats.emplace(f, Matrix(date_list.size(), symbol_list.size()));
    for (const auto& r : records) {
        const auto t = static_cast<std::size_t>(
            std::lower_bound(date_list.begin(), date_list.end(), r.date) - date_list.begin());
        const auto j = static_cast<std::size_t>(
            std::lower_bound(symbol_list.begin(), symbol_list.end(), r.symbol) - symbol_list.begin());
        mats.at(r.field)(t, j) = r.value;
    }
    for (auto& [name, m] : mats) panel.set_field(name, std::move(m));
    if (panel.has_field("close")) panel.derive_returns();
    return panel;
}

}  // namespace

PanelSet ingest_csv_text(const std::string& text, CsvLayout layout) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    static const std::vector<std::string> kLongHeader = {"date", "symbol", "field", "value"};
    static const std::vector<std::string> kWideHeader = {"date",  "symbol", "open",  "high",
                                                         "low",   "close",  "volume"};
    const auto& header = layout == CsvLayout::Long ? kLongHeader : kWideHeader;

    bool have_header = false;
    std::vector<Record> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (!have_header) {
            if (cells.size() != header.size() ||
                !std::equal(cells.begin(), cells.end(), header.begin())) {
                throw Error(ErrorCode::MalformedRow, "unexpected header '" + line + "'");
            }
            have_header = true;
            continue;
        }
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) +
                                                     ": expected " + std::to_string(header.size()) +
                                                     " columns");
        }
        Date date;
        try {
            date = Date::parse(cells[0]);
        } catch (const Error& e) {
            throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": " + e.what());
        }
        std::string symbol(cells[1]);
        if (symbol.empty()) {
            throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": empty symbol");
        }
        if (layout == CsvLayout::Long) {
            if (cells[2].empty()) {
                throw Error(ErrorCode::MalformedRow,
                            "line " + std::to_string(line_no) + ": empty field name");
            }
            records.push_back({date, symbol, std::string(cells[2]), parse_value(cells[3], line_no)});
        } else {
            for (std::size_t c = 2; c < header.size(); ++c) {
                records.push_back({date, symbol, header[c], parse_value(cells[c], line_no)});
            }
        }
    }
    if (!have_header) throw Error(ErrorCode::EmptyInput, "empty CSV");
    std::vector<std::string> declared;
    if (layout == CsvLayout::WideOhlcv) declared.assign(header.begin() + 2, header.end());
    return assemble(std::move(records), declared);
}

PanelSet ingest_csv(const std::filesystem::path& path, CsvLayout layout) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return ingest_csv_text(buf.str(), layout);
}

void load_groups_csv(PanelSet& panel, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::map<std::string, std::string> groups;
    std::string line;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (header) {
            header = false;
            if (cells.size() == 2 && cells[0] == "symbol" && cells[1] == "group") continue;
        }
        if (cells.size() != 2 || cells[0].empty() || cells[1].empty()) {
            throw Error(ErrorCode::MalformedRow, "groups line " + std::to_string(line_no));
        }
        if (!groups.emplace(std::string(cells[0]), std::string(cells[1])).second) {
            throw Error(ErrorCode::DuplicateRecord, "group for " + std::string(cells[0]));
        }
    }
    panel.set_groups(std::move(groups));
}

void SyntheticConfig::validate() const {
    if (n_days < 30) throw Error(ErrorCode::InvalidConfig, "n_days must be >= 30");
    if (n_symbols < 3) throw Error(ErrorCode::InvalidConfig, "n_symbols must be >= 3");
    if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "signal_strength must be in [0,1]");
    }
    if (!(noise_vol > 0.0) || !std::isfinite(noise_vol)) {
        throw Error(ErrorCode::InvalidConfig, "noise_vol must be > 0");
    }
}

PanelSet generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<Date> dates;
    dates.reserve(cfg.n_days);
    Date d = Date::from_ymd(2016, 1, 4);
    while (dates.size() < cfg.n_days) {
        if (d.weekday() < 5) dates.push_back(d);
        d = Date(d.days() + 1);
    }
    std::vector<std::string> symbols;
    for (std::size_t j = 0; j < cfg.n_symbols; ++j) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "S%03zu", j);
        symbols.emplace_back(buf);
    }
    PanelSet panel(TradingCalendar(std::move(dates)), symbols);

    const std::size_t n = cfg.n_days;
    const std::size_t m = cfg.n_symbols;
    Matrix sig(n, m), close(n, m), volume(n, m), ret(n, m);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < m; ++j) sig(t, j) = normal(rng);
    }
    for (std::size_t j = 0; j < m; ++j) close(0, j) = 100.0 * std::exp(0.2 * normal(rng));
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < m; ++j) volume(t, j) = std::exp(13.0 + 0.5 * normal(rng));
    }
    std::vector<double> z(m);
    for (std::size_t t = 1; t < n; ++t) {
        double mean = 0.0;
        for (std::size_t j = 0; j < m; ++j) mean += sig(t - 1, j);
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (std::size_t j = 0; j < m; ++j) ss += (sig(t - 1, j) - mean) * (sig(t - 1, j) - mean);
        const double sd = std::sqrt(ss / static_cast<double>(m - 1));
        for (std::size_t j = 0; j < m; ++j) z[j] = sd > 0 ? (sig(t - 1, j) - mean) / sd : 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double r = cfg.signal_strength * z[j] * cfg.noise_vol + cfg.noise_vol * normal(rng);
            ret(t, j) = r;
            close(t, j) = close(t - 1, j) * (1.0 + r);
        }
    }
    panel.set_field("sig", std::move(sig));
    panel.set_field("close", std::move(close));
    panel.set_field("volume", std::move(volume));
    // returns are re-derived from close so the stored field matches the ingest contract.
    panel.derive_returns();

    if (cfg.n_groups > 0) {
        std::map<std::string, std::string> groups;
        for (std::size_t j = 0; j < m; ++j) groups[symbols[j]] = "G" + std::to_string(j % cfg.n_groups);
        panel.set_groups(std::move(groups));
    }
    return panel;
}

void write_long_csv(const PanelSet& panel, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "date,symbol,field,value\n";
    char buf[64];
    for (const auto& name : panel.field_names()) {
        if (name == "returns") continue;
        const auto& m = panel.field(name).values;
        for (std::size_t t = 0; t < panel.n_dates(); ++t) {
            const auto iso = panel.calendar()[t].iso();
            for (std::size_t j = 0; j < panel.n_symbols(); ++j) {
                if (is_missing(m(t, j))) continue;
                std::snprintf(buf, sizeof buf, "%.17g", m(t, j));
                out << iso << ',' << panel.symbols()[j] << ',' << name << ',' << buf << '\n';
            }
        }
    }
}

}  // namespace alphadesk
