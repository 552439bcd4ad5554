#include "alphadesk/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "alphadesk/ensemble.hpp"

namespace alphadesk {

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidConfig:
        case ErrorCode::ZeroExpected:
        case ErrorCode::SyntaxError:
        case ErrorCode::UnknownOperator:
        case ErrorCode::ArityError:
        case ErrorCode::WindowOutOfRange:
        case ErrorCode::InfeasibleCardinality:
        case ErrorCode::WeightMismatch:
            return kExitConfig;
        case ErrorCode::DuplicateRecord:
        case ErrorCode::MalformedRow:
        case ErrorCode::EmptyInput:
        case ErrorCode::UnknownField:
        case ErrorCode::NoData:
        case ErrorCode::MissingReturns:
        case ErrorCode::TooFewDates:
        case ErrorCode::EmptyDataset:
        case ErrorCode::IoError:
            return kExitData;
        case ErrorCode::ArchiveTooSmall:
            return kExitArchive;
        case ErrorCode::CalendarMismatch:
        case ErrorCode::ShapeMismatch:
            return kExitAlignment;
        case ErrorCode::NotFitted:
        case ErrorCode::ZeroVolatilityAsset:
        case ErrorCode::NoConvergence:
            return kExitFailure;
    }
    return kExitFailure;
}

std::uint64_t stage_seed(const RunConfig& cfg, Stage stage) noexcept {
    return derive_seed(cfg.seed, static_cast<std::uint64_t>(stage));
}

void RunConfig::validate() const {
    double total = 0.0;
    for (double f : split) {
        if (!(f > 0.0)) throw Error(ErrorCode::InvalidConfig, "split fractions must be positive");
        total += f;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw Error(ErrorCode::InvalidConfig, "split fractions must sum to 1");
    if (data.kind == DataSourceConfig::Kind::Synthetic) data.synthetic.validate();
    if (data.kind == DataSourceConfig::Kind::Csv && data.path.empty()) {
        throw Error(ErrorCode::InvalidConfig, "data.path is required for csv sources");
    }
    quality.validate();
    search.validate();
    if (ensemble.horizon < 1) throw Error(ErrorCode::InvalidConfig, "ensemble.horizon must be >= 1");
    if (ensemble.budget < 1) throw Error(ErrorCode::InvalidConfig, "ensemble.budget must be >= 1");
    if (ensemble.n_trials < 1) throw Error(ErrorCode::InvalidConfig, "ensemble.n_trials must be >= 1");
    const auto& mvo = allocation.allocation.mvo;
    if (!(mvo.step_size > 0.0)) throw Error(ErrorCode::InvalidConfig, "allocation.mvo.step_size must be > 0");
    if (mvo.cardinality && *mvo.cardinality < 1) {
        throw Error(ErrorCode::InvalidConfig, "allocation.mvo.cardinality must be >= 1");
    }
    if (allocation.allocation.schemes.empty()) throw Error(ErrorCode::InvalidConfig, "allocation.schemes is empty");
    if (!(allocation.allocation.cost_bps >= 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "allocation.cost_bps must be >= 0");
    }
    if (allocation.n_books < 2) throw Error(ErrorCode::InvalidConfig, "allocation.n_books must be >= 2");
    if (threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be >= 1");
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, "out must not be empty");
}

// ---- config parsing ---------------------------------------------------------

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be an object");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    require_object(j, where);
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw Error(ErrorCode::InvalidConfig, "unknown key '" + where + (where.empty() ? "" : ".") + key + "'");
        }
    }
}

template <class T>
void read(const json& j, const char* key, T& dst, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        if constexpr (std::is_unsigned_v<T>) {
            if (!it->is_number_unsigned()) throw Error(ErrorCode::InvalidConfig, "");
        } else if constexpr (std::is_integral_v<T>) {
            if (!it->is_number_integer()) throw Error(ErrorCode::InvalidConfig, "");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number()) throw Error(ErrorCode::InvalidConfig, "");
        }
        dst = it->get<T>();
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, "bad value for '" + where + "." + key + "'");
    }
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& dst, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    T v{};
    read(j, key, v, where);
    dst = v;
}

std::filesystem::path read_path(const json& j, const char* key, const std::string& where) {
    std::string s;
    read(j, key, s, where);
    return s;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    check_keys(j, {"data", "split", "quality", "search", "ensemble", "allocation", "out", "seed", "threads"}, "");
    read(j, "seed", cfg.seed, "config");
    read(j, "threads", cfg.threads, "config");
    if (j.contains("out")) cfg.out = read_path(j, "out", "config");

    if (j.contains("data")) {
        const auto& d = j["data"];
        check_keys(d, {"source", "synthetic", "path", "layout", "groups"}, "data");
        std::string source = "synthetic";
        read(d, "source", source, "data");
        if (source == "synthetic") {
            cfg.data.kind = DataSourceConfig::Kind::Synthetic;
        } else if (source == "csv") {
            cfg.data.kind = DataSourceConfig::Kind::Csv;
        } else {
            throw Error(ErrorCode::InvalidConfig, "data.source must be synthetic or csv");
        }
        if (d.contains("synthetic")) {
            const auto& s = d["synthetic"];
            check_keys(s, {"n_symbols", "n_days", "signal_strength", "noise_vol", "n_groups"}, "data.synthetic");
            read(s, "n_symbols", cfg.data.synthetic.n_symbols, "data.synthetic");
            read(s, "n_days", cfg.data.synthetic.n_days, "data.synthetic");
            read(s, "signal_strength", cfg.data.synthetic.signal_strength, "data.synthetic");
            read(s, "noise_vol", cfg.data.synthetic.noise_vol, "data.synthetic");
            read(s, "n_groups", cfg.data.synthetic.n_groups, "data.synthetic");
        }
        if (d.contains("path")) cfg.data.path = read_path(d, "path", "data");
        if (d.contains("groups")) cfg.data.groups = read_path(d, "groups", "data");
        std::string layout = "long";
        read(d, "layout", layout, "data");
        if (layout == "long") {
            cfg.data.layout = CsvLayout::Long;
        } else if (layout == "wide") {
            cfg.data.layout = CsvLayout::WideOhlcv;
        } else {
            throw Error(ErrorCode::InvalidConfig, "data.layout must be long or wide");
        }
    }

    if (j.contains("split")) {
        std::vector<double> split;
        read(j, "split", split, "config");
        if (split.size() != 3) throw Error(ErrorCode::InvalidConfig, "split needs three fractions");
        std::copy(split.begin(), split.end(), cfg.split.begin());
    }

    if (j.contains("quality")) {
        const auto& q = j["quality"];
        check_keys(q, {"fields", "outlier_threshold", "expected_median"}, "quality");
        read(q, "fields", cfg.quality_fields, "quality");
        read_optional(q, "outlier_threshold", cfg.quality.outlier_threshold, "quality");
        read_optional(q, "expected_median", cfg.quality.expected_median, "quality");
    }

    if (j.contains("search")) {
        const auto& s = j["search"];
        check_keys(s,
                   {"n_restarts", "steps_per_restart", "patience", "eval_budget", "sharpe_threshold", "objective",
                    "max_depth", "cost_bps"},
                   "search");
        read(s, "n_restarts", cfg.search.n_restarts, "search");
        read(s, "steps_per_restart", cfg.search.steps_per_restart, "search");
        read(s, "patience", cfg.search.patience, "search");
        read(s, "eval_budget", cfg.search.eval_budget, "search");
        read(s, "sharpe_threshold", cfg.search.sharpe_threshold, "search");
        read(s, "max_depth", cfg.search.max_depth, "search");
        read(s, "cost_bps", cfg.search.cost_bps, "search");
        std::string objective = "validation_sharpe";
        read(s, "objective", objective, "search");
        if (objective == "validation_sharpe") {
            cfg.search.objective = Objective::ValidationSharpe;
        } else if (objective == "negative_mse") {
            cfg.search.objective = Objective::NegativeMse;
        } else {
            throw Error(ErrorCode::InvalidConfig, "search.objective must be validation_sharpe or negative_mse");
        }
    }

    if (j.contains("ensemble")) {
        const auto& e = j["ensemble"];
        check_keys(e, {"horizon", "budget", "n_trials", "archive"}, "ensemble");
        read(e, "horizon", cfg.ensemble.horizon, "ensemble");
        read(e, "budget", cfg.ensemble.budget, "ensemble");
        read(e, "n_trials", cfg.ensemble.n_trials, "ensemble");
        if (e.contains("archive")) cfg.ensemble.archive = read_path(e, "archive", "ensemble");
    }

    if (j.contains("allocation")) {
        const auto& a = j["allocation"];
        check_keys(a, {"schemes", "mvo", "cost_bps", "books", "n_books"}, "allocation");
        auto& alloc = cfg.allocation.allocation;
        if (a.contains("schemes")) {
            std::vector<std::string> names;
            read(a, "schemes", names, "allocation");
            alloc.schemes.clear();
            for (const auto& n : names) alloc.schemes.push_back(scheme_from_string(n));
        }
        read(a, "cost_bps", alloc.cost_bps, "allocation");
        read(a, "n_books", cfg.allocation.n_books, "allocation");
        if (a.contains("books")) {
            std::vector<std::string> books;
            read(a, "books", books, "allocation");
            cfg.allocation.books.assign(books.begin(), books.end());
        }
        if (a.contains("mvo")) {
            const auto& m = a["mvo"];
            check_keys(m, {"cardinality", "n_steps", "step_size"}, "allocation.mvo");
            read_optional(m, "cardinality", alloc.mvo.cardinality, "allocation.mvo");
            read(m, "n_steps", alloc.mvo.n_steps, "allocation.mvo");
            read(m, "step_size", alloc.mvo.step_size, "allocation.mvo");
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

// ---- data -------------------------------------------------------------------

PanelSet load_panel(const RunConfig& cfg) {
    PanelSet panel;
    if (cfg.data.kind == DataSourceConfig::Kind::Synthetic) {
        SyntheticConfig s = cfg.data.synthetic;
        s.seed = stage_seed(cfg, Stage::Data);
        panel = generate_synthetic(s);
    } else {
        if (!std::filesystem::exists(cfg.data.path)) {
            throw Error(ErrorCode::IoError, "data file not found: " + cfg.data.path.string());
        }
        panel = ingest_csv(cfg.data.path, cfg.data.layout);
        if (cfg.data.groups) load_groups_csv(panel, *cfg.data.groups);
    }
    if (!panel.has_field("returns")) {
        throw Error(ErrorCode::MissingReturns, "panel has neither returns nor close prices");
    }
    return panel;
}

PositionMatrix read_book_csv(const std::filesystem::path& path, const PanelSet& panel) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open book " + path.string());
    std::map<Date, std::size_t> date_index;
    for (std::size_t t = 0; t < panel.n_dates(); ++t) date_index.emplace(panel.calendar().dates()[t], t);
    std::map<std::string, std::size_t> symbol_index;
    for (std::size_t j = 0; j < panel.n_symbols(); ++j) symbol_index.emplace(panel.symbols()[j], j);

    PositionMatrix book(panel.n_dates(), panel.n_symbols(), 0.0);
    std::string line;
    std::size_t line_no = 0;
    const auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line == "date,symbol,weight") continue;
        std::stringstream row(line);
        std::string date, symbol, weight;
        if (!std::getline(row, date, ',') || !std::getline(row, symbol, ',') || !std::getline(row, weight)) {
            throw Error(ErrorCode::MalformedRow, where() + ": expected date,symbol,weight");
        }
        const auto d = date_index.find(Date::parse(date));
        if (d == date_index.end()) throw Error(ErrorCode::CalendarMismatch, where() + ": date " + date + " not in panel");
        const auto s = symbol_index.find(symbol);
        if (s == symbol_index.end()) {
            throw Error(ErrorCode::CalendarMismatch, where() + ": symbol " + symbol + " not in panel");
        }
        std::size_t used = 0;
        double w = 0.0;
        try {
            w = std::stod(weight, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != weight.size() || !std::isfinite(w)) {
            throw Error(ErrorCode::MalformedRow, where() + ": bad weight '" + weight + "'");
        }
        book(d->second, s->second) = w;
    }
    return book;
}

void write_book_csv(const PositionMatrix& book, const PanelSet& panel, const std::filesystem::path& path) {
    if (book.rows() != panel.n_dates() || book.cols() != panel.n_symbols()) {
        throw Error(ErrorCode::ShapeMismatch, "book does not match the panel");
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "date,symbol,weight\n";
    char buf[32];
    for (std::size_t t = 0; t < book.rows(); ++t) {
        const std::string date = panel.calendar().dates()[t].iso();
        for (std::size_t j = 0; j < book.cols(); ++j) {
            if (book(t, j) == 0.0) continue;
            std::snprintf(buf, sizeof buf, "%.17g", book(t, j));
            out << date << ',' << panel.symbols()[j] << ',' << buf << '\n';
        }
    }
}

// ---- commands ---------------------------------------------------------------

namespace {

void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::filesystem::path ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

SampleSplit split_of(const RunConfig& cfg, const PanelSet& panel) {
    return split_sample(panel.calendar(), cfg.split);
}

std::vector<std::string> quality_fields(const RunConfig& cfg, const PanelSet& panel) {
    if (cfg.quality_fields.empty()) return panel.field_names();
    for (const auto& f : cfg.quality_fields) get_field(panel, f);
    return cfg.quality_fields;
}

WindowMenu window_menu(const RunConfig& cfg, const PanelSet& panel) {
    WindowMenu menu;
    for (const auto& name : panel.field_names()) {
        try {
            menu[name] = recommend_windows(evaluate_field(panel.field(name), panel.symbols(), cfg.quality));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoData) throw;
        }
    }
    return menu;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg) {
    if (cfg.data.kind != DataSourceConfig::Kind::Synthetic) {
        throw Error(ErrorCode::InvalidConfig, "gen-data needs a synthetic data source");
    }
    const PanelSet panel = load_panel(cfg);
    const auto dir = ensure_dir(cfg.out);
    write_long_csv(panel, dir / "panel.csv");
    std::ofstream groups(dir / "groups.csv");
    if (!groups) throw Error(ErrorCode::IoError, "cannot write " + (dir / "groups.csv").string());
    groups << "symbol,group\n";
    for (const auto& [symbol, group] : panel.groups()) groups << symbol << ',' << group << '\n';
    std::cout << "wrote " << panel.n_dates() << " dates x " << panel.n_symbols() << " symbols to "
              << (dir / "panel.csv").string() << '\n';
}

void cmd_quality(const RunConfig& cfg, const PanelSet& panel) {
    const auto dir = ensure_dir(cfg.out / "quality");
    for (const auto& name : quality_fields(cfg, panel)) {
        const auto report = evaluate_field(panel.field(name), panel.symbols(), cfg.quality);
        json j = to_json(report);
        j["recommended_windows"] = recommend_windows(report);
        write_json(j, dir / (name + ".json"));
    }
}

AlphaArchive cmd_search(const RunConfig& cfg, const PanelSet& panel) {
    const auto split = split_of(cfg, panel);
    SearchConfig search = cfg.search;
    search.seed = stage_seed(cfg, Stage::Search);
    auto archive = hill_climb(search, panel, split, window_menu(cfg, panel), cfg.threads);
    write_archive(archive, ensure_dir(cfg.out) / "archive.jsonl");
    const auto* best = archive.best_by_validation();
    std::cout << "evaluated " << archive.n_evaluated << ", archived " << archive.entries.size()
              << ", best validation sharpe " << (best ? best->validation.sharpe : 0.0) << '\n';
    return archive;
}

void cmd_ensemble(const RunConfig& cfg, const PanelSet& panel, const AlphaArchive& archive) {
    if (archive.entries.size() < kMinEnsembleAlphas) {
        throw Error(ErrorCode::ArchiveTooSmall, "need at least " + std::to_string(kMinEnsembleAlphas) +
                                                    " archived alphas, have " +
                                                    std::to_string(archive.entries.size()));
    }
    const auto split = split_of(cfg, panel);
    const auto pool = AlphaPool::from_archive(archive, panel);
    const auto dir = ensure_dir(cfg.out);
    const std::uint64_t seed = stage_seed(cfg, Stage::Ensemble);

    const auto trials = random_composition_study(seed, pool, panel, split, cfg.ensemble.n_trials,
                                                 cfg.ensemble.horizon, cfg.threads);
    write_study(trials, pool, dir / "study.jsonl");
    const auto& top = trials.front();
    const auto best = evaluate_ensemble(top.spec, pool, panel, split, true);
    json j{{"trial", top.index},
           {"spec", to_json(top.spec, &pool)},
           {"validation", to_json(best.validation)},
           {"test", to_json(*best.test)}};
    write_json(j, dir / "best_ensemble.json");
    write_pnl_csv(best.test_pnl, dir / "best_ensemble_test_pnl.csv");

    EnsembleSearchConfig es;
    es.seed = derive_seed(seed, 1);
    es.budget = cfg.ensemble.budget;
    es.horizon = cfg.ensemble.horizon;
    const auto climbed = ensemble_search(es, pool, panel, split);
    write_json({{"spec", to_json(climbed.spec, &pool)},
                {"n_evaluated", climbed.n_evaluated},
                {"accepted_scores", climbed.accepted_scores},
                {"validation", to_json(climbed.evaluation.validation)},
                {"test", to_json(*climbed.evaluation.test)}},
               dir / "ensemble_search.json");
    std::cout << "study best validation sharpe " << top.validation.sharpe << ", test sharpe "
              << best.test->sharpe << "; hill-climbed ensemble validation sharpe "
              << climbed.evaluation.validation.sharpe << '\n';
}

void cmd_allocate(const RunConfig& cfg, const PanelSet& panel, std::span<const PositionMatrix> books,
                  const std::vector<std::string>& book_names) {
    if (books.size() < 2) {
        throw Error(ErrorCode::CalendarMismatch, "allocation needs at least two books, got " +
                                                     std::to_string(books.size()));
    }
    const auto split = split_of(cfg, panel);
    AllocationConfig alloc = cfg.allocation.allocation;
    alloc.seed = stage_seed(cfg, Stage::Allocation);
    const DateRange in_sample{split.train.begin, split.validation.end};
    const auto rows = compare_allocations(books, panel, in_sample, split.test, alloc);

    const auto dir = ensure_dir(cfg.out);
    write_allocation_table(rows, dir / "allocation.csv");
    json weights = json::array();
    for (const auto& r : rows) weights.push_back(to_json(r, book_names));
    write_json(weights, dir / "allocation_weights.json");
    const auto pnl_dir = ensure_dir(dir / "allocation_pnl");
    for (const auto& r : rows) write_pnl_csv(r.out_sample_pnl, pnl_dir / (r.name + ".csv"));
    const auto best = std::max_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.out_sample.sharpe < b.out_sample.sharpe;
    });
    std::cout << "allocated " << books.size() << " books; best out-of-sample sharpe " << best->out_sample.sharpe
              << " (" << best->name << ")\n";
}

void cmd_run_all(const RunConfig& cfg) {
    const PanelSet panel = load_panel(cfg);
    cmd_quality(cfg, panel);
    const auto archive = cmd_search(cfg, panel);
    cmd_ensemble(cfg, panel, archive);

    // Books are the top archive alphas by validation sharpe, ties by archive order.
    std::vector<std::size_t> order(archive.entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return archive.entries[a].validation.sharpe > archive.entries[b].validation.sharpe;
    });
    order.resize(std::min(order.size(), cfg.allocation.n_books));
    const auto dir = ensure_dir(cfg.out / "books");
    std::vector<PositionMatrix> books;
    std::vector<std::string> names;
    for (std::size_t id : order) {
        books.push_back(signal_to_weights(evaluate(archive.entries[id].expr, panel)));
        names.push_back("alpha_" + std::to_string(id));
        write_book_csv(books.back(), panel, dir / (names.back() + ".csv"));
    }
    cmd_allocate(cfg, panel, books, names);
}

// ---- entry point ------------------------------------------------------------

int run_cli(int argc, char** argv) {
    CLI::App app{"alphadesk: alpha search, ensembles and allocation over equity panels"};
    app.require_subcommand(1);

    struct Options {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::optional<unsigned> threads;
        std::string out;
        std::string archive;
        std::vector<std::string> books;
    } opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON run configuration");
        sub->add_option("--seed", opt.seed, "global seed");
        sub->add_option("--threads", opt.threads, "worker cap; results do not depend on it");
        sub->add_option("--out", opt.out, "output directory");
        return sub;
    };
    add_common(app.add_subcommand("quality", "field quality reports and recommended windows"));
    add_common(app.add_subcommand("search", "hill-climb alpha expressions into an archive"));
    add_common(app.add_subcommand("ensemble", "composition study and ensemble search over an archive"))
        ->add_option("--archive", opt.archive, "archive JSONL (default <out>/archive.jsonl)");
    add_common(app.add_subcommand("allocate", "compare weighting schemes over position books"))
        ->add_option("--books", opt.books, "book CSVs (date,symbol,weight)");
    add_common(app.add_subcommand("run-all", "data, quality, search, ensemble and allocation"));
    add_common(app.add_subcommand("gen-data", "write a synthetic panel as CSV"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        RunConfig cfg = opt.config.empty() ? run_config_from_json(json::object()) : load_run_config(opt.config);
        if (opt.seed) cfg.seed = *opt.seed;
        if (opt.threads) cfg.threads = *opt.threads;
        if (!opt.out.empty()) cfg.out = opt.out;
        if (!opt.archive.empty()) cfg.ensemble.archive = opt.archive;
        if (!opt.books.empty()) cfg.allocation.books.assign(opt.books.begin(), opt.books.end());
        cfg.validate();

        if (command == "gen-data") {
            cmd_gen_data(cfg);
        } else if (command == "run-all") {
            cmd_run_all(cfg);
        } else {
            const PanelSet panel = load_panel(cfg);
            if (command == "quality") {
                cmd_quality(cfg, panel);
            } else if (command == "search") {
                cmd_search(cfg, panel);
            } else if (command == "ensemble") {
                const auto path = cfg.ensemble.archive.value_or(cfg.out / "archive.jsonl");
                if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoError, "archive not found: " + path.string());
                cmd_ensemble(cfg, panel, read_archive(path));
            } else if (command == "allocate") {
                std::vector<PositionMatrix> books;
                std::vector<std::string> names;
                for (const auto& p : cfg.allocation.books) {
                    books.push_back(read_book_csv(p, panel));
                    names.push_back(p.stem().string());
                }
                cmd_allocate(cfg, panel, books, names);
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace alphadesk
