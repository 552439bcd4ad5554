// Command-line pipeline: JSON run configuration, per-stage commands that
// compose via files, and the exit-code contract.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphadesk/allocation.hpp"
#include "alphadesk/panel.hpp"
#include "alphadesk/quality.hpp"
#include "alphadesk/search.hpp"

namespace alphadesk {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitArchive = 4;
inline constexpr int kExitAlignment = 5;

/// Exit code for an error raised by a command.
int exit_code_for(ErrorCode code) noexcept;

struct DataSourceConfig {
    enum class Kind { Synthetic, Csv };
    Kind kind = Kind::Synthetic;
    /// Synthetic seed is overwritten from the global seed.
    SyntheticConfig synthetic;
    std::filesystem::path path;
    CsvLayout layout = CsvLayout::Long;
    std::optional<std::filesystem::path> groups;
};

struct EnsembleStageConfig {
    std::size_t horizon = 1;
    std::size_t budget = 40;
    std::size_t n_trials = 200;
    /// Archive read by `ensemble`; defaults to <out>/archive.jsonl.
    std::optional<std::filesystem::path> archive;
};

struct AllocationStageConfig {
    AllocationConfig allocation;
    /// Books read by `allocate` (`date,symbol,weight` CSVs).
    std::vector<std::filesystem::path> books;
    /// Archive alphas turned into books by `run-all`.
    std::size_t n_books = 5;
};

/// Every stage seed is derive_seed(seed, stage) with data 1, search 2,
/// ensemble 3, allocation 4.
struct RunConfig {
    DataSourceConfig data;
    std::array<double, 3> split{0.6, 0.2, 0.2};
    QualityConfig quality;
    /// Fields reported by `quality`; empty means every field.
    std::vector<std::string> quality_fields;
    SearchConfig search;
    EnsembleStageConfig ensemble;
    AllocationStageConfig allocation;
    std::filesystem::path out = "out";
    std::uint64_t seed = 1;
    unsigned threads = 1;

    /// Throws InvalidConfig; touches no data.
    void validate() const;
};

enum class Stage : std::uint64_t { Data = 1, Search = 2, Ensemble = 3, Allocation = 4 };
std::uint64_t stage_seed(const RunConfig& cfg, Stage stage) noexcept;

/// Rejects unknown keys at every level. Throws InvalidConfig.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Throws IoError when the file is unreadable and InvalidConfig when it is not JSON.
RunConfig load_run_config(const std::filesystem::path& path);

/// Panel from the configured source with returns present. Throws data errors.
PanelSet load_panel(const RunConfig& cfg);

/// Reads `date,symbol,weight` rows; absent cells are 0. Unknown dates or
/// symbols throw CalendarMismatch.
PositionMatrix read_book_csv(const std::filesystem::path& path, const PanelSet& panel);
/// Writes every non-zero cell.
void write_book_csv(const PositionMatrix& book, const PanelSet& panel, const std::filesystem::path& path);

// Commands write under cfg.out and return on success; failures throw Error.
void cmd_gen_data(const RunConfig& cfg);
void cmd_quality(const RunConfig& cfg, const PanelSet& panel);
AlphaArchive cmd_search(const RunConfig& cfg, const PanelSet& panel);
void cmd_ensemble(const RunConfig& cfg, const PanelSet& panel, const AlphaArchive& archive);
void cmd_allocate(const RunConfig& cfg, const PanelSet& panel, std::span<const PositionMatrix> books,
                  const std::vector<std::string>& book_names);
void cmd_run_all(const RunConfig& cfg);

/// Parses arguments, runs one subcommand and maps errors to exit codes.
int run_cli(int argc, char** argv);

}  // namespace alphadesk
