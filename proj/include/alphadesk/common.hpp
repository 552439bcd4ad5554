// Shared primitives: the missing-value sentinel, the dense date x symbol
// matrix, calendar dates, error type and seed derivation.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace alphadesk {

/// Missing cells are quiet NaNs. Every finite value (including 0) is present.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) noexcept { return std::isnan(v); }

/// Degenerate-dispersion cutoff used by every operator that divides by a std.
inline constexpr double kStdFloor = 1e-12;

inline constexpr double kTradingDaysPerYear = 252.0;

enum class ErrorCode {
    DuplicateRecord,
    MalformedRow,
    EmptyInput,
    InvalidConfig,
    UnknownField,
    NoData,
    ZeroExpected,
    SyntaxError,
    UnknownOperator,
    ArityError,
    WindowOutOfRange,
    MissingReturns,
    TooFewDates,
    EmptyDataset,
    NotFitted,
    WeightMismatch,
    ArchiveTooSmall,
    CalendarMismatch,
    ShapeMismatch,
    InfeasibleCardinality,
    ZeroVolatilityAsset,
    NoConvergence,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Dense row-major matrix; rows are dates, columns are symbols.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = kMissing)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    std::vector<double> column(std::size_t c) const;
    void set_column(std::size_t c, std::span<const double> v);

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Bitwise equality that treats two missing cells as equal.
bool identical(const Matrix& a, const Matrix& b) noexcept;

/// A civil calendar date stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day);
    /// Parses YYYY-MM-DD; throws Error(MalformedRow) on anything else.
    static Date parse(std::string_view iso);

    std::int32_t days() const noexcept { return days_; }
    /// 0 = Monday ... 6 = Sunday.
    int weekday() const noexcept;
    std::string iso() const;

    friend constexpr auto operator<=>(Date, Date) = default;

private:
    std::int32_t days_ = 0;
};

/// Half-open range of date indices [begin, end).
struct DateRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
    bool contains(std::size_t t) const noexcept { return t >= begin && t < end; }
    friend bool operator==(const DateRange&, const DateRange&) = default;
};

/// SplitMix64 finalizer; the single source of derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for child stream `index` of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

/// 64-bit FNV-1a, stable across platforms.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace alphadesk
