#include "alphadesk/common.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>

namespace alphadesk {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::DuplicateRecord: return "DuplicateRecord";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::UnknownField: return "UnknownField";
        case ErrorCode::NoData: return "NoData";
        case ErrorCode::ZeroExpected: return "ZeroExpected";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::UnknownOperator: return "UnknownOperator";
        case ErrorCode::ArityError: return "ArityError";
        case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
        case ErrorCode::MissingReturns: return "MissingReturns";
        case ErrorCode::TooFewDates: return "TooFewDates";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::NotFitted: return "NotFitted";
        case ErrorCode::WeightMismatch: return "WeightMismatch";
        case ErrorCode::ArchiveTooSmall: return "ArchiveTooSmall";
        case ErrorCode::CalendarMismatch: return "CalendarMismatch";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::InfeasibleCardinality: return "InfeasibleCardinality";
        case ErrorCode::ZeroVolatilityAsset: return "ZeroVolatilityAsset";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
    return out;
}

void Matrix::set_column(std::size_t c, std::span<const double> v) {
    for (std::size_t r = 0; r < rows_; ++r) data_[r * cols_ + c] = v[r];
}

bool identical(const Matrix& a, const Matrix& b) noexcept {
    if (!a.same_shape(b)) return false;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) {
        if (is_missing(av[k]) != is_missing(bv[k])) return false;
        if (!is_missing(av[k]) && std::memcmp(&av[k], &bv[k], sizeof(double)) != 0) return false;
    }
    return true;
}

// Civil-date conversions after H. Hinnant's days_from_civil / civil_from_days.
Date Date::from_ymd(int year, unsigned month, unsigned day) {
    if (month < 1 || month > 12 || day < 1 || day > 31) {
        throw Error(ErrorCode::MalformedRow, "invalid date components");
    }
    static constexpr unsigned kDays[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (day > kDays[month - 1] || (month == 2 && day == 29 && !leap)) {
        throw Error(ErrorCode::MalformedRow, "invalid day of month");
    }
    const int y = year - (month <= 2 ? 1 : 0);
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return Date(era * 146097 + static_cast<int>(doe) - 719468);
}

Date Date::parse(std::string_view iso) {
    auto bad = [&] { return Error(ErrorCode::MalformedRow, "bad date '" + std::string(iso) + "'"); };
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw bad();
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    auto num = [&](std::size_t pos, std::size_t len, auto& out) {
        auto [p, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, out);
        if (ec != std::errc{} || p != iso.data() + pos + len) throw bad();
    };
    num(0, 4, y);
    num(5, 2, m);
    num(8, 2, d);
    try {
        return from_ymd(y, m, d);
    } catch (const Error&) {
        throw bad();
    }
}

int Date::weekday() const noexcept {
    // 1970-01-01 was a Thursday (index 3).
    return ((days_ % 7) + 7 + 3) % 7;
}

std::string Date::iso() const {
    const int z = days_ + 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y + (m <= 2 ? 1 : 0), m, d);
    return buf;
}

}  // namespace alphadesk
