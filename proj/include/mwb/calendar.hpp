#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mwb {

struct YearMonth {
    int year = 1970;
    int month = 1;

    friend constexpr auto operator<=>(const YearMonth&, const YearMonth&) = default;
};

struct CivilDate {
    int year = 1970;
    int month = 1;
    int day = 1;

    YearMonth year_month() const { return {year, month}; }
    friend constexpr auto operator<=>(const CivilDate&, const CivilDate&) = default;
};

/// Days since 1970-01-01 (proleptic Gregorian).
std::int64_t days_from_civil(const CivilDate& date);
CivilDate civil_from_days(std::int64_t days);
int days_in_month(YearMonth ym);
/// Signed number of months from `from` to `to`.
int months_between(YearMonth from, YearMonth to);
YearMonth add_months(YearMonth ym, int months);

std::optional<CivilDate> parse_date(std::string_view text);        // YYYY-MM-DD
std::optional<YearMonth> parse_year_month(std::string_view text);  // YYYY-MM
std::optional<int> parse_clock(std::string_view text);             // HH:MM -> minutes

std::string format_date(const CivilDate& date);
std::string format_year_month(YearMonth ym);
std::string format_clock(int minutes);

}  // namespace mwb
