#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rrecon {

struct Date {
    int y = 1970;
    int m = 1; // 1..12
    int d = 1; // 1..31

    friend bool operator==(const Date&, const Date&) = default;
    friend auto operator<=>(const Date& a, const Date& b) = default;
};

struct YearMonth {
    int y = 1970;
    int m = 1;

    // months since year 0, for arithmetic
    int index() const { return y * 12 + (m - 1); }
    static YearMonth from_index(int idx) { return {idx >= 0 ? idx / 12 : (idx - 11) / 12, (idx % 12 + 12) % 12 + 1}; }

    friend bool operator==(const YearMonth&, const YearMonth&) = default;
    friend auto operator<=>(const YearMonth& a, const YearMonth& b) = default;
};

bool is_leap(int year);
int days_in_month(int year, int month);

// days since 1970-01-01 (proleptic Gregorian)
std::int64_t to_serial(const Date& d);
Date from_serial(std::int64_t days);
Date add_days(const Date& d, std::int64_t n);

// Index of the calendar day in the 366-entry leap-year calendar
// (Jan-01 -> 0, Feb-29 -> 59, Dec-31 -> 365). Non-leap years never
// produce index 59.
int calendar_slot(const Date& d);
inline constexpr int kCalendarSlots = 366;

YearMonth year_month(const Date& d);

std::string format_date(const Date& d);      // YYYY-MM-DD
std::string format_ym(const YearMonth& ym);  // YYYY-MM
Date parse_date(const std::string& s);
YearMonth parse_ym(const std::string& s);

enum class TimeKind { daily, monthly };

// Ordered time stamps of a GridField or IndexSeries. Monthly stamps are
// stored as the first day of the month.
struct TimeAxis {
    TimeKind kind = TimeKind::daily;
    std::vector<Date> stamps;

    std::size_t size() const { return stamps.size(); }
    bool strictly_increasing() const;
    // -1 when absent
    std::ptrdiff_t find(const Date& d) const;

    static TimeAxis daily_range(const Date& first, const Date& last);
    static TimeAxis monthly_range(const YearMonth& first, const YearMonth& last);
};

} // namespace rrecon
