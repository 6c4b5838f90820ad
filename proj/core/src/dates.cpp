#include "rrecon/dates.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "rrecon/errors.hpp"

namespace rrecon {

bool is_leap(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) {
    static constexpr int lens[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap(year)) return 29;
    return lens[month - 1];
}

// Howard Hinnant's civil-date algorithms.
std::int64_t to_serial(const Date& dt) {
    int y = dt.y;
    const int m = dt.m, d = dt.d;
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Date from_serial(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

Date add_days(const Date& d, std::int64_t n) { return from_serial(to_serial(d) + n); }

int calendar_slot(const Date& d) {
    static constexpr int cum[] = {0, 31, 60, 91, 121, 152, 182, 213, 244, 274, 305, 335};
    return cum[d.m - 1] + d.d - 1;
}

YearMonth year_month(const Date& d) { return {d.y, d.m}; }

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.y, d.m, d.d);
    return buf;
}

std::string format_ym(const YearMonth& ym) {
    char buf[12];
    std::snprintf(buf, sizeof buf, "%04d-%02d", ym.y, ym.m);
    return buf;
}

Date parse_date(const std::string& s) {
    int y = 0, m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 ||
        d > days_in_month(y, m))
        throw FormatError(FormatErrc::bad_header, "invalid date: " + s);
    return Date{y, m, d};
}

YearMonth parse_ym(const std::string& s) {
    int y = 0, m = 0;
    if (std::sscanf(s.c_str(), "%d-%d", &y, &m) != 2 || m < 1 || m > 12)
        throw FormatError(FormatErrc::bad_header, "invalid year-month: " + s);
    return YearMonth{y, m};
}

bool TimeAxis::strictly_increasing() const {
    return std::is_sorted(stamps.begin(), stamps.end()) &&
           std::adjacent_find(stamps.begin(), stamps.end()) == stamps.end();
}

std::ptrdiff_t TimeAxis::find(const Date& d) const {
    auto it = std::lower_bound(stamps.begin(), stamps.end(), d);
    if (it == stamps.end() || *it != d) return -1;
    return it - stamps.begin();
}

TimeAxis TimeAxis::daily_range(const Date& first, const Date& last) {
    TimeAxis ax;
    ax.kind = TimeKind::daily;
    for (std::int64_t s = to_serial(first), e = to_serial(last); s <= e; ++s)
        ax.stamps.push_back(from_serial(s));
    return ax;
}

TimeAxis TimeAxis::monthly_range(const YearMonth& first, const YearMonth& last) {
    TimeAxis ax;
    ax.kind = TimeKind::monthly;
    for (int i = first.index(); i <= last.index(); ++i) {
        const YearMonth ym = YearMonth::from_index(i);
        ax.stamps.push_back(Date{ym.y, ym.m, 1});
    }
    return ax;
}

} // namespace rrecon
