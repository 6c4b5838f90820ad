#pragma once

#include <array>
#include <vector>

#include "rrecon/grid.hpp"

namespace rrecon {

struct ClimatologyPeriod {
    Date start{1981, 1, 1};
    Date end{2010, 12, 31};

    void validate() const; // start < end, at least two full years
    bool contains(const Date& d) const { return d >= start && d <= end; }
};

// Per-calendar-day statistics over a climatology period. Slot 59 (Feb-29)
// is populated from the windows centered on Feb-29 in leap years; non-leap
// years never look it up. s holds the spatially averaged smoothed standard
// deviation (NaN until calendar_day_normalization fills it).
struct CalendarClimatology {
    Grid grid;
    std::string variable;
    int window_days = 15;
    std::vector<double> mean;  // kCalendarSlots x nlat x nlon
    std::vector<int> count;    // samples per slot
    std::vector<double> s;     // kCalendarSlots, normalization scalars

    std::span<const double> slot_mean(int slot) const {
        return {mean.data() + std::size_t(slot) * grid.npoints(), grid.npoints()};
    }
};

// Mean over all period days whose calendar day lies within +/-(window-1)/2
// of each calendar day, wrapping across year boundaries.
CalendarClimatology calendar_day_climatology(const GridField& daily, const ClimatologyPeriod& period,
                                             int window_days = 15);

// x(t) - mu_day(t)
GridField anomalies(const GridField& daily, const CalendarClimatology& clim);

// Centered Savitzky-Golay least-squares smoothing per gridpoint; the first
// and last (window-1)/2 steps use a one-sided fit over the available window
// so the series length is preserved.
GridField savgol_lowpass(const GridField& series, int window_days = 5, int poly_order = 2);

// Per-calendar-day std of the (filtered) anomalies, smoothed with the
// moving window over calendar days, then cosine-weighted spatially
// averaged. Throws NumericError("degenerate normalization") if any defined
// entry is zero.
std::vector<double> calendar_day_normalization(const GridField& anom, const ClimatologyPeriod& period,
                                               int window_days = 15);

// anom(t) / s_day(t)
GridField standardize(const GridField& anom, const std::vector<double>& s);

enum class AggMode { mean, sum };

// Calendar-month reduction of a daily series (temperature: mean,
// precipitation: sum). Partial months are rejected unless allowed.
GridField monthly_aggregate(const GridField& daily, AggMode mode, bool allow_partial = false);

struct PreprocessOptions {
    int clim_window_days = 15;
    int savgol_window = 5;
    int savgol_order = 2;
    bool apply_filter = true;
};

struct Preprocessed {
    CalendarClimatology clim;
    GridField std_anom; // standardized daily anomalies over the full input range
};

// Steps 1-6 in order: climatology, anomalies, low-pass filter,
// normalization, standardization.
Preprocessed preprocess_variable(const GridField& daily, const ClimatologyPeriod& period,
                                 const PreprocessOptions& opt = {});

// Calendar-month aggregation of the daily climatology, for deriving
// monthly forecast anomalies: per-month mean of mu_d and of s_d.
struct MonthlyClimatology {
    Grid grid;
    std::vector<double> mean; // 12 x nlat x nlon
    std::array<double, 12> s{};
};
MonthlyClimatology monthly_climatology(const CalendarClimatology& clim);

void save_climatology(const CalendarClimatology& clim, const std::string& grd_path,
                      const std::string& csv_path);
CalendarClimatology load_climatology(const std::string& grd_path, const std::string& csv_path);

} // namespace rrecon
