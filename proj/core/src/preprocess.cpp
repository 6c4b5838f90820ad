#include "rrecon/preprocess.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include <Eigen/Dense>

#include "rrecon/errors.hpp"
#include "rrecon/grd1.hpp"

namespace rrecon {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_window(int window_days) {
    if (window_days < 1 || window_days % 2 == 0) throw ConfigError("window must be odd");
}

void check_period_coverage(const GridField& daily, const ClimatologyPeriod& period) {
    if (daily.times.kind != TimeKind::daily) throw ConfigError("daily field required");
    if (daily.ntime() == 0 || daily.times.stamps.front() > period.start ||
        daily.times.stamps.back() < period.end)
        throw ConfigError("climatology period not covered by data");
}

// Row of the least-squares hat matrix evaluating the fitted polynomial at
// offset 0; offsets are positions relative to the evaluation index.
std::vector<double> savgol_weights(const std::vector<int>& offsets, int order) {
    const int len = static_cast<int>(offsets.size());
    const int p = std::min(order, len - 1);
    Eigen::MatrixXd V(len, p + 1);
    for (int r = 0; r < len; ++r) {
        double t = 1.0;
        for (int c = 0; c <= p; ++c) {
            V(r, c) = t;
            t *= offsets[r];
        }
    }
    const Eigen::MatrixXd vtv = V.transpose() * V;
    const Eigen::MatrixXd m = vtv.ldlt().solve(V.transpose()); // (p+1) x len
    std::vector<double> w(len);
    for (int r = 0; r < len; ++r) w[r] = m(0, r); // phi(0) = e_0
    return w;
}

} // namespace

void ClimatologyPeriod::validate() const {
    if (!(start < end)) throw ConfigError("climatology period start must precede end");
    if (to_serial(end) - to_serial(start) + 1 < 730)
        throw ConfigError("climatology period must span at least two full years");
}

CalendarClimatology calendar_day_climatology(const GridField& daily, const ClimatologyPeriod& period,
                                             int window_days) {
    check_window(window_days);
    period.validate();
    check_period_coverage(daily, period);

    const std::size_t np = daily.plane();
    CalendarClimatology clim;
    clim.grid = daily.grid;
    clim.variable = daily.variable;
    clim.window_days = window_days;
    clim.mean.assign(std::size_t(kCalendarSlots) * np, 0.0);
    clim.count.assign(kCalendarSlots, 0);
    clim.s.assign(kCalendarSlots, kNaN);

    const int half = (window_days - 1) / 2;
    std::vector<double> acc(std::size_t(kCalendarSlots) * np, 0.0);
    std::vector<std::int64_t> cnt(kCalendarSlots, 0);

    for (std::size_t t = 0; t < daily.ntime(); ++t) {
        const Date& day = daily.times.stamps[t];
        if (!period.contains(day)) continue;
        const auto vals = daily.plane_span(t);
        // this sample falls in every window whose center is within half days
        for (int off = -half; off <= half; ++off) {
            const int slot = calendar_slot(add_days(day, off));
            double* a = acc.data() + std::size_t(slot) * np;
            for (std::size_t p = 0; p < np; ++p) a[p] += vals[p];
            ++cnt[slot];
        }
    }

    for (int slot = 0; slot < kCalendarSlots; ++slot) {
        clim.count[slot] = static_cast<int>(cnt[slot]);
        double* m = clim.mean.data() + std::size_t(slot) * np;
        const double* a = acc.data() + std::size_t(slot) * np;
        if (cnt[slot] == 0) {
            for (std::size_t p = 0; p < np; ++p) m[p] = kNaN;
        } else {
            for (std::size_t p = 0; p < np; ++p) m[p] = a[p] / double(cnt[slot]);
        }
    }
    return clim;
}

GridField anomalies(const GridField& daily, const CalendarClimatology& clim) {
    if (daily.variable != clim.variable)
        throw ConfigError("variable mismatch: " + daily.variable + " vs " + clim.variable);
    if (daily.grid != clim.grid) throw ConfigError("grid mismatch in anomalies");

    GridField out = daily;
    out.variable = daily.variable + "_anom";
    const std::size_t np = daily.plane();
    for (std::size_t t = 0; t < daily.ntime(); ++t) {
        const int slot = calendar_slot(daily.times.stamps[t]);
        if (clim.count[slot] == 0)
            throw NumericError("missing calendar-day entry for " + format_date(daily.times.stamps[t]));
        const auto mu = clim.slot_mean(slot);
        double* o = out.values.data() + t * np;
        const double* x = daily.values.data() + t * np;
        for (std::size_t p = 0; p < np; ++p) o[p] = x[p] - mu[p];
    }
    return out;
}

GridField savgol_lowpass(const GridField& series, int window_days, int poly_order) {
    check_window(window_days);
    if (poly_order >= window_days) throw ConfigError("poly_order must be smaller than window");
    const int n = static_cast<int>(series.ntime());
    if (n < window_days) throw ConfigError("series shorter than window");

    const int half = (window_days - 1) / 2;
    // weights per evaluation position: boundary cases + interior
    std::vector<std::vector<double>> w_first(half), w_last(half);
    for (int i = 0; i < half; ++i) {
        std::vector<int> offs;
        for (int j = 0; j <= i + half; ++j) offs.push_back(j - i);
        w_first[i] = savgol_weights(offs, poly_order);
        std::vector<int> offs_last;
        const int ilast = n - 1 - i;
        for (int j = ilast - half; j <= n - 1; ++j) offs_last.push_back(j - ilast);
        w_last[i] = savgol_weights(offs_last, poly_order);
    }
    std::vector<int> offs_mid;
    for (int j = -half; j <= half; ++j) offs_mid.push_back(j);
    const std::vector<double> w_mid = savgol_weights(offs_mid, poly_order);

    GridField out = series;
    const std::size_t np = series.plane();
    for (int i = 0; i < n; ++i) {
        const std::vector<double>* w;
        int start;
        if (i < half) {
            w = &w_first[i];
            start = 0;
        } else if (i >= n - half) {
            w = &w_last[n - 1 - i];
            start = n - static_cast<int>(w_last[n - 1 - i].size());
        } else {
            w = &w_mid;
            start = i - half;
        }
        double* o = out.values.data() + std::size_t(i) * np;
        for (std::size_t p = 0; p < np; ++p) o[p] = 0.0;
        for (std::size_t j = 0; j < w->size(); ++j) {
            const double wj = (*w)[j];
            const double* x = series.values.data() + (std::size_t(start) + j) * np;
            for (std::size_t p = 0; p < np; ++p) o[p] += wj * x[p];
        }
    }
    return out;
}

std::vector<double> calendar_day_normalization(const GridField& anom, const ClimatologyPeriod& period,
                                               int window_days) {
    check_window(window_days);
    period.validate();
    check_period_coverage(anom, period);

    const std::size_t np = anom.plane();
    std::vector<double> sum(std::size_t(kCalendarSlots) * np, 0.0);
    std::vector<double> sumsq(std::size_t(kCalendarSlots) * np, 0.0);
    std::vector<std::int64_t> cnt(kCalendarSlots, 0);

    for (std::size_t t = 0; t < anom.ntime(); ++t) {
        const Date& day = anom.times.stamps[t];
        if (!period.contains(day)) continue;
        const int slot = calendar_slot(day);
        const double* x = anom.values.data() + t * np;
        double* s1 = sum.data() + std::size_t(slot) * np;
        double* s2 = sumsq.data() + std::size_t(slot) * np;
        for (std::size_t p = 0; p < np; ++p) {
            s1[p] += x[p];
            s2[p] += x[p] * x[p];
        }
        ++cnt[slot];
    }

    // population std per calendar day and gridpoint
    std::vector<double> sd(std::size_t(kCalendarSlots) * np, kNaN);
    for (int slot = 0; slot < kCalendarSlots; ++slot) {
        if (cnt[slot] == 0) continue;
        const double inv = 1.0 / double(cnt[slot]);
        double* out = sd.data() + std::size_t(slot) * np;
        const double* s1 = sum.data() + std::size_t(slot) * np;
        const double* s2 = sumsq.data() + std::size_t(slot) * np;
        for (std::size_t p = 0; p < np; ++p) {
            const double mean = s1[p] * inv;
            out[p] = std::sqrt(std::max(0.0, s2[p] * inv - mean * mean));
        }
    }

    // moving-window average over the 366-day circular calendar
    const int half = (window_days - 1) / 2;
    const AreaWeights aw = area_weights(anom.grid);
    std::vector<double> s(kCalendarSlots, kNaN);
    std::vector<double> smoothed(np);
    for (int slot = 0; slot < kCalendarSlots; ++slot) {
        if (cnt[slot] == 0) continue;
        std::fill(smoothed.begin(), smoothed.end(), 0.0);
        int used = 0;
        for (int off = -half; off <= half; ++off) {
            const int o = ((slot + off) % kCalendarSlots + kCalendarSlots) % kCalendarSlots;
            if (cnt[o] == 0) continue;
            const double* src = sd.data() + std::size_t(o) * np;
            for (std::size_t p = 0; p < np; ++p) smoothed[p] += src[p];
            ++used;
        }
        for (std::size_t p = 0; p < np; ++p) smoothed[p] /= double(used);
        s[slot] = weighted_spatial_mean(smoothed, {aw.w.v.data(), aw.w.v.size()});
        if (!(s[slot] > 0.0)) throw NumericError("degenerate normalization");
    }
    return s;
}

GridField standardize(const GridField& anom, const std::vector<double>& s) {
    if (s.size() != kCalendarSlots) throw ConfigError("normalization must have 366 entries");
    GridField out = anom;
    out.variable = anom.variable + (anom.variable.ends_with("_anom") ? "_std" : "_stdanom");
    const std::size_t np = anom.plane();
    for (std::size_t t = 0; t < anom.ntime(); ++t) {
        const double sd = s[calendar_slot(anom.times.stamps[t])];
        if (!(sd > 0.0))
            throw NumericError("missing or degenerate normalization for " +
                               format_date(anom.times.stamps[t]));
        double* o = out.values.data() + t * np;
        for (std::size_t p = 0; p < np; ++p) o[p] /= sd;
    }
    return out;
}

GridField monthly_aggregate(const GridField& daily, AggMode mode, bool allow_partial) {
    if (daily.times.kind != TimeKind::daily) throw ConfigError("daily field required");
    if (daily.ntime() == 0) throw ConfigError("empty month");

    std::map<int, std::vector<std::size_t>> groups; // ym index -> day indices
    for (std::size_t t = 0; t < daily.ntime(); ++t)
        groups[year_month(daily.times.stamps[t]).index()].push_back(t);

    const std::size_t np = daily.plane();
    GridField out;
    out.grid = daily.grid;
    out.times.kind = TimeKind::monthly;
    out.variable = daily.variable + "_monthly";
    out.units = daily.units;
    out.has_missing = daily.has_missing;
    out.values.reserve(groups.size() * np);

    for (const auto& [idx, members] : groups) {
        const YearMonth ym = YearMonth::from_index(idx);
        const std::size_t expected = days_in_month(ym.y, ym.m);
        if (members.empty()) throw ConfigError("empty month " + format_ym(ym));
        if (!allow_partial && members.size() != expected)
            throw ConfigError("incomplete month " + format_ym(ym));
        out.times.stamps.push_back(Date{ym.y, ym.m, 1});
        const std::size_t base = out.values.size();
        out.values.resize(base + np, 0.0);
        for (const std::size_t t : members) {
            const double* x = daily.values.data() + t * np;
            for (std::size_t p = 0; p < np; ++p) out.values[base + p] += x[p];
        }
        if (mode == AggMode::mean)
            for (std::size_t p = 0; p < np; ++p) out.values[base + p] /= double(members.size());
    }
    return out;
}

Preprocessed preprocess_variable(const GridField& daily, const ClimatologyPeriod& period,
                                 const PreprocessOptions& opt) {
    Preprocessed out;
    out.clim = calendar_day_climatology(daily, period, opt.clim_window_days);
    GridField anom = anomalies(daily, out.clim);
    if (opt.apply_filter) anom = savgol_lowpass(anom, opt.savgol_window, opt.savgol_order);
    out.clim.s = calendar_day_normalization(anom, period, opt.clim_window_days);
    out.std_anom = standardize(anom, out.clim.s);
    return out;
}

MonthlyClimatology monthly_climatology(const CalendarClimatology& clim) {
    MonthlyClimatology mc;
    mc.grid = clim.grid;
    const std::size_t np = clim.grid.npoints();
    mc.mean.assign(12 * np, 0.0);
    std::array<int, 12> n{};
    for (int slot = 0; slot < kCalendarSlots; ++slot) {
        if (clim.count[slot] == 0 || !(clim.s.size() == kCalendarSlots && clim.s[slot] > 0.0)) continue;
        // slot dates follow the leap-year calendar
        const Date d = add_days(Date{2000, 1, 1}, slot);
        const int m = d.m - 1;
        const auto mu = clim.slot_mean(slot);
        for (std::size_t p = 0; p < np; ++p) mc.mean[std::size_t(m) * np + p] += mu[p];
        mc.s[m] += clim.s[slot];
        ++n[m];
    }
    for (int m = 0; m < 12; ++m) {
        if (n[m] == 0) throw NumericError("missing month in climatology");
        for (std::size_t p = 0; p < np; ++p) mc.mean[std::size_t(m) * np + p] /= double(n[m]);
        mc.s[m] /= double(n[m]);
    }
    return mc;
}

void save_climatology(const CalendarClimatology& clim, const std::string& grd_path,
                      const std::string& csv_path) {
    // 366 slots stored against the leap year 2000 calendar
    GridField f;
    f.grid = clim.grid;
    f.times = TimeAxis::daily_range(Date{2000, 1, 1}, Date{2000, 12, 31});
    f.variable = clim.variable;
    f.units = "clim";
    f.has_missing = true;
    f.values = clim.mean;
    write_grid_file(f, grd_path);

    std::ofstream os(csv_path, std::ios::trunc);
    if (!os) throw FormatError(FormatErrc::io_failure, "cannot open for write: " + csv_path);
    os << "date,s,count\n";
    char buf[64];
    for (int slot = 0; slot < kCalendarSlots; ++slot) {
        const Date d = add_days(Date{2000, 1, 1}, slot);
        std::snprintf(buf, sizeof buf, "%.17g", clim.s.empty() ? kNaN : clim.s[slot]);
        os << format_date(d) << ',' << buf << ',' << clim.count[slot] << '\n';
    }
}

CalendarClimatology load_climatology(const std::string& grd_path, const std::string& csv_path) {
    const GridField f = read_grid_file(grd_path);
    if (f.ntime() != kCalendarSlots)
        throw FormatError(FormatErrc::dimension_mismatch, "climatology must have 366 entries");
    CalendarClimatology clim;
    clim.grid = f.grid;
    clim.variable = f.variable;
    clim.mean = f.values;
    clim.count.assign(kCalendarSlots, 0);
    clim.s.assign(kCalendarSlots, kNaN);

    std::ifstream is(csv_path);
    if (!is) throw FormatError(FormatErrc::io_failure, "cannot open: " + csv_path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("date,s,count", 0) != 0)
        throw FormatError(FormatErrc::bad_header, "bad climatology csv header");
    int slot = 0;
    while (std::getline(is, line) && slot < kCalendarSlots) {
        char date[16];
        double s = 0.0;
        int count = 0;
        if (std::sscanf(line.c_str(), "%15[^,],%lf,%d", date, &s, &count) != 3)
            throw FormatError(FormatErrc::bad_header, "bad climatology csv row: " + line);
        clim.s[slot] = s;
        clim.count[slot] = count;
        ++slot;
    }
    if (slot != kCalendarSlots)
        throw FormatError(FormatErrc::truncated_payload, "climatology csv has too few rows");
    return clim;
}

} // namespace rrecon
