#pragma once

#include <vector>

#include "rrecon/indices.hpp"
#include "rrecon/preprocess.hpp"

namespace rrecon {

// Paired empirical quantiles of hindcast and reference at fixed levels.
// Applied as piecewise-linear interpolation between knots with
// constant-offset extrapolation beyond the outermost ones.
struct QuantileMap {
    std::vector<double> levels;
    std::vector<double> hind; // non-decreasing knots
    std::vector<double> ref;  // non-decreasing knots
};

// 0.00, 0.01, ..., 1.00
std::vector<double> default_quantile_levels();

// Linear-interpolation empirical quantile (order statistics at level
// k/(n-1)); shared by fit and the oracle tests.
double empirical_quantile(std::vector<double> sorted_sample, double level);

QuantileMap eqm_fit(std::span<const double> hindcast, std::span<const double> reference,
                    const std::vector<double>& levels = default_quantile_levels());

double eqm_apply(const QuantileMap& map, double x);

// Monthly ensemble forecast: values laid out (member, lead, init, lat, lon).
// Lead l verifies at init month + l - 1.
struct EnsembleForecast {
    Grid grid;
    std::string variable;
    int n_members = 25;
    int n_leads = 7;
    TimeAxis inits; // monthly stamps of initialization dates
    std::vector<double> values;

    std::size_t plane() const { return grid.npoints(); }
    std::size_t n_inits() const { return inits.size(); }
    std::size_t offset(int member, int lead, std::size_t init) const {
        return ((std::size_t(member) * n_leads + lead) * n_inits() + init) * plane();
    }
    std::span<double> field(int member, int lead, std::size_t init) {
        return {values.data() + offset(member, lead, init), plane()};
    }
    std::span<const double> field(int member, int lead, std::size_t init) const {
        return {values.data() + offset(member, lead, init), plane()};
    }
    YearMonth verify_month(std::size_t init, int lead) const {
        return YearMonth::from_index(year_month(inits.stamps[init]).index() + lead);
    }
    void allocate() { values.assign(std::size_t(n_members) * n_leads * n_inits() * plane(), 0.0); }
};

// Quantile maps per gridpoint and calendar month for one (member, lead)
// series, or pooled across members when configured.
struct FieldQuantileMap {
    Grid grid;
    std::vector<double> levels;
    // month-major (12) x gridpoint
    std::vector<QuantileMap> maps;
    const QuantileMap& at(int month /*1..12*/, std::size_t p) const {
        return maps[std::size_t(month - 1) * grid.npoints() + p];
    }
};

// Fits per calendar month and gridpoint over the hindcast inits
// (init verifying months inside the hindcast period), separately per
// member and lead; pool_members fits one map from all members' samples.
struct EqmOptions {
    // empty = auto: min(101, sample count) equally spaced levels incl. endpoints
    std::vector<double> levels;
    bool pool_members = false;
};

// reference: monthly observed series covering every hindcast verifying month.
EnsembleForecast eqm_correct(const EnsembleForecast& forecast, const GridField& reference,
                             const ClimatologyPeriod& hindcast_period, const EqmOptions& opt = {});

// (F - monthly mean of mu_d) / monthly mean of s_d, per member/lead/init.
EnsembleForecast forecast_monthly_anomalies(const EnsembleForecast& corrected,
                                            const CalendarClimatology& clim);

// Member/lead indices: Eq.(2) projection of each standardized anomaly field
// onto the regime patterns plus Eq.(1) normalization with the
// reanalysis-derived moments.
struct EnsembleIndexSeries {
    int n_members = 0;
    int n_leads = 0;
    TimeAxis inits;
    std::vector<std::string> names;
    std::vector<double> values; // member x lead x init x k

    int k() const { return static_cast<int>(names.size()); }
    double at(int member, int lead, std::size_t init, int j) const {
        return values[((std::size_t(member) * n_leads + lead) * inits.size() + init) * names.size() + j];
    }
};

EnsembleIndexSeries ensemble_index_projection(const EnsembleForecast& std_anom,
                                              const RegimePatterns& patterns,
                                              const NormMoments& moments);

// Arithmetic mean over the member dimension.
EnsembleForecast ensemble_mean(const EnsembleForecast& forecast);

} // namespace rrecon
