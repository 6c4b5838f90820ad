#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rrecon/dates.hpp"

namespace rrecon {

// Regular lat/lon grid, latitudes ascending. Named domains follow the
// Euro-Atlantic (80W-40E, 30-90N) and Europe (20W-40E, 30-70N) sectors.
struct Grid {
    std::vector<double> lats; // degrees north, ascending, uniform step
    std::vector<double> lons; // degrees east, ascending, uniform step
    std::string domain = "custom";

    int nlat() const { return static_cast<int>(lats.size()); }
    int nlon() const { return static_cast<int>(lons.size()); }
    std::size_t npoints() const { return lats.size() * lons.size(); }

    void validate() const; // throws ConfigError on invariant violation

    static Grid regular(double lat0, double lat1, int nlat, double lon0, double lon1, int nlon,
                        std::string domain = "custom");
    static Grid euro_atlantic(int nlat = 16, int nlon = 24);
    static Grid europe(int nlat = 12, int nlon = 16);

    friend bool operator==(const Grid&, const Grid&) = default;
};

// Plain 2-D field on a grid, row-major (lat, lon).
struct Field2 {
    int nlat = 0;
    int nlon = 0;
    std::vector<double> v;

    Field2() = default;
    Field2(int nla, int nlo, double fill = 0.0) : nlat(nla), nlon(nlo), v(std::size_t(nla) * nlo, fill) {}

    double& at(int i, int j) { return v[std::size_t(i) * nlon + j]; }
    double at(int i, int j) const { return v[std::size_t(i) * nlon + j]; }
    std::size_t size() const { return v.size(); }
};

// One variable on a grid over an ordered time axis; values (time, lat, lon)
// row-major. Missing values are quiet NaN under has_missing.
struct GridField {
    Grid grid;
    TimeAxis times;
    std::string variable; // z500 | t2m | tp | *_anom | *_stdanom | ...
    std::string units;
    bool has_missing = false;
    bool source_lat_descending = false; // original on-disk order, reads are normalized
    std::vector<double> values;

    std::size_t plane() const { return grid.npoints(); }
    std::size_t ntime() const { return times.size(); }

    double& at(std::size_t t, int i, int j) { return values[(t * grid.nlat() + i) * grid.nlon() + j]; }
    double at(std::size_t t, int i, int j) const { return values[(t * grid.nlat() + i) * grid.nlon() + j]; }

    std::span<double> plane_span(std::size_t t) { return {values.data() + t * plane(), plane()}; }
    std::span<const double> plane_span(std::size_t t) const { return {values.data() + t * plane(), plane()}; }

    Field2 plane_field(std::size_t t) const;

    void validate() const; // dimension/times invariants

    static GridField make(Grid g, TimeAxis t, std::string variable, std::string units,
                          double fill = 0.0);
};

// Static model inputs on the target grid: latitude plane, longitude plane,
// land-sea mask in [0,1], terrain standardized to zero mean / unit variance.
struct StaticStack {
    Grid grid;
    Field2 lat;
    Field2 lon;
    Field2 land_mask;
    Field2 terrain;

    static StaticStack build(const Grid& g, const Field2& land_mask, const Field2& terrain_m);
    const Field2& layer(int i) const;
    static constexpr int n_layers = 4;
};

inline constexpr double kLandThreshold = 0.5;

struct AreaWeights {
    Field2 w;
    bool has_pole_row = false; // |lat| == 90 row carries zero weight
};

// w(lat, lon) = cos(lat); constant along each row.
AreaWeights area_weights(const Grid& grid);

// Sum(w*f)/Sum(w) over points where mask (if given) is true. Throws
// NumericError("empty domain") when nothing is selected.
double weighted_spatial_mean(std::span<const double> field, std::span<const double> weights,
                             const std::vector<bool>* mask = nullptr);

// Marks sea points (mask < threshold) missing (NaN); land unchanged.
Field2 apply_land_mask(const Field2& field, const Field2& mask, double threshold = kLandThreshold);

} // namespace rrecon
