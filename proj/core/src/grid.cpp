#include "rrecon/grid.hpp"

#include <cmath>
#include <limits>

#include "rrecon/errors.hpp"

namespace rrecon {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kStepTol = 1e-9;

void check_axis(const std::vector<double>& ax, const char* name, bool is_lat) {
    if (ax.size() < 2) throw ConfigError(std::string(name) + " axis needs at least 2 points");
    const double step = ax[1] - ax[0];
    if (step <= 0.0) throw ConfigError(std::string(name) + " axis must be strictly ascending");
    for (std::size_t i = 1; i < ax.size(); ++i) {
        if (std::fabs((ax[i] - ax[i - 1]) - step) > kStepTol)
            throw ConfigError(std::string(name) + " axis spacing is not uniform");
    }
    if (is_lat) {
        for (double lat : ax)
            if (std::fabs(lat) > 90.0 + kStepTol) throw ConfigError("latitude outside [-90, 90]");
    }
}

} // namespace

void Grid::validate() const {
    check_axis(lats, "lat", true);
    check_axis(lons, "lon", false);
}

Grid Grid::regular(double lat0, double lat1, int nlat, double lon0, double lon1, int nlon,
                   std::string domain) {
    Grid g;
    g.domain = std::move(domain);
    g.lats.resize(nlat);
    g.lons.resize(nlon);
    for (int i = 0; i < nlat; ++i) g.lats[i] = lat0 + (lat1 - lat0) * i / (nlat - 1);
    for (int j = 0; j < nlon; ++j) g.lons[j] = lon0 + (lon1 - lon0) * j / (nlon - 1);
    g.validate();
    return g;
}

Grid Grid::euro_atlantic(int nlat, int nlon) {
    return regular(30.0, 90.0, nlat, -80.0, 40.0, nlon, "euro-atlantic");
}

Grid Grid::europe(int nlat, int nlon) {
    return regular(30.0, 70.0, nlat, -20.0, 40.0, nlon, "europe");
}

Field2 GridField::plane_field(std::size_t t) const {
    Field2 f(grid.nlat(), grid.nlon());
    const auto s = plane_span(t);
    std::copy(s.begin(), s.end(), f.v.begin());
    return f;
}

void GridField::validate() const {
    grid.validate();
    if (values.size() != ntime() * plane())
        throw FormatError(FormatErrc::dimension_mismatch, "value array does not match times x grid");
    if (!times.strictly_increasing())
        throw FormatError(FormatErrc::bad_header, "times must be strictly increasing");
    if (!has_missing) {
        for (double v : values)
            if (std::isnan(v))
                throw NumericError("NaN value without missing flag in field " + variable);
    }
}

GridField GridField::make(Grid g, TimeAxis t, std::string variable, std::string units, double fill) {
    GridField f;
    f.grid = std::move(g);
    f.times = std::move(t);
    f.variable = std::move(variable);
    f.units = std::move(units);
    f.values.assign(f.ntime() * f.plane(), fill);
    return f;
}

StaticStack StaticStack::build(const Grid& g, const Field2& land_mask, const Field2& terrain_m) {
    if (land_mask.nlat != g.nlat() || land_mask.nlon != g.nlon() || terrain_m.nlat != g.nlat() ||
        terrain_m.nlon != g.nlon())
        throw ConfigError("static layers do not match grid");
    for (double v : land_mask.v)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("land-sea mask values must lie in [0,1]");

    StaticStack s;
    s.grid = g;
    s.lat = Field2(g.nlat(), g.nlon());
    s.lon = Field2(g.nlat(), g.nlon());
    for (int i = 0; i < g.nlat(); ++i)
        for (int j = 0; j < g.nlon(); ++j) {
            s.lat.at(i, j) = g.lats[i];
            s.lon.at(i, j) = g.lons[j];
        }
    s.land_mask = land_mask;

    // standardize terrain over the domain
    double mean = 0.0;
    for (double v : terrain_m.v) mean += v;
    mean /= double(terrain_m.size());
    double var = 0.0;
    for (double v : terrain_m.v) var += (v - mean) * (v - mean);
    var /= double(terrain_m.size());
    const double sd = std::sqrt(var);
    s.terrain = Field2(g.nlat(), g.nlon());
    for (std::size_t i = 0; i < terrain_m.size(); ++i)
        s.terrain.v[i] = sd > 0.0 ? (terrain_m.v[i] - mean) / sd : 0.0;
    return s;
}

const Field2& StaticStack::layer(int i) const {
    switch (i) {
        case 0: return lat;
        case 1: return lon;
        case 2: return land_mask;
        default: return terrain;
    }
}

AreaWeights area_weights(const Grid& grid) {
    grid.validate();
    AreaWeights aw;
    aw.w = Field2(grid.nlat(), grid.nlon());
    for (int i = 0; i < grid.nlat(); ++i) {
        double c = std::cos(grid.lats[i] * kPi / 180.0);
        if (std::fabs(grid.lats[i]) >= 90.0 - 1e-12) {
            c = 0.0;
            aw.has_pole_row = true;
        }
        for (int j = 0; j < grid.nlon(); ++j) aw.w.at(i, j) = c;
    }
    return aw;
}

double weighted_spatial_mean(std::span<const double> field, std::span<const double> weights,
                             const std::vector<bool>* mask) {
    if (field.size() != weights.size()) throw ConfigError("field/weight shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (mask && !(*mask)[i]) continue;
        num += weights[i] * field[i];
        den += weights[i];
    }
    if (den <= 0.0) throw NumericError("empty domain");
    return num / den;
}

Field2 apply_land_mask(const Field2& field, const Field2& mask, double threshold) {
    if (field.nlat != mask.nlat || field.nlon != mask.nlon)
        throw ConfigError("mask shape mismatch");
    Field2 out = field;
    for (std::size_t i = 0; i < out.v.size(); ++i)
        if (mask.v[i] < threshold) out.v[i] = std::numeric_limits<double>::quiet_NaN();
    return out;
}

} // namespace rrecon
