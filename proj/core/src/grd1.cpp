#include "rrecon/grd1.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "rrecon/errors.hpp"

namespace rrecon {

namespace {

using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "GRD1 I/O assumes a little-endian host");

bool contiguous_times(const TimeAxis& ax) {
    if (ax.kind == TimeKind::daily) {
        for (std::size_t i = 1; i < ax.stamps.size(); ++i)
            if (to_serial(ax.stamps[i]) != to_serial(ax.stamps[i - 1]) + 1) return false;
        return true;
    }
    for (std::size_t i = 1; i < ax.stamps.size(); ++i) {
        if (year_month(ax.stamps[i]).index() != year_month(ax.stamps[i - 1]).index() + 1 ||
            ax.stamps[i].d != 1)
            return false;
    }
    return !ax.stamps.empty() && ax.stamps[0].d == 1;
}

std::string stamp_string(TimeKind kind, const Date& d) {
    return kind == TimeKind::daily ? format_date(d) : format_ym(year_month(d));
}

Date stamp_parse(TimeKind kind, const std::string& s) {
    if (kind == TimeKind::daily) return parse_date(s);
    const YearMonth ym = parse_ym(s);
    return Date{ym.y, ym.m, 1};
}

ordered_json axis_json(const std::vector<double>& ax) {
    return ordered_json{{"start", ax.front()}, {"step", ax.size() > 1 ? ax[1] - ax[0] : 1.0},
                        {"count", ax.size()}};
}

std::vector<double> axis_from_json(const ordered_json& j, const char* name) {
    if (!j.contains("start") || !j.contains("step") || !j.contains("count"))
        throw FormatError(FormatErrc::bad_header, std::string("incomplete ") + name + " axis");
    const double start = j["start"].get<double>();
    const double step = j["step"].get<double>();
    const std::int64_t count = j["count"].get<std::int64_t>();
    if (count <= 0 || step == 0.0)
        throw FormatError(FormatErrc::dimension_mismatch, std::string("bad ") + name + " axis");
    std::vector<double> ax(count);
    for (std::int64_t i = 0; i < count; ++i) ax[i] = start + step * i;
    return ax;
}

} // namespace

void write_grid_file(const GridField& field, const std::string& path) {
    field.validate();
    bool missing = false;
    for (double v : field.values)
        if (std::isnan(v)) {
            missing = true;
            break;
        }

    ordered_json h;
    h["magic"] = "GRD1";
    h["variable"] = field.variable;
    h["units"] = field.units;
    ordered_json t;
    t["kind"] = field.times.kind == TimeKind::daily ? "daily" : "monthly";
    if (contiguous_times(field.times)) {
        t["start"] = stamp_string(field.times.kind, field.times.stamps.front());
        t["count"] = field.times.size();
    } else {
        ordered_json list = ordered_json::array();
        for (const Date& d : field.times.stamps) list.push_back(stamp_string(field.times.kind, d));
        t["list"] = std::move(list);
    }
    h["time"] = std::move(t);
    h["lat"] = axis_json(field.grid.lats);
    h["lon"] = axis_json(field.grid.lons);
    h["dtype"] = "f32le";
    h["missing"] = missing;
    h["lat_order"] = "ascending";
    h["domain"] = field.grid.domain;

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError(FormatErrc::io_failure, "cannot open for write: " + path);
    os << h.dump() << '\n';
    std::vector<float> buf(field.values.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(field.values[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!os) throw FormatError(FormatErrc::io_failure, "write failed: " + path);
}

GridField read_grid_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(FormatErrc::io_failure, "cannot open: " + path);
    std::string header;
    if (!std::getline(is, header))
        throw FormatError(FormatErrc::bad_header, "missing header line: " + path);

    ordered_json h;
    try {
        h = ordered_json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatErrc::bad_header, "unparsable header: " + std::string(e.what()));
    }

    const std::string magic = h.value("magic", "");
    if (magic != "GRD1") {
        if (magic.rfind("GRD", 0) == 0)
            throw FormatError(FormatErrc::unsupported_version, "unsupported format version: " + magic);
        throw FormatError(FormatErrc::bad_magic, "bad magic: " + magic);
    }
    if (h.value("dtype", "") != "f32le")
        throw FormatError(FormatErrc::unsupported_version, "unsupported dtype: " + h.value("dtype", ""));

    GridField f;
    f.variable = h.value("variable", "");
    f.units = h.value("units", "");
    f.has_missing = h.value("missing", false);

    const auto& tj = h.at("time");
    const std::string kind = tj.value("kind", "");
    if (kind != "daily" && kind != "monthly")
        throw FormatError(FormatErrc::bad_header, "unknown time kind: " + kind);
    f.times.kind = kind == "daily" ? TimeKind::daily : TimeKind::monthly;
    if (tj.contains("list")) {
        for (const auto& s : tj["list"]) f.times.stamps.push_back(stamp_parse(f.times.kind, s));
    } else {
        const Date start = stamp_parse(f.times.kind, tj.at("start").get<std::string>());
        const std::int64_t count = tj.at("count").get<std::int64_t>();
        if (count <= 0) throw FormatError(FormatErrc::dimension_mismatch, "non-positive time count");
        if (f.times.kind == TimeKind::daily) {
            for (std::int64_t i = 0; i < count; ++i) f.times.stamps.push_back(add_days(start, i));
        } else {
            const int base = year_month(start).index();
            for (std::int64_t i = 0; i < count; ++i) {
                const YearMonth ym = YearMonth::from_index(base + static_cast<int>(i));
                f.times.stamps.push_back(Date{ym.y, ym.m, 1});
            }
        }
    }

    f.grid.lats = axis_from_json(h.at("lat"), "lat");
    f.grid.lons = axis_from_json(h.at("lon"), "lon");
    f.grid.domain = h.value("domain", "custom");

    // normalize descending latitudes (negative step and/or lat_order flag)
    bool flip = false;
    if (f.grid.lats.size() > 1 && f.grid.lats[1] < f.grid.lats[0]) {
        flip = true;
        std::reverse(f.grid.lats.begin(), f.grid.lats.end());
    }
    f.source_lat_descending = flip || h.value("lat_order", "ascending") == "descending";

    const std::size_t n = f.times.size() * f.grid.npoints();
    std::vector<float> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (static_cast<std::size_t>(is.gcount()) != n * sizeof(float))
        throw FormatError(FormatErrc::truncated_payload, "truncated payload: " + path);
    char extra;
    if (is.read(&extra, 1))
        throw FormatError(FormatErrc::dimension_mismatch, "payload exceeds declared dimensions: " + path);

    f.values.resize(n);
    const int nlat = f.grid.nlat(), nlon = f.grid.nlon();
    for (std::size_t t = 0; t < f.times.size(); ++t)
        for (int i = 0; i < nlat; ++i) {
            const int src_i = flip ? nlat - 1 - i : i;
            for (int j = 0; j < nlon; ++j)
                f.at(t, i, j) = static_cast<double>(buf[(t * nlat + src_i) * nlon + j]);
        }

    f.validate();
    return f;
}

void write_layer_file(const Field2& layer, const Grid& grid, const std::string& variable,
                      const std::string& units, const std::string& path) {
    GridField f = GridField::make(grid, TimeAxis{TimeKind::daily, {Date{2000, 1, 1}}}, variable, units);
    std::copy(layer.v.begin(), layer.v.end(), f.values.begin());
    f.has_missing = true; // layers may carry NaN-masked cells
    write_grid_file(f, path);
}

Field2 read_layer_file(const std::string& path, Grid* grid_out) {
    const GridField f = read_grid_file(path);
    if (f.ntime() != 1)
        throw FormatError(FormatErrc::dimension_mismatch, "expected single-layer file: " + path);
    if (grid_out) *grid_out = f.grid;
    return f.plane_field(0);
}

std::string file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(FormatErrc::io_failure, "cannot open: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
        const std::streamsize n = is.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (!is) break;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

} // namespace rrecon
