#include "rrecon/indices.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rrecon/errors.hpp"
#include "rrecon/rng.hpp"

namespace rrecon {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void PerturbationSpec::validate() const {
    if (mare < 0.0) throw ConfigError("mare must be non-negative");
    if (n_realizations < 1) throw ConfigError("n_realizations must be at least 1");
}

double project(std::span<const double> field, std::span<const double> pattern, const Field2& cos_w) {
    if (field.size() != pattern.size() || field.size() != cos_w.v.size())
        throw ConfigError("projection shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < field.size(); ++p) {
        num += field[p] * pattern[p] * cos_w.v[p];
        den += cos_w.v[p];
    }
    if (den <= 0.0) throw NumericError("empty domain");
    return num / den;
}

IndexSeries project_series(const GridField& std_anom, const RegimePatterns& patterns) {
    if (std_anom.grid != patterns.grid) throw ConfigError("grid mismatch in projection");
    const AreaWeights aw = area_weights(std_anom.grid);
    IndexSeries s;
    s.dates = std_anom.times;
    s.names = patterns.names;
    s.values.resize(std_anom.ntime() * std::size_t(patterns.k));
    for (std::size_t t = 0; t < std_anom.ntime(); ++t)
        for (int j = 0; j < patterns.k; ++j)
            s.at(t, j) = project(std_anom.plane_span(t), patterns.pattern_span(j), aw.w);
    return s;
}

IndexSeries index_normalize(const IndexSeries& raw, const ClimatologyPeriod& period) {
    period.validate();
    if (raw.dates.stamps.empty() || raw.dates.stamps.front() > period.start ||
        raw.dates.stamps.back() < period.end)
        throw ConfigError("series does not cover the climatology period");

    const int k = raw.k();
    std::vector<std::size_t> rows;
    for (std::size_t t = 0; t < raw.dates.size(); ++t)
        if (period.contains(raw.dates.stamps[t])) rows.push_back(t);

    NormMoments nm;
    nm.mean.assign(k, 0.0);
    nm.stddev.assign(k, 0.0);
    for (const std::size_t t : rows)
        for (int j = 0; j < k; ++j) nm.mean[j] += raw.at(t, j);
    for (int j = 0; j < k; ++j) nm.mean[j] /= double(rows.size());
    for (const std::size_t t : rows)
        for (int j = 0; j < k; ++j) {
            const double d = raw.at(t, j) - nm.mean[j];
            nm.stddev[j] += d * d;
        }
    for (int j = 0; j < k; ++j) {
        nm.stddev[j] = std::sqrt(nm.stddev[j] / double(rows.size()));
        if (!(nm.stddev[j] > 0.0))
            throw NumericError("zero std in projection " + raw.names[j]);
    }

    IndexSeries out = raw;
    for (std::size_t t = 0; t < raw.dates.size(); ++t)
        for (int j = 0; j < k; ++j) out.at(t, j) = (raw.at(t, j) - nm.mean[j]) / nm.stddev[j];
    out.norm = std::move(nm);
    return out;
}

IndexSeries nao_index(const EofBasis& basis) {
    if (basis.n_modes < 1) throw ConfigError("EOF basis has no modes");
    IndexSeries raw;
    raw.dates = basis.times;
    raw.names = {"NAO"};
    raw.values.resize(basis.times.size());
    for (std::size_t t = 0; t < basis.times.size(); ++t) raw.values[t] = basis.pc(t, 0);
    IndexSeries out = index_normalize(raw, basis.period);
    out.note = "sign: largest-|loading| gridpoint of EOF-1 positive";
    return out;
}

IndexSeries monthly_index(const IndexSeries& daily, bool allow_partial) {
    if (daily.dates.kind != TimeKind::daily) throw ConfigError("daily index series required");
    if (daily.dates.stamps.empty()) throw ConfigError("empty month");
    const int k = daily.k();

    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t t = 0; t < daily.dates.size(); ++t)
        groups[year_month(daily.dates.stamps[t]).index()].push_back(t);

    IndexSeries out;
    out.dates.kind = TimeKind::monthly;
    out.names = daily.names;
    out.norm = daily.norm;
    out.note = daily.note;
    for (const auto& [idx, members] : groups) {
        const YearMonth ym = YearMonth::from_index(idx);
        if (!allow_partial && members.size() != std::size_t(days_in_month(ym.y, ym.m)))
            throw ConfigError("incomplete month " + format_ym(ym));
        out.dates.stamps.push_back(Date{ym.y, ym.m, 1});
        for (int j = 0; j < k; ++j) {
            double acc = 0.0;
            for (const std::size_t t : members) acc += daily.at(t, j);
            out.values.push_back(acc / double(members.size()));
        }
    }
    return out;
}

double mare_to_sigma(double mare) {
    if (mare < 0.0) throw ConfigError("mare must be non-negative");
    return mare * std::sqrt(kPi / 2.0);
}

std::vector<IndexSeries> perturb_indices(const IndexSeries& indices, const PerturbationSpec& spec) {
    spec.validate();
    const double sigma = mare_to_sigma(spec.mare);
    const Rng master(spec.seed);
    std::vector<IndexSeries> out(spec.n_realizations, indices);
    for (int r = 0; r < spec.n_realizations; ++r) {
        Rng rng = master.substream(r);
        for (double& v : out[r].values) v *= 1.0 + rng.normal(0.0, sigma);
    }
    return out;
}

void write_index_csv(const IndexSeries& s, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError(FormatErrc::io_failure, "cannot open for write: " + path);
    os << "date";
    for (const auto& n : s.names) os << ',' << n;
    os << '\n';
    for (std::size_t t = 0; t < s.dates.size(); ++t) {
        os << (s.dates.kind == TimeKind::daily ? format_date(s.dates.stamps[t])
                                               : format_ym(year_month(s.dates.stamps[t])));
        for (int j = 0; j < s.k(); ++j) os << ',' << fmt(s.at(t, j));
        os << '\n';
    }
}

IndexSeries read_index_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError(FormatErrc::io_failure, "cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw FormatError(FormatErrc::bad_header, "empty csv: " + path);
    if (line.rfind("date", 0) != 0)
        throw FormatError(FormatErrc::bad_header, "index csv must start with a date column");

    IndexSeries s;
    {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        while (std::getline(ss, cell, ',')) s.names.push_back(cell);
    }
    bool kind_set = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        const bool monthly = cell.size() == 7;
        if (!kind_set) {
            s.dates.kind = monthly ? TimeKind::monthly : TimeKind::daily;
            kind_set = true;
        }
        if (monthly) {
            const YearMonth ym = parse_ym(cell);
            s.dates.stamps.push_back(Date{ym.y, ym.m, 1});
        } else {
            s.dates.stamps.push_back(parse_date(cell));
        }
        int got = 0;
        while (std::getline(ss, cell, ',')) {
            s.values.push_back(std::strtod(cell.c_str(), nullptr));
            ++got;
        }
        if (got != s.k())
            throw FormatError(FormatErrc::dimension_mismatch, "row width mismatch in " + path);
    }
    if (!s.dates.strictly_increasing())
        throw FormatError(FormatErrc::bad_header, "dates not strictly increasing in " + path);
    return s;
}

void write_norm_csv(const IndexSeries& s, const std::string& path) {
    if (!s.norm) throw ConfigError("index series carries no normalization metadata");
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError(FormatErrc::io_failure, "cannot open for write: " + path);
    os << "name,mean,std\n";
    for (int j = 0; j < s.k(); ++j)
        os << s.names[j] << ',' << fmt(s.norm->mean[j]) << ',' << fmt(s.norm->stddev[j]) << '\n';
}

NormMoments read_norm_csv(const std::string& path, std::vector<std::string>* names) {
    std::ifstream is(path);
    if (!is) throw FormatError(FormatErrc::io_failure, "cannot open: " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("name,mean,std", 0) != 0)
        throw FormatError(FormatErrc::bad_header, "bad norm csv header");
    NormMoments nm;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string name, mean, sd;
        std::getline(ss, name, ',');
        std::getline(ss, mean, ',');
        std::getline(ss, sd, ',');
        if (names) names->push_back(name);
        nm.mean.push_back(std::strtod(mean.c_str(), nullptr));
        nm.stddev.push_back(std::strtod(sd.c_str(), nullptr));
    }
    return nm;
}

} // namespace rrecon
