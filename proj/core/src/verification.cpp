#include "rrecon/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "rrecon/errors.hpp"

namespace rrecon {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string season_name(Season s) {
    switch (s) {
        case Season::djf: return "djf";
        case Season::jja: return "jja";
        default: return "all";
    }
}

Season parse_season(const std::string& s) {
    if (s == "djf" || s == "DJF") return Season::djf;
    if (s == "jja" || s == "JJA") return Season::jja;
    if (s == "all") return Season::all;
    throw ConfigError("unknown season: " + s);
}

bool season_contains(Season s, int month) {
    switch (s) {
        case Season::djf: return month == 12 || month == 1 || month == 2;
        case Season::jja: return month >= 6 && month <= 8;
        default: return true;
    }
}

double mae(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw ConfigError("series length mismatch");
    if (y.empty()) throw ConfigError("empty series");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += std::fabs(y[i] - yhat[i]);
    return acc / double(y.size());
}

double acc(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw ConfigError("series length mismatch");
    const std::size_t n = y.size();
    if (n < 3) throw ConfigError("correlation needs at least 3 samples");
    double my = 0.0, mh = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        my += y[i];
        mh += yhat[i];
    }
    my /= double(n);
    mh /= double(n);
    double num = 0.0, dy = 0.0, dh = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = y[i] - my, b = yhat[i] - mh;
        num += a * b;
        dy += a * a;
        dh += b * b;
    }
    const double den = std::sqrt(dy) * std::sqrt(dh);
    if (!(den > 0.0)) throw NumericError("undefined correlation");
    return num / den;
}

double acc_pvalue(double r, std::size_t n) {
    if (n < 3) throw ConfigError("p-value needs at least 3 samples");
    if (std::fabs(r) > 1.0 + 1e-12) throw ConfigError("correlation outside [-1, 1]");
    r = std::clamp(r, -1.0, 1.0);
    if (std::fabs(r) >= 1.0) return 0.0;
    const double dof = double(n - 2);
    const double t = r * std::sqrt(dof / (1.0 - r * r));
    const boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

double ce(std::span<const double> y, std::span<const double> yhat, double reference_mean) {
    if (y.size() != yhat.size()) throw ConfigError("series length mismatch");
    if (y.empty()) throw ConfigError("empty series");
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - yhat[i];
        const double d = y[i] - reference_mean;
        err += e * e;
        ref += d * d;
    }
    if (!(ref > 0.0)) throw NumericError("zero reference variance");
    return 1.0 - err / ref;
}

SkillMapSet skill_maps(const GridField& obs, const GridField& pred, Season season,
                       const Field2* land_mask, double p_threshold) {
    if (obs.grid != pred.grid) throw ConfigError("obs/pred grid mismatch");
    if (obs.times.stamps != pred.times.stamps) throw ConfigError("obs/pred times mismatch");

    std::vector<std::size_t> sel;
    for (std::size_t t = 0; t < obs.ntime(); ++t)
        if (season_contains(season, obs.times.stamps[t].m)) sel.push_back(t);
    if (sel.size() < 3) throw ConfigError("fewer than 3 seasonal samples");

    const int nlat = obs.grid.nlat(), nlon = obs.grid.nlon();
    SkillMapSet set;
    for (SkillMap* m : {&set.mae_map, &set.acc_map, &set.ce_map}) {
        m->season = season;
        m->values = Field2(nlat, nlon, kNaN);
        m->n_samples = sel.size();
    }
    set.mae_map.metric = "mae";
    set.acc_map.metric = "acc";
    set.ce_map.metric = "ce";
    set.acc_map.significant = Field2(nlat, nlon, kNaN);

    std::vector<double> ys(sel.size()), hs(sel.size());
    for (int i = 0; i < nlat; ++i)
        for (int j = 0; j < nlon; ++j) {
            if (land_mask && land_mask->at(i, j) < kLandThreshold) continue; // sea never read
            for (std::size_t s = 0; s < sel.size(); ++s) {
                ys[s] = obs.at(sel[s], i, j);
                hs[s] = pred.at(sel[s], i, j);
            }
            set.mae_map.values.at(i, j) = mae(ys, hs);
            double ybar = 0.0;
            for (const double v : ys) ybar += v;
            ybar /= double(ys.size());
            try {
                const double r = acc(ys, hs);
                set.acc_map.values.at(i, j) = r;
                set.acc_map.significant->at(i, j) =
                    acc_pvalue(r, ys.size()) < p_threshold ? 1.0 : 0.0;
            } catch (const NumericError&) {
                // constant series at this point: acc stays undefined
            }
            try {
                set.ce_map.values.at(i, j) = ce(ys, hs, ybar);
            } catch (const NumericError&) {
            }
        }
    return set;
}

double spatial_median(const Field2& map) {
    std::vector<double> vals;
    vals.reserve(map.v.size());
    for (const double v : map.v)
        if (!std::isnan(v)) vals.push_back(v);
    if (vals.empty()) throw NumericError("empty domain");
    std::sort(vals.begin(), vals.end());
    const std::size_t n = vals.size();
    return n % 2 == 1 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
}

SkillSummary summarize(const std::vector<SkillMapSet>& per_seed_maps) {
    if (per_seed_maps.empty()) throw ConfigError("summarize needs at least one seed");
    SkillSummary s;
    s.n_samples = per_seed_maps.front().mae_map.n_samples;
    const auto pick = [](const SkillMapSet& set, const std::string& m) -> const SkillMap& {
        if (m == "mae") return set.mae_map;
        if (m == "acc") return set.acc_map;
        return set.ce_map;
    };
    for (const std::string metric : {"mae", "acc", "ce"}) {
        std::vector<double> med;
        for (const auto& set : per_seed_maps) med.push_back(spatial_median(pick(set, metric).values));
        std::vector<double> sorted = med;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        s.estimate[metric] = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        s.uncertainty[metric] = (sorted.back() - sorted.front()) / 2.0;
        s.seed_medians[metric] = std::move(med);
    }
    return s;
}

std::map<std::string, double> subperiod_compare(const SkillSummary& full,
                                                const SkillSummary& test_only) {
    std::map<std::string, double> diff;
    for (const auto& [metric, value] : full.estimate) {
        const auto it = test_only.estimate.find(metric);
        if (it == test_only.estimate.end()) throw ConfigError("metric mismatch: " + metric);
        diff[metric] = value - it->second;
    }
    if (diff.size() != test_only.estimate.size()) throw ConfigError("metric mismatch");
    return diff;
}

} // namespace rrecon
