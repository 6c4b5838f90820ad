#include "rrecon/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rrecon/errors.hpp"

namespace rrecon {

std::vector<double> default_quantile_levels() {
    std::vector<double> lv(101);
    for (int i = 0; i <= 100; ++i) lv[i] = i / 100.0;
    return lv;
}

namespace {

std::vector<double> auto_levels(std::size_t n_samples) {
    const std::size_t count = std::min<std::size_t>(101, n_samples);
    std::vector<double> lv(count);
    for (std::size_t i = 0; i < count; ++i) lv[i] = double(i) / double(count - 1);
    return lv;
}

} // namespace

double empirical_quantile(std::vector<double> sample, double level) {
    if (sample.empty()) throw ConfigError("empty sample");
    std::sort(sample.begin(), sample.end());
    const double pos = level * double(sample.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sample.size() - 1);
    const double frac = pos - double(lo);
    return sample[lo] + frac * (sample[hi] - sample[lo]);
}

QuantileMap eqm_fit(std::span<const double> hindcast, std::span<const double> reference,
                    const std::vector<double>& levels) {
    if (hindcast.size() < levels.size() || reference.size() < levels.size())
        throw ConfigError("insufficient samples for quantile fit");
    std::vector<double> hs(hindcast.begin(), hindcast.end());
    std::vector<double> rs(reference.begin(), reference.end());
    std::sort(hs.begin(), hs.end());
    std::sort(rs.begin(), rs.end());

    QuantileMap qm;
    qm.levels = levels;
    qm.hind.reserve(levels.size());
    qm.ref.reserve(levels.size());
    for (const double lv : levels) {
        const auto q = [lv](const std::vector<double>& sorted) {
            const double pos = lv * double(sorted.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
            const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
            return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
        };
        const double h = q(hs), r = q(rs);
        // merge duplicate hindcast knots, keeping the last (monotone) pair
        if (!qm.hind.empty() && h <= qm.hind.back()) {
            qm.ref.back() = std::max(qm.ref.back(), r);
            continue;
        }
        qm.hind.push_back(h);
        qm.ref.push_back(r);
    }
    return qm;
}

double eqm_apply(const QuantileMap& map, double x) {
    const auto& h = map.hind;
    const auto& r = map.ref;
    if (h.empty()) throw ConfigError("empty quantile map");
    if (h.size() == 1) return r[0] + (x - h[0]);
    if (x <= h.front()) return r.front() + (x - h.front()); // constant-offset extrapolation
    if (x >= h.back()) return r.back() + (x - h.back());
    const auto it = std::upper_bound(h.begin(), h.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - h.begin());
    const double t = (x - h[i - 1]) / (h[i] - h[i - 1]);
    return r[i - 1] + t * (r[i] - r[i - 1]);
}

EnsembleForecast eqm_correct(const EnsembleForecast& forecast, const GridField& reference,
                             const ClimatologyPeriod& hindcast_period, const EqmOptions& opt) {
    if (reference.grid != forecast.grid) throw ConfigError("reference grid mismatch");
    if (reference.times.kind != TimeKind::monthly) throw ConfigError("monthly reference required");
    const std::size_t np = forecast.plane();

    // verifying-month lookup into the reference series
    std::map<int, std::size_t> ref_row;
    for (std::size_t t = 0; t < reference.ntime(); ++t)
        ref_row[year_month(reference.times.stamps[t]).index()] = t;

    EnsembleForecast out = forecast;
    std::vector<double> hind_s, ref_s;
    for (int lead = 0; lead < forecast.n_leads; ++lead) {
        // hindcast inits per calendar verifying month
        std::map<int, std::vector<std::size_t>> by_month;
        for (std::size_t i = 0; i < forecast.n_inits(); ++i) {
            const YearMonth vm = forecast.verify_month(i, lead);
            const Date vd{vm.y, vm.m, 1};
            if (vd >= hindcast_period.start && vd <= hindcast_period.end)
                by_month[vm.m].push_back(i);
        }
        for (const auto& [month, inits] : by_month) {
            std::vector<std::size_t> rrows;
            for (const std::size_t i : inits) {
                const auto it = ref_row.find(forecast.verify_month(i, lead).index());
                if (it == ref_row.end())
                    throw ConfigError("reference does not cover hindcast verifying months");
                rrows.push_back(it->second);
            }
            for (std::size_t p = 0; p < np; ++p) {
                ref_s.clear();
                for (const std::size_t rr : rrows) ref_s.push_back(reference.values[rr * np + p]);
                if (opt.pool_members) {
                    hind_s.clear();
                    for (int m = 0; m < forecast.n_members; ++m)
                        for (const std::size_t i : inits) hind_s.push_back(forecast.field(m, lead, i)[p]);
                    const auto levels = opt.levels.empty()
                                            ? auto_levels(std::min(hind_s.size(), ref_s.size()))
                                            : opt.levels;
                    const QuantileMap qm = eqm_fit(hind_s, ref_s, levels);
                    for (int m = 0; m < forecast.n_members; ++m)
                        for (std::size_t i = 0; i < forecast.n_inits(); ++i) {
                            if (forecast.verify_month(i, lead).m != month) continue;
                            out.field(m, lead, i)[p] = eqm_apply(qm, forecast.field(m, lead, i)[p]);
                        }
                } else {
                    for (int m = 0; m < forecast.n_members; ++m) {
                        hind_s.clear();
                        for (const std::size_t i : inits) hind_s.push_back(forecast.field(m, lead, i)[p]);
                        const auto levels = opt.levels.empty()
                                                ? auto_levels(std::min(hind_s.size(), ref_s.size()))
                                                : opt.levels;
                        const QuantileMap qm = eqm_fit(hind_s, ref_s, levels);
                        for (std::size_t i = 0; i < forecast.n_inits(); ++i) {
                            if (forecast.verify_month(i, lead).m != month) continue;
                            out.field(m, lead, i)[p] = eqm_apply(qm, forecast.field(m, lead, i)[p]);
                        }
                    }
                }
            }
        }
    }
    return out;
}

EnsembleForecast forecast_monthly_anomalies(const EnsembleForecast& corrected,
                                            const CalendarClimatology& clim) {
    if (clim.grid != corrected.grid) throw ConfigError("climatology grid mismatch");
    const MonthlyClimatology mc = monthly_climatology(clim);
    const std::size_t np = corrected.plane();

    EnsembleForecast out = corrected;
    out.variable = corrected.variable + "_stdanom";
    for (int m = 0; m < corrected.n_members; ++m)
        for (int l = 0; l < corrected.n_leads; ++l)
            for (std::size_t i = 0; i < corrected.n_inits(); ++i) {
                const YearMonth vm = corrected.verify_month(i, l);
                const double* mu = mc.mean.data() + std::size_t(vm.m - 1) * np;
                const double s = mc.s[vm.m - 1];
                if (!(s > 0.0)) throw NumericError("missing month in climatology");
                auto dst = out.field(m, l, i);
                const auto src = corrected.field(m, l, i);
                for (std::size_t p = 0; p < np; ++p) dst[p] = (src[p] - mu[p]) / s;
            }
    return out;
}

EnsembleIndexSeries ensemble_index_projection(const EnsembleForecast& std_anom,
                                              const RegimePatterns& patterns,
                                              const NormMoments& moments) {
    if (std_anom.grid != patterns.grid) throw ConfigError("pattern grid mismatch");
    if (moments.mean.size() != std::size_t(patterns.k) ||
        moments.stddev.size() != std::size_t(patterns.k))
        throw ConfigError("normalization moments absent or mismatched");
    const AreaWeights aw = area_weights(std_anom.grid);

    EnsembleIndexSeries out;
    out.n_members = std_anom.n_members;
    out.n_leads = std_anom.n_leads;
    out.inits = std_anom.inits;
    out.names = patterns.names;
    out.values.resize(std::size_t(out.n_members) * out.n_leads * out.inits.size() * patterns.k);
    std::size_t idx = 0;
    for (int m = 0; m < out.n_members; ++m)
        for (int l = 0; l < out.n_leads; ++l)
            for (std::size_t i = 0; i < std_anom.n_inits(); ++i)
                for (int j = 0; j < patterns.k; ++j) {
                    const double p =
                        project(std_anom.field(m, l, i), patterns.pattern_span(j), aw.w);
                    out.values[idx++] = (p - moments.mean[j]) / moments.stddev[j];
                }
    return out;
}

EnsembleForecast ensemble_mean(const EnsembleForecast& forecast) {
    if (forecast.n_members < 1) throw ConfigError("ensemble has no members");
    EnsembleForecast out = forecast;
    out.n_members = 1;
    out.values.assign(std::size_t(out.n_leads) * out.n_inits() * out.plane(), 0.0);
    const std::size_t np = forecast.plane();
    for (int l = 0; l < forecast.n_leads; ++l)
        for (std::size_t i = 0; i < forecast.n_inits(); ++i) {
            auto dst = out.field(0, l, i);
            for (int m = 0; m < forecast.n_members; ++m) {
                const auto src = forecast.field(m, l, i);
                for (std::size_t p = 0; p < np; ++p) dst[p] += src[p];
            }
            for (std::size_t p = 0; p < np; ++p) dst[p] /= double(forecast.n_members);
        }
    return out;
}

} // namespace rrecon
