#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rrecon/grid.hpp"

namespace rrecon {

enum class Season { djf, jja, all };
std::string season_name(Season s);
Season parse_season(const std::string& s);
bool season_contains(Season s, int month);

double mae(std::span<const double> y, std::span<const double> yhat);

// Pearson correlation of the centered series; throws
// NumericError("undefined correlation") on a zero denominator.
double acc(std::span<const double> y, std::span<const double> yhat);

// Two-sided p-value from t = r*sqrt((n-2)/(1-r^2)) against Student-t(n-2).
double acc_pvalue(double r, std::size_t n);

// CE = 1 - sum((y-yhat)^2) / sum((y-ybar)^2) with ybar the verification
// climatology mean.
double ce(std::span<const double> y, std::span<const double> yhat, double reference_mean);

// Per-gridpoint deterministic skill over the seasonal monthly subsample.
struct SkillMap {
    std::string metric; // mae | acc | ce
    Season season = Season::all;
    Field2 values;                     // NaN at sea / undefined points
    std::optional<Field2> significant; // acc only: 1 where p < threshold
    std::size_t n_samples = 0;
};

struct SkillMapSet {
    SkillMap mae_map;
    SkillMap acc_map;
    SkillMap ce_map;
};

// Metrics per land gridpoint over the months matching the season. Sea
// points are never read. Throws when fewer than 3 seasonal samples exist.
SkillMapSet skill_maps(const GridField& obs, const GridField& pred, Season season,
                       const Field2* land_mask, double p_threshold = 0.05);

// Spatial median over defined points of a map.
double spatial_median(const Field2& map);

struct SkillSummary {
    // per metric: median across seeds of the per-seed spatial medians
    std::map<std::string, double> estimate;
    // per metric: (max - min)/2 of the per-seed medians
    std::map<std::string, double> uncertainty;
    std::map<std::string, std::vector<double>> seed_medians;
    std::size_t n_samples = 0;
};

SkillSummary summarize(const std::vector<SkillMapSet>& per_seed_maps);

// Element-wise full-period minus excluded-validation-period differences.
std::map<std::string, double> subperiod_compare(const SkillSummary& full,
                                                const SkillSummary& test_only);

} // namespace rrecon
