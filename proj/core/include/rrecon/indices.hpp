#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rrecon/eof.hpp"
#include "rrecon/regimes.hpp"

namespace rrecon {

// Climatology-period moments of each raw projection, recorded by the
// normalization so forecast projections can reuse them.
struct NormMoments {
    std::vector<double> mean;
    std::vector<double> stddev; // population convention
};

// Dated series of k index values (k = 0 encodes the no-index baseline).
struct IndexSeries {
    TimeAxis dates;
    std::vector<std::string> names;
    std::vector<double> values; // time x k
    std::optional<NormMoments> norm;
    std::string note; // e.g. EOF sign convention for the NAO index

    int k() const { return static_cast<int>(names.size()); }
    double at(std::size_t t, int j) const { return values[t * names.size() + j]; }
    double& at(std::size_t t, int j) { return values[t * names.size() + j]; }
};

struct PerturbationSpec {
    double mare = 0.0;
    int n_realizations = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

// Cosine-weighted normalized inner product of a standardized anomaly field
// with a regime pattern: sum(f * p * cos(lat)) / sum(cos(lat)).
double project(std::span<const double> field, std::span<const double> pattern, const Field2& cos_w);

// Raw projections of every time step onto every regime pattern.
IndexSeries project_series(const GridField& std_anom, const RegimePatterns& patterns);

// I(t) = (P(t) - <P>) / std(P), moments over the climatology period only.
IndexSeries index_normalize(const IndexSeries& raw, const ClimatologyPeriod& period);

// First-EOF principal component, normalized over the climatology period.
IndexSeries nao_index(const EofBasis& basis);

// Calendar-month mean of a daily index series.
IndexSeries monthly_index(const IndexSeries& daily, bool allow_partial = false);

// MARE = <|f|> = sqrt(2/pi) * sigma  =>  sigma = mare * sqrt(pi/2)
double mare_to_sigma(double mare);

// I'(t) = (1 + f) I(t), f ~ N(0, sigma(mare)) i.i.d. per
// (time, index, realization); deterministic per seed.
std::vector<IndexSeries> perturb_indices(const IndexSeries& indices, const PerturbationSpec& spec);

// CSV: header "date,<name1>,...,<nameK>", ISO dates, one row per stamp.
void write_index_csv(const IndexSeries& s, const std::string& path);
IndexSeries read_index_csv(const std::string& path);

void write_norm_csv(const IndexSeries& s, const std::string& path);
NormMoments read_norm_csv(const std::string& path, std::vector<std::string>* names = nullptr);

} // namespace rrecon
