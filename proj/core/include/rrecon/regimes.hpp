#pragma once

#include <string>
#include <vector>

#include "rrecon/eof.hpp"
#include "rrecon/kmeans.hpp"

namespace rrecon {

// k cluster-mean standardized anomaly fields over the climatology period,
// ordered by cluster size descending (R1 largest). Names default to
// R1..Rk; canonical regime names can be attached via configuration.
struct RegimePatterns {
    Grid grid;
    int k = 0;
    std::vector<double> patterns;   // k x nlat x nlon
    std::vector<double> centroids;  // k x n_modes, PC space
    std::vector<int> labels;        // per climatology day, reordered
    TimeAxis label_times;
    std::vector<std::string> names;
    std::vector<std::size_t> cluster_sizes;

    std::span<const double> pattern_span(int c) const {
        return {patterns.data() + std::size_t(c) * grid.npoints(), grid.npoints()};
    }
};

// Per-cluster time mean of the standardized anomalies restricted to the
// climatology period. Throws on empty clusters.
RegimePatterns cluster_mean_fields(const KMeansResult& km, const EofBasis& basis,
                                   const GridField& std_anom);

// EOF + k-means + cluster means in one step.
RegimePatterns derive_regimes(const GridField& std_anom, const ClimatologyPeriod& period, int k,
                              int n_modes, const KMeansOptions& opt, bool sqrt_cos_weighting = true,
                              EofBasis* basis_out = nullptr);

void rename_regimes(RegimePatterns& patterns, const std::vector<std::string>& names);

} // namespace rrecon
