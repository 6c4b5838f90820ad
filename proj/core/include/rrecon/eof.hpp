#pragma once

#include <vector>

#include "rrecon/grid.hpp"
#include "rrecon/preprocess.hpp"

namespace rrecon {

// EOF decomposition of daily standardized anomalies. Modes are fitted on
// the climatology-period subset; principal components are computed for the
// whole input range by projecting onto the fitted modes. With sqrt-cos
// weighting the spatial patterns are orthonormal under the
// cosine-of-latitude inner product <a,b> = sum(a*b*cos(lat)); otherwise
// under the plain Euclidean one.
struct EofBasis {
    Grid grid;
    TimeAxis times;                               // full input range
    int n_modes = 0;
    bool sqrt_cos_weighted = true;
    ClimatologyPeriod period;
    std::vector<double> modes;                    // n_modes x nlat x nlon, physical space
    std::vector<double> pcs;                      // ntime x n_modes
    std::vector<double> explained_variance_ratio; // n_modes, non-increasing
    std::vector<double> singular_values;          // all min(T,S) values from the fit
    std::vector<double> column_mean;              // period means, physical space

    double pc(std::size_t t, int mode) const { return pcs[t * n_modes + mode]; }
    std::span<const double> mode_span(int m) const {
        return {modes.data() + std::size_t(m) * grid.npoints(), grid.npoints()};
    }

    // rows of pcs that fall in the climatology period
    std::vector<std::size_t> period_rows() const;
};

EofBasis eof_decompose(const GridField& std_anom, const ClimatologyPeriod& period, int n_modes = 7,
                       bool sqrt_cos_weighting = true);

} // namespace rrecon
