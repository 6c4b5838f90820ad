#include "rrecon/eof.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "rrecon/errors.hpp"

namespace rrecon {

std::vector<std::size_t> EofBasis::period_rows() const {
    std::vector<std::size_t> rows;
    for (std::size_t t = 0; t < times.size(); ++t)
        if (period.contains(times.stamps[t])) rows.push_back(t);
    return rows;
}

EofBasis eof_decompose(const GridField& std_anom, const ClimatologyPeriod& period, int n_modes,
                       bool sqrt_cos_weighting) {
    period.validate();
    const std::size_t np = std_anom.plane();

    std::vector<std::size_t> rows;
    for (std::size_t t = 0; t < std_anom.ntime(); ++t)
        if (period.contains(std_anom.times.stamps[t])) rows.push_back(t);
    const std::size_t nt = rows.size();
    if (nt == 0) throw ConfigError("no samples inside climatology period");
    if (n_modes < 1 || std::size_t(n_modes) > std::min(nt, np))
        throw ConfigError("n_modes exceeds data rank bound");

    // column scaling by sqrt(cos(lat))
    std::vector<double> scale(np, 1.0);
    if (sqrt_cos_weighting) {
        const AreaWeights aw = area_weights(std_anom.grid);
        for (std::size_t p = 0; p < np; ++p) scale[p] = std::sqrt(aw.w.v[p]);
    }

    // period column means (physical space)
    std::vector<double> mean(np, 0.0);
    for (const std::size_t t : rows) {
        const double* x = std_anom.values.data() + t * np;
        for (std::size_t p = 0; p < np; ++p) mean[p] += x[p];
    }
    for (std::size_t p = 0; p < np; ++p) mean[p] /= double(nt);

    Eigen::MatrixXd X(nt, np);
    double total_sq = 0.0;
    for (std::size_t r = 0; r < nt; ++r) {
        const double* x = std_anom.values.data() + rows[r] * np;
        for (std::size_t p = 0; p < np; ++p) {
            const double v = (x[p] - mean[p]) * scale[p];
            X(r, p) = v;
            total_sq += v * v;
        }
    }
    if (total_sq <= 0.0) throw NumericError("degenerate input: zero variance in climatology period");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const Eigen::MatrixXd& V = svd.matrixV();

    EofBasis basis;
    basis.grid = std_anom.grid;
    basis.times = std_anom.times;
    basis.n_modes = n_modes;
    basis.sqrt_cos_weighted = sqrt_cos_weighting;
    basis.period = period;
    basis.column_mean = mean;
    basis.singular_values.assign(sv.data(), sv.data() + sv.size());

    double denom = 0.0;
    for (double s : basis.singular_values) denom += s * s;
    basis.explained_variance_ratio.resize(n_modes);
    for (int m = 0; m < n_modes; ++m) basis.explained_variance_ratio[m] = sv[m] * sv[m] / denom;

    // deterministic sign: largest-|value| weighted-space entry positive
    std::vector<double> sign(n_modes, 1.0);
    for (int m = 0; m < n_modes; ++m) {
        int arg = 0;
        for (std::size_t p = 1; p < np; ++p)
            if (std::fabs(V(p, m)) > std::fabs(V(arg, m))) arg = static_cast<int>(p);
        if (V(arg, m) < 0.0) sign[m] = -1.0;
    }

    basis.modes.resize(std::size_t(n_modes) * np);
    for (int m = 0; m < n_modes; ++m)
        for (std::size_t p = 0; p < np; ++p)
            basis.modes[std::size_t(m) * np + p] =
                sign[m] * (scale[p] > 0.0 ? V(p, m) / scale[p] : 0.0);

    // PCs over the full range: centered, weighted projection onto V
    basis.pcs.resize(std_anom.ntime() * std::size_t(n_modes));
    for (std::size_t t = 0; t < std_anom.ntime(); ++t) {
        const double* x = std_anom.values.data() + t * np;
        for (int m = 0; m < n_modes; ++m) {
            double acc = 0.0;
            for (std::size_t p = 0; p < np; ++p)
                acc += (x[p] - mean[p]) * scale[p] * V(p, m);
            basis.pcs[t * n_modes + m] = sign[m] * acc;
        }
    }
    return basis;
}

} // namespace rrecon
