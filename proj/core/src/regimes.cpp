#include "rrecon/regimes.hpp"

#include <algorithm>
#include <numeric>

#include "rrecon/errors.hpp"

namespace rrecon {

RegimePatterns cluster_mean_fields(const KMeansResult& km, const EofBasis& basis,
                                   const GridField& std_anom) {
    const std::vector<std::size_t> rows = basis.period_rows();
    if (km.labels.size() != rows.size())
        throw ConfigError("labels do not cover the climatology period");
    const std::size_t np = std_anom.plane();
    const int k = km.k;

    std::vector<double> sums(std::size_t(k) * np, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int c = km.labels[i];
        const double* x = std_anom.values.data() + rows[i] * np;
        double* s = sums.data() + std::size_t(c) * np;
        for (std::size_t p = 0; p < np; ++p) s[p] += x[p];
        ++counts[c];
    }
    for (int c = 0; c < k; ++c)
        if (counts[c] == 0) throw NumericError("empty cluster " + std::to_string(c));

    // order clusters by size descending, stable on the original index
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return counts[a] > counts[b]; });
    std::vector<int> rank(k);
    for (int r = 0; r < k; ++r) rank[order[r]] = r;

    RegimePatterns rp;
    rp.grid = std_anom.grid;
    rp.k = k;
    rp.patterns.resize(std::size_t(k) * np);
    rp.centroids.resize(std::size_t(k) * km.dim);
    rp.cluster_sizes.resize(k);
    for (int r = 0; r < k; ++r) {
        const int c = order[r];
        rp.cluster_sizes[r] = counts[c];
        for (std::size_t p = 0; p < np; ++p)
            rp.patterns[std::size_t(r) * np + p] = sums[std::size_t(c) * np + p] / double(counts[c]);
        for (int d = 0; d < km.dim; ++d)
            rp.centroids[std::size_t(r) * km.dim + d] = km.centroids[std::size_t(c) * km.dim + d];
        rp.names.push_back("R" + std::to_string(r + 1));
    }
    rp.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rp.labels[i] = rank[km.labels[i]];
    rp.label_times.kind = std_anom.times.kind;
    for (const std::size_t t : rows) rp.label_times.stamps.push_back(std_anom.times.stamps[t]);
    return rp;
}

RegimePatterns derive_regimes(const GridField& std_anom, const ClimatologyPeriod& period, int k,
                              int n_modes, const KMeansOptions& opt, bool sqrt_cos_weighting,
                              EofBasis* basis_out) {
    const EofBasis basis = eof_decompose(std_anom, period, n_modes, sqrt_cos_weighting);
    const std::vector<std::size_t> rows = basis.period_rows();
    std::vector<double> pts(rows.size() * std::size_t(n_modes));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int m = 0; m < n_modes; ++m) pts[i * n_modes + m] = basis.pc(rows[i], m);
    const KMeansResult km = kmeans(pts, rows.size(), n_modes, k, opt);
    RegimePatterns rp = cluster_mean_fields(km, basis, std_anom);
    if (basis_out) *basis_out = basis;
    return rp;
}

void rename_regimes(RegimePatterns& patterns, const std::vector<std::string>& names) {
    if (static_cast<int>(names.size()) != patterns.k)
        throw ConfigError("regime name count does not match k");
    patterns.names = names;
}

} // namespace rrecon
