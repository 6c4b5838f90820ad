#include "rrecon/kmeans.hpp"

#include <cmath>
#include <limits>

#include "rrecon/errors.hpp"
#include "rrecon/rng.hpp"

namespace rrecon {

namespace {

double sq_dist(const double* a, const double* b, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct Restart {
    std::vector<double> centroids;
    std::vector<int> labels;
    double inertia = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int repairs = 0;
    std::vector<double> trace;
};

void kmeanspp_init(const std::vector<double>& pts, std::size_t n, int dim, int k, Rng& rng,
                   std::vector<double>& centroids) {
    centroids.resize(std::size_t(k) * dim);
    const std::size_t first = rng.uniform_int(n);
    for (int d = 0; d < dim; ++d) centroids[d] = pts[first * dim + d];

    std::vector<double> d2(n);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < c; ++j)
                best = std::min(best, sq_dist(&pts[i * dim], &centroids[std::size_t(j) * dim], dim));
            d2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_int(n); // all points coincide with chosen centroids
        } else {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        }
        for (int d = 0; d < dim; ++d) centroids[std::size_t(c) * dim + d] = pts[pick * dim + d];
    }
}

Restart lloyd(const std::vector<double>& pts, std::size_t n, int dim, int k, Rng rng,
              const KMeansOptions& opt) {
    Restart r;
    kmeanspp_init(pts, n, dim, k, rng, r.centroids);
    r.labels.assign(n, 0);
    std::vector<double> sums(std::size_t(k) * dim);
    std::vector<std::size_t> counts(k);

    for (int iter = 0; iter < opt.max_iter; ++iter) {
        // assignment, ties to the lowest cluster index
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double bestd = sq_dist(&pts[i * dim], &r.centroids[0], dim);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(&pts[i * dim], &r.centroids[std::size_t(c) * dim], dim);
                if (d < bestd) {
                    bestd = d;
                    best = c;
                }
            }
            r.labels[i] = best;
            inertia += bestd;
        }
        r.trace.push_back(inertia);
        r.inertia = inertia;
        r.iterations = iter + 1;

        // update
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = r.labels[i];
            for (int d = 0; d < dim; ++d) sums[std::size_t(c) * dim + d] += pts[i * dim + d];
            ++counts[c];
        }

        // empty-cluster repair: the point farthest from its own centroid
        // seeds the empty cluster
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far_i = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d =
                    sq_dist(&pts[i * dim], &r.centroids[std::size_t(r.labels[i]) * dim], dim);
                if (d > far_d) {
                    far_d = d;
                    far_i = i;
                }
            }
            const int old = r.labels[far_i];
            for (int d = 0; d < dim; ++d) {
                sums[std::size_t(old) * dim + d] -= pts[far_i * dim + d];
                sums[std::size_t(c) * dim + d] += pts[far_i * dim + d];
            }
            --counts[old];
            ++counts[c];
            r.labels[far_i] = c;
            ++r.repairs;
        }

        double moved = 0.0;
        for (int c = 0; c < k; ++c) {
            double move = 0.0;
            for (int d = 0; d < dim; ++d) {
                const double nc = counts[c] > 0 ? sums[std::size_t(c) * dim + d] / double(counts[c])
                                                : r.centroids[std::size_t(c) * dim + d];
                const double delta = nc - r.centroids[std::size_t(c) * dim + d];
                move += delta * delta;
                r.centroids[std::size_t(c) * dim + d] = nc;
            }
            moved = std::max(moved, std::sqrt(move));
        }
        if (moved < opt.tol) break;
    }

    // final assignment so labels are a fixed point of the centroids
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double bestd = sq_dist(&pts[i * dim], &r.centroids[0], dim);
        for (int c = 1; c < k; ++c) {
            const double d = sq_dist(&pts[i * dim], &r.centroids[std::size_t(c) * dim], dim);
            if (d < bestd) {
                bestd = d;
                best = c;
            }
        }
        r.labels[i] = best;
        inertia += bestd;
    }
    r.trace.push_back(inertia);
    r.inertia = inertia;
    return r;
}

} // namespace

KMeansResult kmeans(const std::vector<double>& points, std::size_t n_points, int dim, int k,
                    const KMeansOptions& opt) {
    if (k < 1) throw ConfigError("k must be positive");
    if (n_points == 0 || points.size() != n_points * std::size_t(dim))
        throw ConfigError("point array does not match n_points x dim");
    if (std::size_t(k) > n_points) throw ConfigError("k exceeds number of points");

    const Rng master(opt.seed);
    KMeansResult best;
    best.k = k;
    best.dim = dim;
    best.inertia = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < std::max(1, opt.n_init); ++restart) {
        Restart r = lloyd(points, n_points, dim, k, master.substream(restart), opt);
        if (r.inertia < best.inertia) {
            best.centroids = std::move(r.centroids);
            best.labels = std::move(r.labels);
            best.inertia = r.inertia;
            best.best_restart = restart;
            best.iterations = r.iterations;
            best.inertia_trace = std::move(r.trace);
            best.empty_cluster_repairs = r.repairs;
        }
    }
    return best;
}

double partition_inertia(const std::vector<double>& points, std::size_t n_points, int dim,
                         const std::vector<int>& labels, int k) {
    std::vector<double> cen(std::size_t(k) * dim, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n_points; ++i) {
        for (int d = 0; d < dim; ++d) cen[std::size_t(labels[i]) * dim + d] += points[i * dim + d];
        ++cnt[labels[i]];
    }
    for (int c = 0; c < k; ++c)
        if (cnt[c] > 0)
            for (int d = 0; d < dim; ++d) cen[std::size_t(c) * dim + d] /= double(cnt[c]);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n_points; ++i)
        inertia += sq_dist(&points[i * dim], &cen[std::size_t(labels[i]) * dim], dim);
    return inertia;
}

} // namespace rrecon
