#pragma once

#include <cstdint>
#include <vector>

namespace rrecon {

struct KMeansOptions {
    int n_init = 50;       // k-means++ restarts; best inertia wins, ties by restart index
    int max_iter = 500;
    double tol = 1e-8;     // max centroid movement declaring convergence
    std::uint64_t seed = 0;
};

struct KMeansResult {
    int k = 0;
    int dim = 0;
    std::vector<double> centroids; // k x dim
    std::vector<int> labels;
    double inertia = 0.0;
    int best_restart = -1;
    int iterations = 0;            // of the winning restart
    int empty_cluster_repairs = 0; // farthest-point reassignments
    std::vector<double> inertia_trace; // per Lloyd iteration of the winning restart
};

// Lloyd iterations with k-means++ initialization. Nearest-centroid ties go
// to the lowest cluster index; deterministic for a fixed seed.
KMeansResult kmeans(const std::vector<double>& points, std::size_t n_points, int dim, int k,
                    const KMeansOptions& opt = {});

// Within-cluster sum of squares of a labeling, with centroids recomputed
// from the labels. Canonical formula shared with the brute-force oracle so
// equal partitions give bit-identical inertia.
double partition_inertia(const std::vector<double>& points, std::size_t n_points, int dim,
                         const std::vector<int>& labels, int k);

} // namespace rrecon
