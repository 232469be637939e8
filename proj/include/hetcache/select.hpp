#pragma once

#include <cstdint>
#include <vector>

#include "hetcache/dit.hpp"
#include "hetcache/token_grid.hpp"

namespace hetcache {

struct ClusterResult {
    std::vector<int> assignments;   // cluster id per point
    std::vector<double> centroids;  // row-major clusters x dims
    int clusters = 0;
    int dims = 0;
    int iterations_used = 0;
    double inertia = 0.0;
    bool converged = false;

    const double* centroid(int k) const {
        return centroids.data() + static_cast<std::size_t>(k) * dims;
    }
};

// Lloyd iterations with greedy farthest-point seeding from a seeded start
// index. Deterministic: ties in seeding break toward the lower point index,
// assignment ties toward the lower cluster id. With fewer points than
// clusters the surplus clusters stay empty.
ClusterResult kmeans(const TokenMatrix& points, int clusters, std::uint64_t seed, int max_iter);

// Mean attention mass each context token sends toward the generative set.
std::vector<double> importance_scores(const AttentionCapture& attn);

// Keeps the max(1, ceil(keep_ratio * |cluster|)) highest scoring tokens per
// cluster; score ties break toward the lower global token index. Returns a
// sorted subset of context_indices.
std::vector<int> select_representatives(const ClusterResult& clusters,
                                        const std::vector<double>& scores, double keep_ratio,
                                        const std::vector<int>& context_indices);

}  // namespace hetcache
