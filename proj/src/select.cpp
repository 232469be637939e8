#include "hetcache/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hetcache {

namespace {

double sq_dist(const float* p, const double* c, int dims) {
    double acc = 0.0;
    for (int i = 0; i < dims; ++i) {
        const double s = static_cast<double>(p[i]) - c[i];
        acc += s * s;
    }
    return acc;
}

std::vector<int> nearest_assignment(const TokenMatrix& points, const std::vector<double>& centroids,
                                    int clusters) {
    std::vector<int> out(static_cast<std::size_t>(points.rows));
    for (int p = 0; p < points.rows; ++p) {
        int best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int k = 0; k < clusters; ++k) {
            const double dist = sq_dist(points.row(p), centroids.data() + static_cast<std::size_t>(k) * points.cols, points.cols);
            if (dist < best_dist) {
                best_dist = dist;
                best = k;
            }
        }
        out[static_cast<std::size_t>(p)] = best;
    }
    return out;
}

}  // namespace

ClusterResult kmeans(const TokenMatrix& points, int clusters, std::uint64_t seed, int max_iter) {
    if (points.rows < 1) throw std::invalid_argument("kmeans: need at least one point");
    if (clusters < 1) throw std::invalid_argument("kmeans: need at least one cluster");
    if (max_iter < 1) max_iter = 1;

    const int n = points.rows;
    const int dims = points.cols;

    ClusterResult result;
    result.clusters = clusters;
    result.dims = dims;
    result.centroids.assign(static_cast<std::size_t>(clusters) * dims, 0.0);

    // farthest-point seeding from a seeded start
    const int start = static_cast<int>(seed % static_cast<std::uint64_t>(n));
    std::vector<double> min_dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    auto set_centroid = [&](int k, int point) {
        double* dst = result.centroids.data() + static_cast<std::size_t>(k) * dims;
        const float* src = points.row(point);
        for (int i = 0; i < dims; ++i) dst[i] = static_cast<double>(src[i]);
    };
    set_centroid(0, start);
    for (int k = 1; k < clusters; ++k) {
        const double* prev = result.centroids.data() + static_cast<std::size_t>(k - 1) * dims;
        int farthest = -1;
        double far_dist = -1.0;
        for (int p = 0; p < n; ++p) {
            min_dist[static_cast<std::size_t>(p)] =
                std::min(min_dist[static_cast<std::size_t>(p)], sq_dist(points.row(p), prev, dims));
            if (min_dist[static_cast<std::size_t>(p)] > far_dist) {
                far_dist = min_dist[static_cast<std::size_t>(p)];
                farthest = p;
            }
        }
        // when points run out (or coincide) this duplicates an existing
        // centroid; assignment ties resolve to the lower id, so the
        // duplicate cluster stays empty
        set_centroid(k, k <= n - 1 ? farthest : start);
    }

    std::vector<int> prev_assign = nearest_assignment(points, result.centroids, clusters);
    std::vector<double> sums(static_cast<std::size_t>(clusters) * dims);
    std::vector<int> counts(static_cast<std::size_t>(clusters));

    for (int iter = 0; iter < max_iter; ++iter) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int p = 0; p < n; ++p) {
            const int k = prev_assign[static_cast<std::size_t>(p)];
            counts[static_cast<std::size_t>(k)]++;
            double* dst = sums.data() + static_cast<std::size_t>(k) * dims;
            const float* src = points.row(p);
            for (int i = 0; i < dims; ++i) dst[i] += static_cast<double>(src[i]);
        }
        for (int k = 0; k < clusters; ++k) {
            if (counts[static_cast<std::size_t>(k)] == 0) continue;  // empty cluster keeps its centroid
            double* dst = result.centroids.data() + static_cast<std::size_t>(k) * dims;
            const double inv = 1.0 / counts[static_cast<std::size_t>(k)];
            const double* src = sums.data() + static_cast<std::size_t>(k) * dims;
            for (int i = 0; i < dims; ++i) dst[i] = src[i] * inv;
        }

        std::vector<int> cur = nearest_assignment(points, result.centroids, clusters);
        result.iterations_used = iter + 1;
        if (cur == prev_assign) {
            result.converged = true;
            break;
        }
        prev_assign = std::move(cur);
    }

    result.assignments = std::move(prev_assign);
    result.inertia = 0.0;
    for (int p = 0; p < n; ++p) {
        const int k = result.assignments[static_cast<std::size_t>(p)];
        result.inertia += sq_dist(points.row(p), result.centroid(k), dims);
    }
    return result;
}

std::vector<double> importance_scores(const AttentionCapture& attn) {
    if (attn.generative_count < 1) {
        throw std::invalid_argument("importance_scores: no generative tokens to score against");
    }
    std::vector<double> scores(static_cast<std::size_t>(attn.context_count), 0.0);
    const double inv = 1.0 / attn.generative_count;
    for (int i = 0; i < attn.context_count; ++i) {
        double acc = 0.0;
        const double* row = attn.weights.data() + static_cast<std::size_t>(i) * attn.generative_count;
        for (int j = 0; j < attn.generative_count; ++j) acc += row[j];
        scores[static_cast<std::size_t>(i)] = acc * inv;
    }
    return scores;
}

std::vector<int> select_representatives(const ClusterResult& clusters,
                                        const std::vector<double>& scores, double keep_ratio,
                                        const std::vector<int>& context_indices) {
    if (keep_ratio <= 0.0 || keep_ratio > 1.0) {
        throw std::invalid_argument("select_representatives: keep_ratio must be in (0, 1]");
    }
    if (scores.size() != context_indices.size() ||
        clusters.assignments.size() != context_indices.size()) {
        throw std::invalid_argument("select_representatives: scores/assignments misaligned with context indices");
    }

    std::vector<std::vector<int>> members(static_cast<std::size_t>(clusters.clusters));
    for (std::size_t p = 0; p < clusters.assignments.size(); ++p) {
        members[static_cast<std::size_t>(clusters.assignments[p])].push_back(static_cast<int>(p));
    }

    std::vector<int> kept;
    for (auto& cluster : members) {
        if (cluster.empty()) continue;
        std::sort(cluster.begin(), cluster.end(), [&](int a, int b) {
            if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
                return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
            }
            return context_indices[static_cast<std::size_t>(a)] < context_indices[static_cast<std::size_t>(b)];
        });
        const double want = keep_ratio * static_cast<double>(cluster.size());
        const std::size_t take = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(want - 1e-9)));
        for (std::size_t i = 0; i < take && i < cluster.size(); ++i) {
            kept.push_back(context_indices[static_cast<std::size_t>(cluster[i])]);
        }
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

}  // namespace hetcache
