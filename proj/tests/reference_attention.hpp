#pragma once

// Brute-force attention reference for single-block, single-head models,
// computed in double precision straight from the model weights. Kept apart
// from the library so capture bugs cannot hide behind shared code.

#include <cmath>
#include <vector>

#include "hetcache/dit.hpp"
#include "hetcache/token_grid.hpp"

namespace hetest {

inline std::vector<double> dense_attention_matrix(const hetcache::DitModel& model,
                                                  const hetcache::TokenGrid& grid,
                                                  const hetcache::TimestepEmbedding& emb, int t) {
    const hetcache::DitConfig& cfg = model.config();
    const hetcache::DitWeights& w = model.weights();
    const int n = grid.token_count();
    const int d = cfg.channels;

    const float* t_mod = emb.at(t);
    const std::vector<float> phi = hetcache::DitModel::sinusoid_features(static_cast<double>(t), d);
    const hetcache::BlockWeights& blk = w.blocks.front();

    auto project = [&](const std::vector<float>& mat, const std::vector<float>& bias,
                       const std::vector<double>& x) {
        std::vector<double> y(static_cast<std::size_t>(d), 0.0);
        for (int r = 0; r < d; ++r) {
            double acc = bias[static_cast<std::size_t>(r)];
            for (int c = 0; c < d; ++c) acc += static_cast<double>(mat[static_cast<std::size_t>(r) * d + c]) * x[static_cast<std::size_t>(c)];
            y[static_cast<std::size_t>(r)] = acc;
        }
        return y;
    };

    std::vector<double> phi_d(phi.begin(), phi.end());
    std::vector<double> scale = project(blk.attn_scale_w, blk.attn_scale_b, phi_d);
    std::vector<double> shift = project(blk.attn_shift_w, blk.attn_shift_b, phi_d);
    for (int c = 0; c < d; ++c) {
        scale[static_cast<std::size_t>(c)] = hetcache::kAdaNormAmplitude * std::tanh(scale[static_cast<std::size_t>(c)]);
        shift[static_cast<std::size_t>(c)] = hetcache::kAdaNormAmplitude * std::tanh(shift[static_cast<std::size_t>(c)]);
    }

    std::vector<std::vector<double>> q(static_cast<std::size_t>(n)), k(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const float* x = grid.token(i);
        const std::vector<float> pos =
            hetcache::DitModel::sinusoid_features(static_cast<double>(i), d);
        std::vector<double> z(static_cast<std::size_t>(d));
        for (int c = 0; c < d; ++c) {
            z[static_cast<std::size_t>(c)] = static_cast<double>(t_mod[c]) * x[c] + pos[c];
        }
        double mean = 0.0;
        for (double v : z) mean += v;
        mean /= d;
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean);
        var /= d;
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(hetcache::kNormEpsilon));
        std::vector<double> h(static_cast<std::size_t>(d));
        for (int c = 0; c < d; ++c) {
            const double normed = (z[static_cast<std::size_t>(c)] - mean) * inv;
            h[static_cast<std::size_t>(c)] = normed * (1.0 + scale[static_cast<std::size_t>(c)]) + shift[static_cast<std::size_t>(c)];
        }
        q[static_cast<std::size_t>(i)] = project(blk.wq, blk.bq, h);
        k[static_cast<std::size_t>(i)] = project(blk.wk, blk.bk, h);
    }

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d / cfg.heads));
    std::vector<double> attn(static_cast<std::size_t>(n) * n, 0.0);
    for (int qi = 0; qi < n; ++qi) {
        std::vector<double> scores(static_cast<std::size_t>(n));
        double max_score = -1e300;
        for (int ki = 0; ki < n; ++ki) {
            double acc = 0.0;
            for (int c = 0; c < d; ++c) acc += q[static_cast<std::size_t>(qi)][static_cast<std::size_t>(c)] * k[static_cast<std::size_t>(ki)][static_cast<std::size_t>(c)];
            scores[static_cast<std::size_t>(ki)] = acc * inv_sqrt;
            max_score = std::max(max_score, scores[static_cast<std::size_t>(ki)]);
        }
        double denom = 0.0;
        for (int ki = 0; ki < n; ++ki) {
            scores[static_cast<std::size_t>(ki)] = std::exp(scores[static_cast<std::size_t>(ki)] - max_score);
            denom += scores[static_cast<std::size_t>(ki)];
        }
        for (int ki = 0; ki < n; ++ki) {
            attn[static_cast<std::size_t>(qi) * n + ki] = scores[static_cast<std::size_t>(ki)] / denom;
        }
    }
    return attn;
}

}  // namespace hetest
