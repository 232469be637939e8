#include "hetcache/dit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hetcache/rng.hpp"

namespace hetcache {

namespace {

float gelu(float x) {
    const float c = 0.7978845608028654f;  // sqrt(2/pi)
    const float u = c * (x + 0.044715f * x * x * x);
    return 0.5f * x * (1.0f + std::tanh(u));
}

void layer_norm(const float* x, float* out, int d) {
    double mean = 0.0;
    for (int c = 0; c < d; ++c) mean += x[c];
    mean /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) {
        const double s = x[c] - mean;
        var += s * s;
    }
    var /= d;
    const float inv = 1.0f / std::sqrt(static_cast<float>(var) + kNormEpsilon);
    const float m = static_cast<float>(mean);
    for (int c = 0; c < d; ++c) out[c] = (x[c] - m) * inv;
}

// y = W x + b with W stored row-major [rows][cols].
void affine(const float* w, const float* b, const float* x, float* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const float* wr = w + static_cast<std::size_t>(r) * cols;
        float acc = b ? b[r] : 0.0f;
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

bool finite_range(const float* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(v[i])) return false;
    }
    return true;
}

}  // namespace

void DitConfig::validate() const {
    if (channels < 1) throw std::invalid_argument("model.channels must be >= 1");
    if (heads < 1) throw std::invalid_argument("model.heads must be >= 1");
    if (channels % heads != 0) throw std::invalid_argument("model.channels must be divisible by model.heads");
    if (blocks < 1) throw std::invalid_argument("model.blocks must be >= 1");
    if (mlp_hidden < 1) throw std::invalid_argument("model.mlp_hidden must be >= 1");
}

const float* TimestepEmbedding::at(int t) const {
    if (t < 1 || t > steps) {
        throw std::invalid_argument("unknown timestep " + std::to_string(t) + " (table covers 1.." +
                                    std::to_string(steps) + ")");
    }
    return table.data() + static_cast<std::size_t>(t - 1) * channels;
}

std::vector<float> DitModel::sinusoid_features(double value, int dim) {
    std::vector<float> out(static_cast<std::size_t>(dim), 0.0f);
    const int half = (dim + 1) / 2;
    for (int k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / half);
        const double arg = value * freq;
        out[static_cast<std::size_t>(2 * k)] = static_cast<float>(std::sin(arg));
        if (2 * k + 1 < dim) out[static_cast<std::size_t>(2 * k + 1)] = static_cast<float>(std::cos(arg));
    }
    return out;
}

DitModel::DitModel(const DitConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.channels;
    const int hidden = cfg_.mlp_hidden;
    GaussianRng rng(cfg_.seed);

    auto mat = [&rng](int rows, int cols, float scale) {
        return rng.gaussian_vector(static_cast<std::size_t>(rows) * cols, scale);
    };
    auto zeros = [](int n) { return std::vector<float>(static_cast<std::size_t>(n), 0.0f); };

    weights_.mod_w = mat(d, d, kModulationProjScale);
    weights_.mod_b = zeros(d);

    weights_.blocks.resize(static_cast<std::size_t>(cfg_.blocks));
    for (auto& blk : weights_.blocks) {
        blk.attn_scale_w = mat(d, d, kWeightInitScale);
        blk.attn_scale_b = zeros(d);
        blk.attn_shift_w = mat(d, d, kWeightInitScale);
        blk.attn_shift_b = zeros(d);
        blk.mlp_scale_w = mat(d, d, kWeightInitScale);
        blk.mlp_scale_b = zeros(d);
        blk.mlp_shift_w = mat(d, d, kWeightInitScale);
        blk.mlp_shift_b = zeros(d);
        blk.wq = mat(d, d, kWeightInitScale);
        blk.bq = zeros(d);
        blk.wk = mat(d, d, kWeightInitScale);
        blk.bk = zeros(d);
        blk.wv = mat(d, d, kWeightInitScale);
        blk.bv = zeros(d);
        blk.wo = mat(d, d, kWeightInitScale);
        blk.bo = zeros(d);
        blk.w1 = mat(hidden, d, kWeightInitScale);
        blk.b1 = zeros(hidden);
        blk.w2 = mat(d, hidden, kWeightInitScale);
        blk.b2 = zeros(d);
    }
    weights_.head_w = mat(d, d, kWeightInitScale);
    weights_.head_b = zeros(d);
}

TimestepEmbedding DitModel::make_timestep_table(int steps) const {
    if (steps < 1) throw std::invalid_argument("timestep table needs steps >= 1");
    const int d = cfg_.channels;
    TimestepEmbedding emb;
    emb.steps = steps;
    emb.channels = d;
    emb.table.resize(static_cast<std::size_t>(steps) * d);
    std::vector<float> arg(static_cast<std::size_t>(d));
    for (int t = 1; t <= steps; ++t) {
        const std::vector<float> phi = sinusoid_features(static_cast<double>(t), d);
        affine(weights_.mod_w.data(), weights_.mod_b.data(), phi.data(), arg.data(), d, d);
        float* row = emb.table.data() + static_cast<std::size_t>(t - 1) * d;
        for (int c = 0; c < d; ++c) row[c] = 1.0f + kModulationAmplitude * std::tanh(arg[c]);
    }
    return emb;
}

struct DitModel::CaptureContext {
    std::vector<int> ctx_rank;   // token -> row in the capture, -1 otherwise
    std::vector<int> gen_rank;   // token -> column in the capture, -1 otherwise
    std::vector<double> sums;    // context_count x generative_count
    int context_count = 0;
    int generative_count = 0;
    bool last_block_only = false;
    int blocks_aggregated = 0;
};

ForwardResult DitModel::forward_full(const TokenGrid& grid, const TimestepEmbedding& emb, int t,
                                     const TokenPartition& partition, bool capture) const {
    if (partition.total_tokens != grid.token_count()) {
        throw std::invalid_argument("forward_full: partition does not match grid extents");
    }
    const int total = grid.token_count();
    std::vector<int> all(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) all[static_cast<std::size_t>(i)] = i;

    CaptureContext ctx;
    CaptureContext* ctx_ptr = nullptr;
    const bool do_capture = capture && cfg_.capture_attention;
    if (do_capture) {
        ctx.context_count = partition.context_count();
        ctx.generative_count = partition.generative_count();
        ctx.ctx_rank.assign(static_cast<std::size_t>(total), -1);
        ctx.gen_rank.assign(static_cast<std::size_t>(total), -1);
        for (int r = 0; r < ctx.context_count; ++r) ctx.ctx_rank[static_cast<std::size_t>(partition.context[static_cast<std::size_t>(r)])] = r;
        for (int c = 0; c < ctx.generative_count; ++c) ctx.gen_rank[static_cast<std::size_t>(partition.generative[static_cast<std::size_t>(c)])] = c;
        ctx.sums.assign(static_cast<std::size_t>(ctx.context_count) * ctx.generative_count, 0.0);
        ctx.last_block_only = cfg_.aggregate == AttnAggregate::LastBlock;
        ctx_ptr = &ctx;
    }

    TokenMatrix rows = forward_tokens(grid, emb, t, all, ctx_ptr);

    ForwardResult result;
    result.output = grid;
    result.output.data = std::move(rows.data);

    if (do_capture) {
        AttentionCapture cap;
        cap.context_count = ctx.context_count;
        cap.generative_count = ctx.generative_count;
        cap.weights.resize(ctx.sums.size());
        const double denom = static_cast<double>(cfg_.heads) * std::max(1, ctx.blocks_aggregated);
        for (std::size_t i = 0; i < ctx.sums.size(); ++i) cap.weights[i] = ctx.sums[i] / denom;
        result.attention = std::move(cap);
    }
    return result;
}

TokenMatrix DitModel::forward_subset(const TokenGrid& grid, const TimestepEmbedding& emb, int t,
                                     const std::vector<int>& active) const {
    if (active.empty()) throw std::invalid_argument("forward_subset: active token set is empty");
    const int total = grid.token_count();
    for (std::size_t i = 0; i < active.size(); ++i) {
        if (active[i] < 0 || active[i] >= total) {
            throw std::invalid_argument("forward_subset: token index out of range");
        }
        if (i > 0 && active[i] <= active[i - 1]) {
            throw std::invalid_argument("forward_subset: active indices must be sorted and unique");
        }
    }
    return forward_tokens(grid, emb, t, active, nullptr);
}

TokenMatrix DitModel::forward_tokens(const TokenGrid& grid, const TimestepEmbedding& emb, int t,
                                     const std::vector<int>& active, CaptureContext* capture) const {
    forward_calls_.fetch_add(1);

    const int n = static_cast<int>(active.size());
    const int d = cfg_.channels;
    const int heads = cfg_.heads;
    const int head_dim = d / heads;
    const int hidden = cfg_.mlp_hidden;
    const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(head_dim));
    const float* t_mod = emb.at(t);

    const std::vector<float> phi = sinusoid_features(static_cast<double>(t), d);

    const std::size_t nd = static_cast<std::size_t>(n) * d;
    std::vector<float> z(nd), norm(nd), q(nd), k(nd), v(nd), attn_out(nd);
    std::vector<float> mlp_in(static_cast<std::size_t>(n) * hidden);
    std::vector<float> row_buf(static_cast<std::size_t>(d));
    std::vector<double> probs(static_cast<std::size_t>(n));
    std::vector<float> scores(static_cast<std::size_t>(n));
    std::vector<double> head_acc(static_cast<std::size_t>(head_dim));
    std::vector<float> ada(static_cast<std::size_t>(d) * 4);

    // input: timestep-modulated values plus the positional code of the
    // token's grid location
    for (int r = 0; r < n; ++r) {
        const int token = active[static_cast<std::size_t>(r)];
        const float* x = grid.token(token);
        const std::vector<float> pos = sinusoid_features(static_cast<double>(token), d);
        float* zr = z.data() + static_cast<std::size_t>(r) * d;
        for (int c = 0; c < d; ++c) zr[c] = t_mod[c] * x[c] + pos[c];
    }

    for (int l = 0; l < cfg_.blocks; ++l) {
        const BlockWeights& blk = weights_.blocks[static_cast<std::size_t>(l)];

        float* attn_scale = ada.data();
        float* attn_shift = ada.data() + d;
        float* mlp_scale = ada.data() + 2 * d;
        float* mlp_shift = ada.data() + 3 * d;
        affine(blk.attn_scale_w.data(), blk.attn_scale_b.data(), phi.data(), attn_scale, d, d);
        affine(blk.attn_shift_w.data(), blk.attn_shift_b.data(), phi.data(), attn_shift, d, d);
        affine(blk.mlp_scale_w.data(), blk.mlp_scale_b.data(), phi.data(), mlp_scale, d, d);
        affine(blk.mlp_shift_w.data(), blk.mlp_shift_b.data(), phi.data(), mlp_shift, d, d);
        for (int c = 0; c < d; ++c) {
            attn_scale[c] = kAdaNormAmplitude * std::tanh(attn_scale[c]);
            attn_shift[c] = kAdaNormAmplitude * std::tanh(attn_shift[c]);
            mlp_scale[c] = kAdaNormAmplitude * std::tanh(mlp_scale[c]);
            mlp_shift[c] = kAdaNormAmplitude * std::tanh(mlp_shift[c]);
        }

        // attention sublayer
        for (int r = 0; r < n; ++r) {
            const float* zr = z.data() + static_cast<std::size_t>(r) * d;
            layer_norm(zr, row_buf.data(), d);
            for (int c = 0; c < d; ++c) row_buf[c] = row_buf[c] * (1.0f + attn_scale[c]) + attn_shift[c];
            affine(blk.wq.data(), blk.bq.data(), row_buf.data(), q.data() + static_cast<std::size_t>(r) * d, d, d);
            affine(blk.wk.data(), blk.bk.data(), row_buf.data(), k.data() + static_cast<std::size_t>(r) * d, d, d);
            affine(blk.wv.data(), blk.bv.data(), row_buf.data(), v.data() + static_cast<std::size_t>(r) * d, d, d);
        }

        const bool capture_block =
            capture && (!capture->last_block_only || l == cfg_.blocks - 1);
        if (capture_block) ++capture->blocks_aggregated;

        for (int h = 0; h < heads; ++h) {
            const int off = h * head_dim;
            for (int qr = 0; qr < n; ++qr) {
                const float* qrow = q.data() + static_cast<std::size_t>(qr) * d + off;
                float max_score = -std::numeric_limits<float>::infinity();
                for (int kr = 0; kr < n; ++kr) {
                    const float* krow = k.data() + static_cast<std::size_t>(kr) * d + off;
                    float acc = 0.0f;
                    for (int c = 0; c < head_dim; ++c) acc += qrow[c] * krow[c];
                    acc *= inv_sqrt;
                    scores[static_cast<std::size_t>(kr)] = acc;
                    max_score = std::max(max_score, acc);
                }
                double denom = 0.0;
                for (int kr = 0; kr < n; ++kr) {
                    const double e = std::exp(static_cast<double>(scores[static_cast<std::size_t>(kr)] - max_score));
                    probs[static_cast<std::size_t>(kr)] = e;
                    denom += e;
                }
                const double inv_denom = 1.0 / denom;
                for (int kr = 0; kr < n; ++kr) probs[static_cast<std::size_t>(kr)] *= inv_denom;

                if (capture_block) {
                    double row_sum = 0.0;
                    for (int kr = 0; kr < n; ++kr) row_sum += probs[static_cast<std::size_t>(kr)];
                    if (std::fabs(row_sum - 1.0) > 1e-6) {
                        throw NumericError("attention row does not sum to 1", l);
                    }
                    const int crow = capture->ctx_rank[static_cast<std::size_t>(active[static_cast<std::size_t>(qr)])];
                    if (crow >= 0 && capture->generative_count > 0) {
                        double* dst = capture->sums.data() +
                                      static_cast<std::size_t>(crow) * capture->generative_count;
                        for (int kr = 0; kr < n; ++kr) {
                            const int gcol = capture->gen_rank[static_cast<std::size_t>(active[static_cast<std::size_t>(kr)])];
                            if (gcol >= 0) dst[gcol] += probs[static_cast<std::size_t>(kr)];
                        }
                    }
                }

                std::fill(head_acc.begin(), head_acc.end(), 0.0);
                for (int kr = 0; kr < n; ++kr) {
                    const double p = probs[static_cast<std::size_t>(kr)];
                    const float* vrow = v.data() + static_cast<std::size_t>(kr) * d + off;
                    for (int c = 0; c < head_dim; ++c) head_acc[static_cast<std::size_t>(c)] += p * vrow[c];
                }
                float* out = attn_out.data() + static_cast<std::size_t>(qr) * d + off;
                for (int c = 0; c < head_dim; ++c) out[c] = static_cast<float>(head_acc[static_cast<std::size_t>(c)]);
            }
        }

        for (int r = 0; r < n; ++r) {
            affine(blk.wo.data(), blk.bo.data(), attn_out.data() + static_cast<std::size_t>(r) * d,
                   row_buf.data(), d, d);
            float* zr = z.data() + static_cast<std::size_t>(r) * d;
            for (int c = 0; c < d; ++c) zr[c] += row_buf[c];
        }
        if (!finite_range(z.data(), nd)) {
            throw NumericError("non-finite value after attention in block " + std::to_string(l), l);
        }

        // mlp sublayer
        for (int r = 0; r < n; ++r) {
            const float* zr = z.data() + static_cast<std::size_t>(r) * d;
            layer_norm(zr, row_buf.data(), d);
            for (int c = 0; c < d; ++c) row_buf[c] = row_buf[c] * (1.0f + mlp_scale[c]) + mlp_shift[c];
            float* u = mlp_in.data() + static_cast<std::size_t>(r) * hidden;
            affine(blk.w1.data(), blk.b1.data(), row_buf.data(), u, hidden, d);
            for (int c = 0; c < hidden; ++c) u[c] = gelu(u[c]);
        }
        for (int r = 0; r < n; ++r) {
            affine(blk.w2.data(), blk.b2.data(), mlp_in.data() + static_cast<std::size_t>(r) * hidden,
                   row_buf.data(), d, hidden);
            float* zr = z.data() + static_cast<std::size_t>(r) * d;
            for (int c = 0; c < d; ++c) zr[c] += row_buf[c];
        }
        if (!finite_range(z.data(), nd)) {
            throw NumericError("non-finite value after mlp in block " + std::to_string(l), l);
        }
    }

    TokenMatrix out(n, d);
    for (int r = 0; r < n; ++r) {
        layer_norm(z.data() + static_cast<std::size_t>(r) * d, row_buf.data(), d);
        affine(weights_.head_w.data(), weights_.head_b.data(), row_buf.data(), out.row(r), d, d);
    }
    return out;
}

std::vector<float> DitModel::flatten_weights() const {
    std::vector<float> flat;
    auto append = [&flat](const std::vector<float>& v) { flat.insert(flat.end(), v.begin(), v.end()); };
    append(weights_.mod_w);
    append(weights_.mod_b);
    for (const auto& blk : weights_.blocks) {
        append(blk.attn_scale_w);
        append(blk.attn_scale_b);
        append(blk.attn_shift_w);
        append(blk.attn_shift_b);
        append(blk.mlp_scale_w);
        append(blk.mlp_scale_b);
        append(blk.mlp_shift_w);
        append(blk.mlp_shift_b);
        append(blk.wq);
        append(blk.bq);
        append(blk.wk);
        append(blk.bk);
        append(blk.wv);
        append(blk.bv);
        append(blk.wo);
        append(blk.bo);
        append(blk.w1);
        append(blk.b1);
        append(blk.w2);
        append(blk.b2);
    }
    append(weights_.head_w);
    append(weights_.head_b);
    return flat;
}

void DitModel::load_flat_weights(const std::vector<float>& flat) {
    std::size_t pos = 0;
    auto take = [&flat, &pos](std::vector<float>& dst) {
        if (pos + dst.size() > flat.size()) {
            throw std::invalid_argument("weight snapshot is too short for this model config");
        }
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                  flat.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
        pos += dst.size();
    };
    take(weights_.mod_w);
    take(weights_.mod_b);
    for (auto& blk : weights_.blocks) {
        take(blk.attn_scale_w);
        take(blk.attn_scale_b);
        take(blk.attn_shift_w);
        take(blk.attn_shift_b);
        take(blk.mlp_scale_w);
        take(blk.mlp_scale_b);
        take(blk.mlp_shift_w);
        take(blk.mlp_shift_b);
        take(blk.wq);
        take(blk.bq);
        take(blk.wk);
        take(blk.bk);
        take(blk.wv);
        take(blk.bv);
        take(blk.wo);
        take(blk.bo);
        take(blk.w1);
        take(blk.b1);
        take(blk.w2);
        take(blk.b2);
    }
    take(weights_.head_w);
    take(weights_.head_b);
    if (pos != flat.size()) {
        throw std::invalid_argument("weight snapshot is too long for this model config");
    }
}

TokenGrid modulated_input(const TokenGrid& grid, const TimestepEmbedding& emb, int t) {
    if (emb.channels != grid.channels) {
        throw std::invalid_argument("modulated_input: embedding width does not match grid channels");
    }
    const float* mod = emb.at(t);
    TokenGrid out = grid;
    const int total = grid.token_count();
    for (int i = 0; i < total; ++i) {
        float* tok = out.token(i);
        for (int c = 0; c < grid.channels; ++c) tok[c] *= mod[c];
    }
    return out;
}

std::int64_t attention_cost(std::int64_t context, std::int64_t margin, std::int64_t generative,
                            double keep_ratio) {
    // epsilon guard so exact products like 0.7 * 100 do not round up
    const double kept_real = keep_ratio * static_cast<double>(context);
    const std::int64_t kept = context <= 0
                                  ? 0
                                  : static_cast<std::int64_t>(std::ceil(kept_real - 1e-9));
    const std::int64_t active = kept + margin + generative;
    return active * active;
}

}  // namespace hetcache
