#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hetcache/partition.hpp"
#include "hetcache/token_grid.hpp"

namespace hetcache {

// How the captured context-to-generative attention is aggregated.
enum class AttnAggregate { MeanAllBlocks, LastBlock };

// Model-family constants; part of the model definition rather than the
// configurable surface. The modulation projection uses a wider init than the
// other weights and a bounded amplitude, keeping every T_t coordinate inside
// [1 - amp, 1 + amp] and strictly away from zero.
inline constexpr float kWeightInitScale = 0.02f;
inline constexpr float kModulationProjScale = 0.25f;
inline constexpr float kModulationAmplitude = 0.05f;
inline constexpr float kAdaNormAmplitude = 0.1f;
inline constexpr float kNormEpsilon = 1e-5f;

struct DitConfig {
    int channels = 32;
    int heads = 4;
    int blocks = 4;
    int mlp_hidden = 64;
    std::uint64_t seed = 7;
    bool capture_attention = true;
    AttnAggregate aggregate = AttnAggregate::MeanAllBlocks;

    void validate() const;
};

// Per-timestep modulation vectors, one row per scheduler timestep t in
// [1, steps]. Fixed for the lifetime of a run.
struct TimestepEmbedding {
    int steps = 0;
    int channels = 0;
    std::vector<float> table;

    const float* at(int t) const;
};

// Aggregated softmax attention from context queries to generative keys,
// averaged over heads (and blocks, unless configured for last block only).
struct AttentionCapture {
    int context_count = 0;
    int generative_count = 0;
    std::vector<double> weights;  // row-major context_count x generative_count

    double at(int ctx_row, int gen_col) const {
        return weights[static_cast<std::size_t>(ctx_row) * generative_count + gen_col];
    }
    bool empty() const { return weights.empty(); }
};

// Raised when a forward pass produces a non-finite value.
struct NumericError : std::runtime_error {
    NumericError(const std::string& msg, int block) : std::runtime_error(msg), block_index(block) {}
    int block_index = -1;
    int step_index = -1;
};

struct ForwardResult {
    TokenGrid output;
    std::optional<AttentionCapture> attention;
};

struct BlockWeights {
    std::vector<float> attn_scale_w, attn_scale_b;
    std::vector<float> attn_shift_w, attn_shift_b;
    std::vector<float> mlp_scale_w, mlp_scale_b;
    std::vector<float> mlp_shift_w, mlp_shift_b;
    std::vector<float> wq, bq, wk, bk, wv, bv, wo, bo;
    std::vector<float> w1, b1, w2, b2;
};

struct DitWeights {
    std::vector<float> mod_w, mod_b;  // timestep modulation projection
    std::vector<BlockWeights> blocks;
    std::vector<float> head_w, head_b;
};

// A small deterministic diffusion transformer denoiser. Weights are drawn
// from a seeded Gaussian at construction and never change; forward passes
// over the same inputs are bitwise reproducible. A model can be shared
// across threads: forward passes hold no mutable state beyond the atomic
// call counter.
class DitModel {
public:
    explicit DitModel(const DitConfig& cfg);

    const DitConfig& config() const { return cfg_; }
    const DitWeights& weights() const { return weights_; }

    // Modulation table for a run of the given number of timesteps.
    TimestepEmbedding make_timestep_table(int steps) const;

    // Full-grid forward pass. With capture set (and capture enabled in the
    // config), also returns the aggregated context-to-generative attention
    // for the given partition.
    ForwardResult forward_full(const TokenGrid& grid, const TimestepEmbedding& emb, int t,
                               const TokenPartition& partition, bool capture) const;

    // Forward pass with attention restricted to the active token set. Active
    // indices must be sorted, unique and non-empty; tokens keep the
    // positional encoding of their grid location.
    TokenMatrix forward_subset(const TokenGrid& grid, const TimestepEmbedding& emb, int t,
                               const std::vector<int>& active) const;

    std::uint64_t forward_calls() const { return forward_calls_.load(); }
    void reset_forward_calls() const { forward_calls_.store(0); }

    // Flat parameter vector in a fixed order, for snapshots.
    std::vector<float> flatten_weights() const;
    void load_flat_weights(const std::vector<float>& flat);

    // Sinusoidal features of a scalar timestep, before the seeded projection.
    static std::vector<float> sinusoid_features(double value, int dim);

private:
    struct CaptureContext;

    TokenMatrix forward_tokens(const TokenGrid& grid, const TimestepEmbedding& emb, int t,
                               const std::vector<int>& active, CaptureContext* capture) const;

    DitConfig cfg_;
    DitWeights weights_;
    mutable std::atomic<std::uint64_t> forward_calls_{0};
};

// F_t = T_t (elementwise) x_t. The grid is unchanged; a modulated copy is returned.
TokenGrid modulated_input(const TokenGrid& grid, const TimestepEmbedding& emb, int t);

// Quadratic attention cost in token-pair units for a step that keeps
// ceil(keep_ratio * context) context tokens plus all margin and generative
// tokens active.
std::int64_t attention_cost(std::int64_t context, std::int64_t margin, std::int64_t generative,
                            double keep_ratio);

}  // namespace hetcache
