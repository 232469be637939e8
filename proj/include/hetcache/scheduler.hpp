#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "hetcache/dit.hpp"
#include "hetcache/partition.hpp"
#include "hetcache/regime.hpp"
#include "hetcache/report.hpp"
#include "hetcache/token_grid.hpp"

namespace hetcache {

struct SchedulerConfig {
    int steps = 50;
    double delta = 0.05;
    double full_multiplier = 1.5;
    double ema_gamma = 0.5;
    double r_ctx = 0.7;
    int k_clusters = 16;
    int kmeans_max_iter = 10;
    int margin_radius = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Mutable state threaded through a denoising run.
struct CacheState {
    std::optional<TokenGrid> output_cache;
    std::optional<AttentionCapture> attn_cache;
    double accumulated_drift = 0.0;
    std::optional<TokenGrid> prev_modulated;
};

// Relative L1 change of `current` against `reference`.
double rel_l1_distance(const TokenGrid& current, const TokenGrid& reference);

double accumulate_drift(double total, double step_distance);

// Reuse while drift stays at or under delta, partial up to
// full_multiplier * delta, full above; a missing cache forces full.
Regime decide_regime(double drift, const SchedulerConfig& cfg, bool cache_present);

// Elementwise (1 - gamma) * cache + gamma * fresh; each output value stays
// inside the interval spanned by its inputs.
TokenGrid ema_update(const TokenGrid& cache, const TokenGrid& fresh, double gamma);

// Deterministic first-order update size for timestep t of a `steps`-long run,
// decreasing linearly from 1/steps.
float step_size(int t, int steps);

struct StepOutcome {
    TokenGrid output;
    Regime regime = Regime::FullCompute;
    double step_distance = 0.0;
    double drift_before = 0.0;
    int active_tokens = 0;
    std::int64_t attention_units = 0;
    std::int64_t model_calls = 0;
};

// One denoising step: drift bookkeeping, regime decision, and cache update.
StepOutcome scheduler_step(CacheState& state, const TokenGrid& x, int t, const DitModel& model,
                           const TimestepEmbedding& emb, const TokenPartition& partition,
                           const SchedulerConfig& cfg);

struct DenoiseResult {
    TokenGrid latent;
    RunReport report;
};

// Raised when the model fails numerically mid-run; carries the trace so far.
struct RunAborted : std::runtime_error {
    RunAborted(const std::string& msg, int step, int block, RunReport partial)
        : std::runtime_error(msg), step_index(step), block_index(block),
          partial_report(std::move(partial)) {}
    int step_index = -1;
    int block_index = -1;
    RunReport partial_report;
};

// Cached denoising loop over timesteps steps..1.
DenoiseResult run_denoise(const DitModel& model, const TokenGrid& x_init, const EditMask& mask,
                          const SchedulerConfig& cfg);

// Plain loop over full forward passes; no cache, no scheduler.
DenoiseResult run_baseline(const DitModel& model, const TokenGrid& x_init, const EditMask& mask,
                           int steps);

}  // namespace hetcache
