#include "hetcache/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "hetcache/select.hpp"

namespace hetcache {

void SchedulerConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("scheduler.steps must be >= 1");
    if (!(delta > 0.0)) throw std::invalid_argument("scheduler.delta must be > 0");
    if (!(full_multiplier >= 1.0)) throw std::invalid_argument("scheduler.full_multiplier must be >= 1");
    if (!(ema_gamma >= 0.0 && ema_gamma <= 1.0)) throw std::invalid_argument("scheduler.ema_gamma must be in [0, 1]");
    if (!(r_ctx > 0.0 && r_ctx <= 1.0)) throw std::invalid_argument("scheduler.r_ctx must be in (0, 1]");
    if (k_clusters < 1) throw std::invalid_argument("scheduler.k_clusters must be >= 1");
    if (kmeans_max_iter < 1) throw std::invalid_argument("scheduler.kmeans_max_iter must be >= 1");
    if (margin_radius < 0) throw std::invalid_argument("scheduler.margin_radius must be >= 0");
}

double rel_l1_distance(const TokenGrid& current, const TokenGrid& reference) {
    if (!current.same_shape(reference)) {
        throw std::invalid_argument("rel_l1_distance: shape mismatch");
    }
    const double ref_norm = l1_norm(reference);
    if (ref_norm == 0.0) {
        throw std::domain_error("rel_l1_distance: reference norm is zero");
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < current.data.size(); ++i) {
        diff += std::fabs(static_cast<double>(current.data[i]) - static_cast<double>(reference.data[i]));
    }
    return diff / ref_norm;
}

double accumulate_drift(double total, double step_distance) { return total + step_distance; }

Regime decide_regime(double drift, const SchedulerConfig& cfg, bool cache_present) {
    if (!cache_present) return Regime::FullCompute;
    if (drift <= cfg.delta) return Regime::Reuse;
    if (drift <= cfg.full_multiplier * cfg.delta) return Regime::PartialCompute;
    return Regime::FullCompute;
}

TokenGrid ema_update(const TokenGrid& cache, const TokenGrid& fresh, double gamma) {
    if (!cache.same_shape(fresh)) {
        throw std::invalid_argument("ema_update: shape mismatch");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw std::invalid_argument("ema_update: gamma must be in [0, 1]");
    }
    const float g = static_cast<float>(gamma);
    TokenGrid out = cache;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = std::lerp(cache.data[i], fresh.data[i], g);
    }
    return out;
}

float step_size(int t, int steps) {
    return static_cast<float>(static_cast<double>(t) /
                              (static_cast<double>(steps) * static_cast<double>(steps)));
}

namespace {

// Context tokens recomputed on a partial step. Clustering runs on the
// current latent features; scores come from the attention cached at the last
// full step. Without usable scores (attention capture disabled, or nothing
// generative to score against) ties fall back to token order.
std::vector<int> select_partial_context(const CacheState& state, const TokenGrid& x,
                                        const TokenPartition& partition, const SchedulerConfig& cfg,
                                        const DitConfig& model_cfg) {
    if (partition.context.empty()) return {};

    const bool scores_apply = !partition.generative.empty() && model_cfg.capture_attention;
    if (scores_apply && !state.attn_cache.has_value()) {
        throw std::logic_error("partial step reached without cached attention");
    }

    std::vector<double> scores;
    if (scores_apply && state.attn_cache->generative_count > 0 &&
        state.attn_cache->context_count == partition.context_count()) {
        scores = importance_scores(*state.attn_cache);
    } else {
        scores.assign(partition.context.size(), 0.0);
    }

    const TokenMatrix features = gather(x, partition.context);
    const ClusterResult clusters = kmeans(features, cfg.k_clusters, cfg.seed, cfg.kmeans_max_iter);
    return select_representatives(clusters, scores, cfg.r_ctx, partition.context);
}

std::vector<int> merge_active(const TokenPartition& partition, const std::vector<int>& selected) {
    std::vector<int> active;
    active.reserve(selected.size() + partition.margin.size() + partition.generative.size());
    active.insert(active.end(), selected.begin(), selected.end());
    active.insert(active.end(), partition.margin.begin(), partition.margin.end());
    active.insert(active.end(), partition.generative.begin(), partition.generative.end());
    std::sort(active.begin(), active.end());
    return active;
}

}  // namespace

StepOutcome scheduler_step(CacheState& state, const TokenGrid& x, int t, const DitModel& model,
                           const TimestepEmbedding& emb, const TokenPartition& partition,
                           const SchedulerConfig& cfg) {
    TokenGrid modulated = modulated_input(x, emb, t);

    double distance = 0.0;
    if (state.prev_modulated.has_value()) {
        const double ref_norm = l1_norm(*state.prev_modulated);
        if (ref_norm == 0.0) {
            // an all-zero reference carries no reuse evidence
            distance = l1_norm(modulated) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        } else {
            distance = rel_l1_distance(modulated, *state.prev_modulated);
        }
        state.accumulated_drift = accumulate_drift(state.accumulated_drift, distance);
    }
    state.prev_modulated = std::move(modulated);

    StepOutcome out;
    out.step_distance = distance;
    out.drift_before = state.accumulated_drift;
    out.regime = decide_regime(state.accumulated_drift, cfg, state.output_cache.has_value());

    const std::uint64_t calls_before = model.forward_calls();

    switch (out.regime) {
        case Regime::Reuse: {
            out.output = *state.output_cache;
            break;
        }
        case Regime::PartialCompute: {
            const std::vector<int> selected = select_partial_context(state, x, partition, cfg, model.config());
            const std::vector<int> active = merge_active(partition, selected);
            const TokenMatrix rows = model.forward_subset(x, emb, t, active);
            TokenGrid candidate = scatter(*state.output_cache, active, rows);
            state.output_cache = ema_update(*state.output_cache, candidate, cfg.ema_gamma);
            state.accumulated_drift = 0.0;
            out.active_tokens = static_cast<int>(active.size());
            out.attention_units = static_cast<std::int64_t>(active.size()) * static_cast<std::int64_t>(active.size());
            out.output = std::move(candidate);
            break;
        }
        case Regime::FullCompute: {
            ForwardResult res = model.forward_full(x, emb, t, partition, /*capture=*/true);
            state.output_cache = res.output;
            if (res.attention.has_value()) state.attn_cache = std::move(res.attention);
            state.accumulated_drift = 0.0;
            const std::int64_t total = partition.total_tokens;
            out.active_tokens = partition.total_tokens;
            out.attention_units = total * total;
            out.output = std::move(res.output);
            break;
        }
    }

    out.model_calls = static_cast<std::int64_t>(model.forward_calls() - calls_before);
    return out;
}

namespace {

nlohmann::json scheduler_config_json(const SchedulerConfig& cfg) {
    return {
        {"steps", cfg.steps},
        {"delta", cfg.delta},
        {"full_multiplier", cfg.full_multiplier},
        {"ema_gamma", cfg.ema_gamma},
        {"r_ctx", cfg.r_ctx},
        {"k_clusters", cfg.k_clusters},
        {"kmeans_max_iter", cfg.kmeans_max_iter},
        {"margin_radius", cfg.margin_radius},
        {"seed", cfg.seed},
    };
}

void apply_update(TokenGrid& x, const TokenGrid& output, int t, int steps) {
    const float eta = step_size(t, steps);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] -= eta * output.data[i];
}

void check_scene(const DitModel& model, const TokenGrid& x_init, const EditMask& mask) {
    if (x_init.channels != model.config().channels) {
        throw std::invalid_argument("latent channels do not match the model");
    }
    if (mask.frames != x_init.frames || mask.height != x_init.height || mask.width != x_init.width) {
        throw std::invalid_argument("mask extents do not match the latent grid");
    }
}

}  // namespace

DenoiseResult run_denoise(const DitModel& model, const TokenGrid& x_init, const EditMask& mask,
                          const SchedulerConfig& cfg) {
    cfg.validate();
    check_scene(model, x_init, mask);

    const TokenPartition partition = partition_tokens(mask, cfg.margin_radius);
    const TimestepEmbedding emb = model.make_timestep_table(cfg.steps);

    CacheState state;
    TokenGrid x = x_init;
    RunReport report;
    report.config["model"] = dit_config_to_json(model.config());
    report.config["scheduler"] = scheduler_config_json(cfg);

    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < cfg.steps; ++i) {
        const int t = cfg.steps - i;
        StepOutcome outcome;
        try {
            outcome = scheduler_step(state, x, t, model, emb, partition, cfg);
        } catch (const NumericError& e) {
            report.totals = analytic_cost(report.steps, model.config());
            throw RunAborted(std::string(e.what()) + " (step " + std::to_string(i) + ")", i,
                             e.block_index, std::move(report));
        }

        StepTrace trace;
        trace.step_index = i;
        trace.timestep = t;
        trace.regime = outcome.regime;
        trace.step_distance = outcome.step_distance;
        trace.drift_before = outcome.drift_before;
        trace.active_tokens = outcome.active_tokens;
        trace.attention_units = outcome.attention_units;
        trace.model_calls = outcome.model_calls;
        report.steps.push_back(trace);
        report.regime_counts[static_cast<std::size_t>(outcome.regime)]++;

        apply_update(x, outcome.output, t, cfg.steps);
    }
    const auto end = std::chrono::steady_clock::now();

    report.totals = analytic_cost(report.steps, model.config());
    report.wall_time_ms = std::chrono::duration<double, std::milli>(end - start).count();
    return {std::move(x), std::move(report)};
}

DenoiseResult run_baseline(const DitModel& model, const TokenGrid& x_init, const EditMask& mask,
                           int steps) {
    if (steps < 1) throw std::invalid_argument("run_baseline: steps must be >= 1");
    check_scene(model, x_init, mask);

    const TokenPartition partition = partition_tokens(mask, 0);
    const TimestepEmbedding emb = model.make_timestep_table(steps);

    TokenGrid x = x_init;
    RunReport report;
    report.config["model"] = dit_config_to_json(model.config());
    report.config["scheduler"] = {{"steps", steps}, {"mode", "baseline"}};

    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < steps; ++i) {
        const int t = steps - i;
        const std::uint64_t calls_before = model.forward_calls();
        ForwardResult res;
        try {
            res = model.forward_full(x, emb, t, partition, /*capture=*/false);
        } catch (const NumericError& e) {
            report.totals = analytic_cost(report.steps, model.config());
            throw RunAborted(std::string(e.what()) + " (step " + std::to_string(i) + ")", i,
                             e.block_index, std::move(report));
        }

        StepTrace trace;
        trace.step_index = i;
        trace.timestep = t;
        trace.regime = Regime::FullCompute;
        trace.active_tokens = partition.total_tokens;
        const std::int64_t total = partition.total_tokens;
        trace.attention_units = total * total;
        trace.model_calls = static_cast<std::int64_t>(model.forward_calls() - calls_before);
        report.steps.push_back(trace);
        report.regime_counts[static_cast<std::size_t>(Regime::FullCompute)]++;

        apply_update(x, res.output, t, steps);
    }
    const auto end = std::chrono::steady_clock::now();

    report.totals = analytic_cost(report.steps, model.config());
    report.wall_time_ms = std::chrono::duration<double, std::milli>(end - start).count();
    return {std::move(x), std::move(report)};
}

}  // namespace hetcache
