#include "hetcache/report.hpp"

#include <cinttypes>
#include <cstdio>
#include <stdexcept>

#include "hetcache/metrics.hpp"

namespace hetcache {

std::int64_t per_token_mlp_cost(const DitConfig& cfg) {
    return 2LL * cfg.channels * cfg.mlp_hidden * cfg.blocks;
}

CostTotals analytic_cost(const std::vector<StepTrace>& steps, const DitConfig& cfg) {
    CostTotals totals;
    const std::int64_t mlp_unit = per_token_mlp_cost(cfg);
    for (const StepTrace& s : steps) {
        totals.attention_units += s.attention_units * cfg.blocks * cfg.heads;
        totals.mlp_units += static_cast<std::int64_t>(s.active_tokens) * mlp_unit;
        totals.model_calls += s.model_calls;
    }
    return totals;
}

std::int64_t full_step_cost(const DitConfig& cfg, int total_tokens) {
    const std::int64_t n = total_tokens;
    return n * n * cfg.blocks * cfg.heads + n * per_token_mlp_cost(cfg);
}

ComparisonRecord compare_runs(const RunReport& baseline, const TokenGrid& baseline_latent,
                              const RunReport& candidate, const TokenGrid& candidate_latent) {
    if (baseline.config.value("model", nlohmann::json()) !=
        candidate.config.value("model", nlohmann::json())) {
        throw std::invalid_argument("compare_runs: model configs differ");
    }
    if (!baseline_latent.same_shape(candidate_latent)) {
        throw std::invalid_argument("compare_runs: latent shapes differ");
    }

    ComparisonRecord rec;
    rec.baseline = baseline;
    rec.candidate = candidate;
    rec.speedup = static_cast<double>(baseline.totals.total_units()) /
                  static_cast<double>(candidate.totals.total_units());
    rec.divergence.l2 = l2_distance(baseline_latent, candidate_latent);
    rec.divergence.psnr_db = psnr(baseline_latent, candidate_latent, 1.0);
    rec.divergence.ssim_score = ssim(baseline_latent, candidate_latent, 1.0);
    rec.candidate.divergence = rec.divergence;
    for (std::size_t i = 0; i < rec.histogram_delta.size(); ++i) {
        rec.histogram_delta[i] = candidate.regime_counts[i] - baseline.regime_counts[i];
    }
    return rec;
}

nlohmann::json dit_config_to_json(const DitConfig& cfg) {
    return {
        {"channels", cfg.channels},
        {"heads", cfg.heads},
        {"blocks", cfg.blocks},
        {"mlp_hidden", cfg.mlp_hidden},
        {"seed", cfg.seed},
        {"capture_attention", cfg.capture_attention},
        {"attn_aggregate", cfg.aggregate == AttnAggregate::MeanAllBlocks ? "mean_all_blocks" : "last_block"},
    };
}

namespace {

nlohmann::json divergence_to_json(const Divergence& d) {
    return {{"l2", d.l2}, {"psnr_db", d.psnr_db}, {"ssim", d.ssim_score}};
}

nlohmann::json totals_to_json(const CostTotals& t) {
    return {
        {"attention_units", t.attention_units},
        {"mlp_units", t.mlp_units},
        {"total_units", t.total_units()},
        {"model_calls", t.model_calls},
    };
}

nlohmann::json regimes_to_json(const std::array<std::int64_t, 3>& counts) {
    return {
        {"full", counts[0]},
        {"partial", counts[1]},
        {"reuse", counts[2]},
    };
}

}  // namespace

nlohmann::json report_to_json(const RunReport& report) {
    nlohmann::json steps = nlohmann::json::array();
    for (const StepTrace& s : report.steps) {
        steps.push_back({
            {"step", s.step_index},
            {"timestep", s.timestep},
            {"regime", regime_name(s.regime)},
            {"d_t", s.step_distance},
            {"drift_before", s.drift_before},
            {"active_tokens", s.active_tokens},
            {"attention_units", s.attention_units},
            {"model_calls", s.model_calls},
        });
    }
    nlohmann::json out = {
        {"schema_version", report.schema_version},
        {"config", report.config},
        {"steps", std::move(steps)},
        {"totals", totals_to_json(report.totals)},
        {"regimes", regimes_to_json(report.regime_counts)},
    };
    if (report.divergence.has_value()) {
        out["divergence"] = divergence_to_json(*report.divergence);
    }
    return out;
}

nlohmann::json comparison_to_json(const ComparisonRecord& record) {
    return {
        {"schema_version", record.baseline.schema_version},
        {"baseline", report_to_json(record.baseline)},
        {"candidate", report_to_json(record.candidate)},
        {"speedup", record.speedup},
        {"divergence", divergence_to_json(record.divergence)},
        {"regime_delta", regimes_to_json(record.histogram_delta)},
    };
}

std::string report_to_csv(const RunReport& report) {
    std::string out = "step,regime,d_t,cumulative_cost\n";
    char line[128];

    nlohmann::json cfg = report.config.value("model", nlohmann::json());
    DitConfig model_cfg;
    if (cfg.is_object()) {
        model_cfg.channels = cfg.value("channels", model_cfg.channels);
        model_cfg.heads = cfg.value("heads", model_cfg.heads);
        model_cfg.blocks = cfg.value("blocks", model_cfg.blocks);
        model_cfg.mlp_hidden = cfg.value("mlp_hidden", model_cfg.mlp_hidden);
    }
    const std::int64_t mlp_unit = per_token_mlp_cost(model_cfg);

    std::int64_t cumulative = 0;
    for (const StepTrace& s : report.steps) {
        cumulative += s.attention_units * model_cfg.blocks * model_cfg.heads +
                      static_cast<std::int64_t>(s.active_tokens) * mlp_unit;
        std::snprintf(line, sizeof(line), "%d,%s,%.17g,%" PRId64 "\n", s.step_index,
                      regime_name(s.regime), s.step_distance, cumulative);
        out += line;
    }
    return out;
}

}  // namespace hetcache
