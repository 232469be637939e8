#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetcache/dit.hpp"
#include "hetcache/regime.hpp"
#include "hetcache/token_grid.hpp"

namespace hetcache {

struct StepTrace {
    int step_index = 0;  // position in the denoising loop, 0-based
    int timestep = 0;    // t value, counts down to 1
    Regime regime = Regime::FullCompute;
    double step_distance = 0.0;  // relative L1 change of the modulated input
    double drift_before = 0.0;   // accumulated drift at decision time
    int active_tokens = 0;
    std::int64_t attention_units = 0;  // squared active-token count; 0 on reuse
    std::int64_t model_calls = 0;
};

struct CostTotals {
    std::int64_t attention_units = 0;
    std::int64_t mlp_units = 0;
    std::int64_t model_calls = 0;

    std::int64_t total_units() const { return attention_units + mlp_units; }
};

struct Divergence {
    double l2 = 0.0;
    double psnr_db = 0.0;
    double ssim_score = 0.0;
};

struct RunReport {
    int schema_version = 1;
    nlohmann::json config = nlohmann::json::object();
    std::vector<StepTrace> steps;
    CostTotals totals;
    std::array<std::int64_t, 3> regime_counts{0, 0, 0};  // full, partial, reuse
    std::optional<Divergence> divergence;                // vs a designated baseline
    double wall_time_ms = 0.0;  // informational only, never serialized

    std::int64_t count(Regime r) const { return regime_counts[static_cast<std::size_t>(r)]; }
};

// Sums per-step analytic costs: attention units scale with blocks and heads,
// MLP units with the active token count. Reuse steps contribute nothing.
CostTotals analytic_cost(const std::vector<StepTrace>& steps, const DitConfig& model_cfg);

// Analytic cost of one full step over `total_tokens` tokens.
std::int64_t full_step_cost(const DitConfig& model_cfg, int total_tokens);

std::int64_t per_token_mlp_cost(const DitConfig& model_cfg);

struct ComparisonRecord {
    RunReport baseline;
    RunReport candidate;
    double speedup = 1.0;
    Divergence divergence;
    std::array<std::int64_t, 3> histogram_delta{0, 0, 0};
};

// Baseline-relative comparison; both runs must share the model section of
// their config snapshots and the latent shapes.
ComparisonRecord compare_runs(const RunReport& baseline, const TokenGrid& baseline_latent,
                              const RunReport& candidate, const TokenGrid& candidate_latent);

nlohmann::json dit_config_to_json(const DitConfig& cfg);
nlohmann::json report_to_json(const RunReport& report);
nlohmann::json comparison_to_json(const ComparisonRecord& record);

// step,regime,d_t,cumulative_cost rows for plotting.
std::string report_to_csv(const RunReport& report);

}  // namespace hetcache
