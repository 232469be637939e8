#include "hetcache/driver.hpp"

#include <fstream>

#include "hetcache/dump.hpp"
#include "hetcache/scene.hpp"

namespace hetcache {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << text;
}

std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

DenoiseResult run_reference(const DitModel& model, const TokenGrid& latents, const EditMask& mask,
                            const RunConfig& cfg, BaselineMode mode) {
    if (mode == BaselineMode::Loop) {
        return run_baseline(model, latents, mask, cfg.scheduler.steps);
    }
    SchedulerConfig forced = cfg.scheduler;
    forced.delta = 1e-12;  // below any observed per-step distance
    forced.r_ctx = 1.0;
    return run_denoise(model, latents, mask, forced);
}

}  // namespace

RunArtifacts drive_run(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    const DitModel model(cfg.model);
    const TokenGrid latents = build_scene_latents(cfg.scene, cfg.model.channels);
    const EditMask mask = build_scene_mask(cfg.scene);

    RunArtifacts art;
    art.result = run_denoise(model, latents, mask, cfg.scheduler);
    art.result.report.config = run_config_to_json(cfg);

    art.report_path = out_dir / "report.json";
    write_text(art.report_path, json_text(report_to_json(art.result.report)));
    art.csv_path = out_dir / "trace.csv";
    write_text(art.csv_path, report_to_csv(art.result.report));

    if (cfg.output.dump_latent) {
        art.latent_path = out_dir / "latent.htcl";
        write_grid(art.latent_path, art.result.latent);
    }
    if (cfg.output.dump_weights) {
        art.weights_path = out_dir / "weights.htcl";
        write_weights(art.weights_path, model);
    }
    return art;
}

CompareArtifacts drive_compare(const RunConfig& cfg, BaselineMode mode,
                               const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    const DitModel model(cfg.model);
    const TokenGrid latents = build_scene_latents(cfg.scene, cfg.model.channels);
    const EditMask mask = build_scene_mask(cfg.scene);

    DenoiseResult base = run_reference(model, latents, mask, cfg, mode);
    base.report.config["scene"] = run_config_to_json(cfg)["scene"];

    DenoiseResult cand = run_denoise(model, latents, mask, cfg.scheduler);
    cand.report.config = run_config_to_json(cfg);

    CompareArtifacts art;
    art.record = compare_runs(base.report, base.latent, cand.report, cand.latent);
    art.record_path = out_dir / "comparison.json";
    write_text(art.record_path, json_text(comparison_to_json(art.record)));
    return art;
}

SweepArtifacts drive_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                           const std::filesystem::path& out_dir) {
    if (values.empty()) throw std::invalid_argument("sweep needs a non-empty axis list");
    std::filesystem::create_directories(out_dir);

    const DitModel model(cfg.model);
    const TokenGrid latents = build_scene_latents(cfg.scene, cfg.model.channels);
    const EditMask mask = build_scene_mask(cfg.scene);

    // identical reference for every grid point
    DenoiseResult base = run_baseline(model, latents, mask, cfg.scheduler.steps);
    base.report.config["scene"] = run_config_to_json(cfg)["scene"];

    SweepArtifacts art;
    art.values = values;

    nlohmann::json json_records = nlohmann::json::array();
    std::string csv =
        "axis,value,speedup,l2,psnr_db,ssim,total_units,baseline_units,full,partial,reuse\n";
    const char* axis_name = axis == SweepAxis::Delta      ? "delta"
                            : axis == SweepAxis::KeepRatio ? "r_ctx"
                                                           : "k_clusters";

    for (const double value : values) {
        RunConfig point = cfg;
        switch (axis) {
            case SweepAxis::Delta:
                point.scheduler.delta = value;
                break;
            case SweepAxis::KeepRatio:
                point.scheduler.r_ctx = value;
                break;
            case SweepAxis::Clusters:
                point.scheduler.k_clusters = static_cast<int>(value);
                break;
        }
        point.scheduler.validate();

        DenoiseResult cand = run_denoise(model, latents, mask, point.scheduler);
        cand.report.config = run_config_to_json(point);

        ComparisonRecord rec = compare_runs(base.report, base.latent, cand.report, cand.latent);

        nlohmann::json entry = comparison_to_json(rec);
        entry["axis"] = axis_name;
        entry["value"] = value;
        json_records.push_back(std::move(entry));

        char line[256];
        std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%lld,%lld,%lld,%lld,%lld\n",
                      axis_name, value, rec.speedup, rec.divergence.l2, rec.divergence.psnr_db,
                      rec.divergence.ssim_score,
                      static_cast<long long>(rec.candidate.totals.total_units()),
                      static_cast<long long>(rec.baseline.totals.total_units()),
                      static_cast<long long>(rec.candidate.count(Regime::FullCompute)),
                      static_cast<long long>(rec.candidate.count(Regime::PartialCompute)),
                      static_cast<long long>(rec.candidate.count(Regime::Reuse)));
        csv += line;

        art.records.push_back(std::move(rec));
    }

    art.json_path = out_dir / "sweep.json";
    write_text(art.json_path, json_text(json_records));
    art.csv_path = out_dir / "sweep.csv";
    write_text(art.csv_path, csv);
    return art;
}

std::int64_t all_full_cost(const RunConfig& cfg) {
    const int total = cfg.scene.frames * cfg.scene.height * cfg.scene.width;
    return static_cast<std::int64_t>(cfg.scheduler.steps) * full_step_cost(cfg.model, total);
}

}  // namespace hetcache
