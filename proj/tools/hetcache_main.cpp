#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hetcache/driver.hpp"
#include "hetcache/dump.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::filesystem::path resolve_out_dir(const hetcache::RunConfig& cfg, const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("HETCACHE_OUTPUT_DIR"); env && *env) return env;
    return cfg.output.directory;
}

void print_histogram(const hetcache::RunReport& report) {
    std::printf("regimes: full=%lld partial=%lld reuse=%lld\n",
                static_cast<long long>(report.count(hetcache::Regime::FullCompute)),
                static_cast<long long>(report.count(hetcache::Regime::PartialCompute)),
                static_cast<long long>(report.count(hetcache::Regime::Reuse)));
}

int cmd_run(const std::string& config_path, const std::string& out_flag) {
    const hetcache::RunConfig cfg = hetcache::load_run_config(config_path);
    const auto out_dir = resolve_out_dir(cfg, out_flag);
    const hetcache::RunArtifacts art = hetcache::drive_run(cfg, out_dir);

    print_histogram(art.result.report);
    const double full_cost = static_cast<double>(hetcache::all_full_cost(cfg));
    const double run_cost = static_cast<double>(art.result.report.totals.total_units());
    std::printf("analytic cost: %.0f units (all-full: %.0f, speedup %.2fx)\n", run_cost, full_cost,
                full_cost / run_cost);
    std::printf("wall time: %.1f ms\n", art.result.report.wall_time_ms);
    std::printf("report: %s\n", art.report_path.string().c_str());
    if (!art.latent_path.empty()) std::printf("latent: %s\n", art.latent_path.string().c_str());
    if (!art.weights_path.empty()) std::printf("weights: %s\n", art.weights_path.string().c_str());
    return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& mode_name,
                const std::string& out_flag) {
    const hetcache::RunConfig cfg = hetcache::load_run_config(config_path);
    const auto mode = mode_name == "scheduler" ? hetcache::BaselineMode::Scheduler
                                               : hetcache::BaselineMode::Loop;
    const auto out_dir = resolve_out_dir(cfg, out_flag);
    const hetcache::CompareArtifacts art = hetcache::drive_compare(cfg, mode, out_dir);

    std::printf("speedup: %.3fx\n", art.record.speedup);
    std::printf("divergence: l2=%.6g psnr=%.3f dB ssim=%.6f\n", art.record.divergence.l2,
                art.record.divergence.psnr_db, art.record.divergence.ssim_score);
    print_histogram(art.record.candidate);
    std::printf("record: %s\n", art.record_path.string().c_str());
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::vector<double>& deltas,
              const std::vector<double>& ratios, const std::vector<double>& clusters,
              const std::string& out_flag) {
    const int axes = (!deltas.empty()) + (!ratios.empty()) + (!clusters.empty());
    if (axes != 1) {
        std::fprintf(stderr, "sweep: give exactly one of --deltas, --ratios, --clusters\n");
        return kExitConfig;
    }
    const hetcache::RunConfig cfg = hetcache::load_run_config(config_path);
    const auto out_dir = resolve_out_dir(cfg, out_flag);

    hetcache::SweepAxis axis = hetcache::SweepAxis::Delta;
    const std::vector<double>* values = &deltas;
    if (!ratios.empty()) {
        axis = hetcache::SweepAxis::KeepRatio;
        values = &ratios;
    } else if (!clusters.empty()) {
        axis = hetcache::SweepAxis::Clusters;
        values = &clusters;
    }

    const hetcache::SweepArtifacts art = hetcache::drive_sweep(cfg, axis, *values, out_dir);
    std::printf("sweep: %zu points -> %s\n", art.records.size(), art.csv_path.string().c_str());
    for (std::size_t i = 0; i < art.records.size(); ++i) {
        std::printf("  value=%g speedup=%.3fx l2=%.6g\n", art.values[i], art.records[i].speedup,
                    art.records[i].divergence.l2);
    }
    return kExitOk;
}

int cmd_dump_inspect(const std::string& path) {
    const hetcache::DumpHeader h = hetcache::read_header(path);
    std::printf("file: %s\n", path.c_str());
    std::printf("version: %u\n", h.version);
    std::printf("dtype: %s\n", h.dtype == hetcache::DumpDtype::F32 ? "f32" : "u8");
    std::printf("rank: %zu\n", h.dims.size());
    std::printf("dims:");
    for (auto d : h.dims) std::printf(" %u", d);
    std::printf("\n");
    std::printf("elements: %llu\n", static_cast<unsigned long long>(h.element_count()));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heterogeneous caching for masked video diffusion editing"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_flag;
    std::string baseline_mode = "loop";
    std::vector<double> deltas, ratios, clusters;
    std::string inspect_path;

    auto* run = app.add_subcommand("run", "run one configured scenario");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--out", out_flag, "output directory override");

    auto* compare = app.add_subcommand("compare", "run baseline and cached config on the same scene");
    compare->add_option("config", config_path, "config file")->required();
    compare->add_option("--baseline-mode", baseline_mode, "loop | scheduler")
        ->check(CLI::IsMember({"loop", "scheduler"}));
    compare->add_option("--out", out_flag, "output directory override");

    auto* sweep = app.add_subcommand("sweep", "compare over a parameter grid");
    sweep->add_option("config", config_path, "config file")->required();
    sweep->add_option("--deltas", deltas, "comma list of cache thresholds")->delimiter(',');
    sweep->add_option("--ratios", ratios, "comma list of context keep ratios")->delimiter(',');
    sweep->add_option("--clusters", clusters, "comma list of cluster counts")->delimiter(',');
    sweep->add_option("--out", out_flag, "output directory override");

    auto* inspect = app.add_subcommand("dump-inspect", "print the header of a binary dump");
    inspect->add_option("file", inspect_path, "dump file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, out_flag);
        if (compare->parsed()) return cmd_compare(config_path, baseline_mode, out_flag);
        if (sweep->parsed()) return cmd_sweep(config_path, deltas, ratios, clusters, out_flag);
        if (inspect->parsed()) return cmd_dump_inspect(inspect_path);
    } catch (const hetcache::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const hetcache::RunAborted& e) {
        std::fprintf(stderr, "numeric failure at step %d (block %d): %s\n", e.step_index,
                     e.block_index, e.what());
        return kExitNumeric;
    } catch (const hetcache::NumericError& e) {
        std::fprintf(stderr, "numeric failure in block %d: %s\n", e.block_index, e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}
