#pragma once

#include <filesystem>
#include <vector>

#include "hetcache/config.hpp"
#include "hetcache/report.hpp"
#include "hetcache/scheduler.hpp"

namespace hetcache {

struct RunArtifacts {
    DenoiseResult result;
    std::filesystem::path report_path;
    std::filesystem::path csv_path;
    std::filesystem::path latent_path;   // set when dump_latent is on
    std::filesystem::path weights_path;  // set when dump_weights is on
};

// Runs the configured scenario and writes report.json and trace.csv (plus
// optional binary dumps) under out_dir.
RunArtifacts drive_run(const RunConfig& cfg, const std::filesystem::path& out_dir);

// How the reference run for a comparison is produced: a scheduler-free loop
// of full passes, or the scheduler with thresholds forcing full compute.
enum class BaselineMode { Loop, Scheduler };

struct CompareArtifacts {
    ComparisonRecord record;
    std::filesystem::path record_path;
};

CompareArtifacts drive_compare(const RunConfig& cfg, BaselineMode mode,
                               const std::filesystem::path& out_dir);

enum class SweepAxis { Delta, KeepRatio, Clusters };

struct SweepArtifacts {
    std::vector<double> values;
    std::vector<ComparisonRecord> records;
    std::filesystem::path json_path;
    std::filesystem::path csv_path;
};

// One comparison per axis value, merged into sweep.json and sweep.csv.
SweepArtifacts drive_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                           const std::filesystem::path& out_dir);

// Analytic cost of running every step at full compute for this scene.
std::int64_t all_full_cost(const RunConfig& cfg);

}  // namespace hetcache
