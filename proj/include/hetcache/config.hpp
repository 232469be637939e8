#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetcache/dit.hpp"
#include "hetcache/scheduler.hpp"

namespace hetcache {

struct ConfigError : std::runtime_error {
    ConfigError(const std::string& path, const std::string& msg)
        : std::runtime_error(path.empty() ? msg : path + ": " + msg), field_path(path) {}
    std::string field_path;
};

struct SceneConfig {
    int frames = 3;
    int height = 12;
    int width = 12;
    std::uint64_t latent_seed = 1;

    // inclusive token ranges, frame:frame,y:y,x:x
    struct Rect {
        int frame_begin = 0, frame_end = 0;
        int y_begin = 0, y_end = 0;
        int x_begin = 0, x_end = 0;
    };
    std::vector<Rect> mask_rects;
    std::string mask_file;  // alternative to rectangles
};

struct OutputConfig {
    std::string directory = "out";
    bool dump_latent = false;
    bool dump_weights = false;
};

struct RunConfig {
    DitConfig model;
    SchedulerConfig scheduler;
    SceneConfig scene;
    OutputConfig output;
};

// Flat sectioned key = value text. Unknown sections or keys are errors;
// validation failures name the offending field.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json run_config_to_json(const RunConfig& cfg);

}  // namespace hetcache
