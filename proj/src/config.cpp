#include "hetcache/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hetcache {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

long long parse_int(const std::string& value, const std::string& path) {
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (errno != 0 || end == value.c_str() || *end != '\0') {
        throw ConfigError(path, "expected an integer, got '" + value + "'");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& value, const std::string& path) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (errno != 0 || end == value.c_str() || *end != '\0' || value.find('-') != std::string::npos) {
        throw ConfigError(path, "expected a non-negative integer, got '" + value + "'");
    }
    return v;
}

double parse_real(const std::string& value, const std::string& path) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(value.c_str(), &end);
    if (errno != 0 || end == value.c_str() || *end != '\0') {
        throw ConfigError(path, "expected a number, got '" + value + "'");
    }
    return v;
}

bool parse_bool(const std::string& value, const std::string& path) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(path, "expected true/false, got '" + value + "'");
}

int parse_range_part(const std::string& value, const std::string& path, int& lo, int& hi) {
    const auto colon = value.find(':');
    if (colon == std::string::npos) {
        lo = hi = static_cast<int>(parse_int(value, path));
        return 0;
    }
    lo = static_cast<int>(parse_int(value.substr(0, colon), path));
    hi = static_cast<int>(parse_int(value.substr(colon + 1), path));
    return 0;
}

SceneConfig::Rect parse_rect(const std::string& value, const std::string& path) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : value) {
        if (c == ',') {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(trim(cur));
    if (parts.size() != 3) {
        throw ConfigError(path, "expected frame:frame,y:y,x:x, got '" + value + "'");
    }
    SceneConfig::Rect r;
    parse_range_part(parts[0], path, r.frame_begin, r.frame_end);
    parse_range_part(parts[1], path, r.y_begin, r.y_end);
    parse_range_part(parts[2], path, r.x_begin, r.x_end);
    return r;
}

void validate_scene(const SceneConfig& scene) {
    if (scene.frames < 1) throw ConfigError("scene.frames", "must be >= 1");
    if (scene.height < 1) throw ConfigError("scene.height", "must be >= 1");
    if (scene.width < 1) throw ConfigError("scene.width", "must be >= 1");
    if (!scene.mask_rects.empty() && !scene.mask_file.empty()) {
        throw ConfigError("scene.mask_rect", "mutually exclusive with scene.mask_file");
    }
    for (std::size_t i = 0; i < scene.mask_rects.size(); ++i) {
        const auto& r = scene.mask_rects[i];
        const std::string path = "scene.mask_rect[" + std::to_string(i) + "]";
        if (r.frame_begin < 0 || r.frame_end >= scene.frames || r.frame_begin > r.frame_end) {
            throw ConfigError(path, "frame range out of bounds");
        }
        if (r.y_begin < 0 || r.y_end >= scene.height || r.y_begin > r.y_end) {
            throw ConfigError(path, "y range out of bounds");
        }
        if (r.x_begin < 0 || r.x_end >= scene.width || r.x_begin > r.x_end) {
            throw ConfigError(path, "x range out of bounds");
        }
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;

    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("", "line " + std::to_string(lineno) + ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "scheduler" && section != "scene" &&
                section != "output") {
                throw ConfigError(section, "unknown section");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            throw ConfigError(key, "key outside any [section]");
        }
        const std::string path = section + "." + key;

        if (section == "model") {
            if (key == "channels") cfg.model.channels = static_cast<int>(parse_int(value, path));
            else if (key == "heads") cfg.model.heads = static_cast<int>(parse_int(value, path));
            else if (key == "blocks") cfg.model.blocks = static_cast<int>(parse_int(value, path));
            else if (key == "mlp_hidden") cfg.model.mlp_hidden = static_cast<int>(parse_int(value, path));
            else if (key == "seed") cfg.model.seed = parse_u64(value, path);
            else if (key == "capture_attention") cfg.model.capture_attention = parse_bool(value, path);
            else if (key == "attn_aggregate") {
                if (value == "mean_all_blocks") cfg.model.aggregate = AttnAggregate::MeanAllBlocks;
                else if (value == "last_block") cfg.model.aggregate = AttnAggregate::LastBlock;
                else throw ConfigError(path, "expected mean_all_blocks or last_block");
            } else throw ConfigError(path, "unknown key");
        } else if (section == "scheduler") {
            if (key == "steps") cfg.scheduler.steps = static_cast<int>(parse_int(value, path));
            else if (key == "delta") cfg.scheduler.delta = parse_real(value, path);
            else if (key == "full_multiplier") cfg.scheduler.full_multiplier = parse_real(value, path);
            else if (key == "ema_gamma") cfg.scheduler.ema_gamma = parse_real(value, path);
            else if (key == "r_ctx") cfg.scheduler.r_ctx = parse_real(value, path);
            else if (key == "k_clusters") cfg.scheduler.k_clusters = static_cast<int>(parse_int(value, path));
            else if (key == "kmeans_max_iter") cfg.scheduler.kmeans_max_iter = static_cast<int>(parse_int(value, path));
            else if (key == "margin_radius") cfg.scheduler.margin_radius = static_cast<int>(parse_int(value, path));
            else if (key == "seed") cfg.scheduler.seed = parse_u64(value, path);
            else throw ConfigError(path, "unknown key");
        } else if (section == "scene") {
            if (key == "frames") cfg.scene.frames = static_cast<int>(parse_int(value, path));
            else if (key == "height") cfg.scene.height = static_cast<int>(parse_int(value, path));
            else if (key == "width") cfg.scene.width = static_cast<int>(parse_int(value, path));
            else if (key == "latent_seed") cfg.scene.latent_seed = parse_u64(value, path);
            else if (key == "mask_rect") cfg.scene.mask_rects.push_back(parse_rect(value, path));
            else if (key == "mask_file") cfg.scene.mask_file = value;
            else throw ConfigError(path, "unknown key");
        } else {  // output
            if (key == "directory") cfg.output.directory = value;
            else if (key == "dump_latent") cfg.output.dump_latent = parse_bool(value, path);
            else if (key == "dump_weights") cfg.output.dump_weights = parse_bool(value, path);
            else throw ConfigError(path, "unknown key");
        }
    }

    try {
        cfg.model.validate();
        cfg.scheduler.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("", e.what());
    }
    validate_scene(cfg.scene);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("", "cannot open config file " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_run_config(buf.str());
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json rects = nlohmann::json::array();
    for (const auto& r : cfg.scene.mask_rects) {
        rects.push_back({{"frames", {r.frame_begin, r.frame_end}},
                         {"y", {r.y_begin, r.y_end}},
                         {"x", {r.x_begin, r.x_end}}});
    }
    return {
        {"model", dit_config_to_json(cfg.model)},
        {"scheduler",
         {{"steps", cfg.scheduler.steps},
          {"delta", cfg.scheduler.delta},
          {"full_multiplier", cfg.scheduler.full_multiplier},
          {"ema_gamma", cfg.scheduler.ema_gamma},
          {"r_ctx", cfg.scheduler.r_ctx},
          {"k_clusters", cfg.scheduler.k_clusters},
          {"kmeans_max_iter", cfg.scheduler.kmeans_max_iter},
          {"margin_radius", cfg.scheduler.margin_radius},
          {"seed", cfg.scheduler.seed}}},
        {"scene",
         {{"frames", cfg.scene.frames},
          {"height", cfg.scene.height},
          {"width", cfg.scene.width},
          {"latent_seed", cfg.scene.latent_seed},
          {"mask_rects", std::move(rects)},
          {"mask_file", cfg.scene.mask_file}}},
        {"output",
         {{"directory", cfg.output.directory},
          {"dump_latent", cfg.output.dump_latent},
          {"dump_weights", cfg.output.dump_weights}}},
    };
}

}  // namespace hetcache
