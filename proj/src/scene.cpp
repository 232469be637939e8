#include "hetcache/scene.hpp"

#include <stdexcept>

#include "hetcache/dump.hpp"
#include "hetcache/rng.hpp"

namespace hetcache {

TokenGrid gaussian_latents(int frames, int height, int width, int channels, std::uint64_t seed) {
    TokenGrid grid(frames, height, width, channels);
    GaussianRng rng(seed);
    for (auto& v : grid.data) v = rng.gaussianf();
    return grid;
}

EditMask mask_from_rects(int frames, int height, int width,
                         const std::vector<SceneConfig::Rect>& rects) {
    EditMask mask(frames, height, width);
    for (const auto& r : rects) {
        for (int f = r.frame_begin; f <= r.frame_end; ++f) {
            for (int y = r.y_begin; y <= r.y_end; ++y) {
                for (int x = r.x_begin; x <= r.x_end; ++x) {
                    mask.set(f, y, x, true);
                }
            }
        }
    }
    return mask;
}

TokenGrid build_scene_latents(const SceneConfig& scene, int channels) {
    return gaussian_latents(scene.frames, scene.height, scene.width, channels, scene.latent_seed);
}

EditMask build_scene_mask(const SceneConfig& scene) {
    if (!scene.mask_file.empty()) {
        EditMask mask = read_mask(scene.mask_file);
        if (mask.frames != scene.frames || mask.height != scene.height ||
            mask.width != scene.width) {
            throw std::invalid_argument("scene.mask_file: extents do not match the scene");
        }
        return mask;
    }
    return mask_from_rects(scene.frames, scene.height, scene.width, scene.mask_rects);
}

}  // namespace hetcache
