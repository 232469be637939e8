#pragma once

#include <cstdint>

#include "hetcache/config.hpp"
#include "hetcache/token_grid.hpp"

namespace hetcache {

// Seeded standard-normal latents; the repo runs with zero external data.
TokenGrid gaussian_latents(int frames, int height, int width, int channels, std::uint64_t seed);

EditMask mask_from_rects(int frames, int height, int width,
                         const std::vector<SceneConfig::Rect>& rects);

TokenGrid build_scene_latents(const SceneConfig& scene, int channels);
EditMask build_scene_mask(const SceneConfig& scene);

}  // namespace hetcache
