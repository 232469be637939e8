#pragma once

#include <cstdint>
#include <random>

#include "hetcache/scene.hpp"
#include "hetcache/token_grid.hpp"

namespace hetest {

inline hetcache::TokenGrid random_grid(int f, int h, int w, int d, std::uint64_t seed) {
    return hetcache::gaussian_latents(f, h, w, d, seed);
}

inline hetcache::EditMask random_mask(int f, int h, int w, std::uint64_t seed,
                                      double masked_fraction = 0.3) {
    std::mt19937_64 eng(seed);
    hetcache::EditMask mask(f, h, w);
    for (auto& flag : mask.flags) {
        flag = (eng() % 1000) < static_cast<std::uint64_t>(masked_fraction * 1000) ? 1 : 0;
    }
    return mask;
}

inline hetcache::EditMask center_rect_mask(int f, int h, int w, int border) {
    hetcache::EditMask mask(f, h, w);
    for (int fi = 0; fi < f; ++fi) {
        for (int y = border; y < h - border; ++y) {
            for (int x = border; x < w - border; ++x) {
                mask.set(fi, y, x, true);
            }
        }
    }
    return mask;
}

}  // namespace hetest
