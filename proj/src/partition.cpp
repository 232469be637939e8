#include "hetcache/partition.hpp"

#include <algorithm>
#include <stdexcept>

namespace hetcache {

namespace {

bool near_masked(const EditMask& mask, int f, int y, int x, int radius) {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(mask.height - 1, y + radius);
    const int x0 = std::max(0, x - radius);
    const int x1 = std::min(mask.width - 1, x + radius);
    for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) {
            if (mask.masked(f, yy, xx)) return true;
        }
    }
    return false;
}

}  // namespace

TokenPartition partition_tokens(const EditMask& mask, int margin_radius) {
    if (mask.frames <= 0 || mask.height <= 0 || mask.width <= 0) {
        throw std::invalid_argument("partition_tokens: mask has zero extent");
    }
    if (margin_radius < 0) {
        throw std::invalid_argument("partition_tokens: margin_radius must be >= 0");
    }

    TokenPartition part;
    part.total_tokens = mask.token_count();

    int token = 0;
    for (int f = 0; f < mask.frames; ++f) {
        for (int y = 0; y < mask.height; ++y) {
            for (int x = 0; x < mask.width; ++x, ++token) {
                if (mask.masked(token)) {
                    part.generative.push_back(token);
                } else if (margin_radius > 0 && near_masked(mask, f, y, x, margin_radius)) {
                    part.margin.push_back(token);
                } else {
                    part.context.push_back(token);
                }
            }
        }
    }
    return part;
}

}  // namespace hetcache
