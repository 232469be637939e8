#pragma once

#include <vector>

#include "hetcache/token_grid.hpp"

namespace hetcache {

// Disjoint index sets covering every token of a grid, sorted ascending.
// Generative tokens are the masked ones; margin tokens are unmasked tokens
// near the mask boundary; context is everything else.
struct TokenPartition {
    std::vector<int> context;
    std::vector<int> margin;
    std::vector<int> generative;
    int total_tokens = 0;

    int context_count() const { return static_cast<int>(context.size()); }
    int margin_count() const { return static_cast<int>(margin.size()); }
    int generative_count() const { return static_cast<int>(generative.size()); }
};

// Splits tokens by the edit mask. An unmasked token is a margin token when a
// masked token of the same frame lies within Chebyshev distance margin_radius
// (8-neighborhood; radius 0 means no margin band).
TokenPartition partition_tokens(const EditMask& mask, int margin_radius);

}  // namespace hetcache
