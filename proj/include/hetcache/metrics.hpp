#pragma once

#include "hetcache/token_grid.hpp"

namespace hetcache {

// Euclidean distance over all values.
double l2_distance(const TokenGrid& a, const TokenGrid& b);

double mean_squared_error(const TokenGrid& a, const TokenGrid& b);

// 10 * log10(peak^2 / MSE); +infinity when the grids are identical.
double psnr(const TokenGrid& a, const TokenGrid& b, double peak);

// Mean structural similarity over sliding 8x8 spatial windows, per frame and
// channel (window shrinks to the frame when a side is smaller than 8).
// Stabilizers use k1 = 0.01 and k2 = 0.03 on the given dynamic range.
double ssim(const TokenGrid& a, const TokenGrid& b, double dynamic_range = 1.0);

}  // namespace hetcache
