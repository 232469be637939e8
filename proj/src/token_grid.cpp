#include "hetcache/token_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hetcache {

TokenGrid::TokenGrid(int t, int h, int w, int d)
    : frames(t), height(h), width(w), channels(d) {
    if (t <= 0 || h <= 0 || w <= 0 || d <= 0) {
        throw std::invalid_argument("TokenGrid: all extents must be positive");
    }
    data.assign(value_count(), 0.0f);
}

bool TokenGrid::all_finite() const {
    for (float v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

EditMask::EditMask(int t, int h, int w) : frames(t), height(h), width(w) {
    if (t <= 0 || h <= 0 || w <= 0) {
        throw std::invalid_argument("EditMask: all extents must be positive");
    }
    flags.assign(static_cast<std::size_t>(token_count()), 0);
}

TokenMatrix gather(const TokenGrid& grid, const std::vector<int>& indices) {
    TokenMatrix out(static_cast<int>(indices.size()), grid.channels);
    const int total = grid.token_count();
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const int idx = indices[k];
        if (idx < 0 || idx >= total) {
            throw std::invalid_argument("gather: token index " + std::to_string(idx) +
                                        " out of range [0, " + std::to_string(total) + ")");
        }
        const float* src = grid.token(idx);
        float* dst = out.row(static_cast<int>(k));
        for (int c = 0; c < grid.channels; ++c) dst[c] = src[c];
    }
    return out;
}

TokenGrid scatter(const TokenGrid& base, const std::vector<int>& indices, const TokenMatrix& rows) {
    if (static_cast<int>(indices.size()) != rows.rows) {
        throw std::invalid_argument("scatter: index count does not match row count");
    }
    if (rows.cols != base.channels) {
        throw std::invalid_argument("scatter: row width does not match grid channels");
    }
    const int total = base.token_count();
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(total), 0);
    TokenGrid out = base;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const int idx = indices[k];
        if (idx < 0 || idx >= total) {
            throw std::invalid_argument("scatter: token index " + std::to_string(idx) +
                                        " out of range [0, " + std::to_string(total) + ")");
        }
        if (seen[static_cast<std::size_t>(idx)]) {
            throw std::invalid_argument("scatter: duplicate token index " + std::to_string(idx));
        }
        seen[static_cast<std::size_t>(idx)] = 1;
        const float* src = rows.row(static_cast<int>(k));
        float* dst = out.token(idx);
        for (int c = 0; c < base.channels; ++c) dst[c] = src[c];
    }
    return out;
}

double l1_norm(const TokenGrid& grid) {
    double sum = 0.0;
    for (float v : grid.data) sum += std::fabs(static_cast<double>(v));
    return sum;
}

}  // namespace hetcache
