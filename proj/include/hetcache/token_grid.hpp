#pragma once

#include <cstdint>
#include <vector>

namespace hetcache {

// Dense latent over spatio-temporal tokens. Values are stored token-major:
// token index = (frame * height + y) * width + x, channels contiguous per token.
struct TokenGrid {
    int frames = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    TokenGrid() = default;
    TokenGrid(int t, int h, int w, int d);

    int token_count() const { return frames * height * width; }
    std::size_t value_count() const {
        return static_cast<std::size_t>(token_count()) * static_cast<std::size_t>(channels);
    }
    int token_index(int f, int y, int x) const { return (f * height + y) * width + x; }

    float* token(int i) { return data.data() + static_cast<std::size_t>(i) * channels; }
    const float* token(int i) const { return data.data() + static_cast<std::size_t>(i) * channels; }

    bool same_shape(const TokenGrid& other) const {
        return frames == other.frames && height == other.height && width == other.width &&
               channels == other.channels;
    }

    bool all_finite() const;
};

// One flag per spatio-temporal token; true marks a token to be generated.
struct EditMask {
    int frames = 0;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> flags;

    EditMask() = default;
    EditMask(int t, int h, int w);

    int token_count() const { return frames * height * width; }
    bool masked(int token) const { return flags[static_cast<std::size_t>(token)] != 0; }
    bool masked(int f, int y, int x) const { return masked((f * height + y) * width + x); }
    void set(int f, int y, int x, bool value) {
        flags[static_cast<std::size_t>((f * height + y) * width + x)] = value ? 1 : 0;
    }
};

// Row-major bundle of token channel vectors, as produced by gather().
struct TokenMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    TokenMatrix() = default;
    TokenMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0f) {}

    float* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const float* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
};

// Copies the channel vectors of the listed tokens, in list order.
TokenMatrix gather(const TokenGrid& grid, const std::vector<int>& indices);

// Returns a copy of base with the listed token positions replaced by the
// supplied rows. Indices must be unique and in range.
TokenGrid scatter(const TokenGrid& base, const std::vector<int>& indices, const TokenMatrix& rows);

double l1_norm(const TokenGrid& grid);

}  // namespace hetcache
