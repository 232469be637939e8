#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hetcache/dit.hpp"
#include "hetcache/token_grid.hpp"

namespace hetcache {

// Binary dump layout: magic "HTCL", format version u16, dtype tag u8
// (0 = f32, 1 = u8), rank u8, dims as u32 list, little-endian payload.
constexpr std::uint16_t kDumpVersion = 1;

enum class DumpDtype : std::uint8_t { F32 = 0, U8 = 1 };

struct DumpHeader {
    std::uint16_t version = kDumpVersion;
    DumpDtype dtype = DumpDtype::F32;
    std::vector<std::uint32_t> dims;

    std::uint64_t element_count() const;
};

void write_grid(const std::filesystem::path& path, const TokenGrid& grid);
TokenGrid read_grid(const std::filesystem::path& path);

void write_mask(const std::filesystem::path& path, const EditMask& mask);
EditMask read_mask(const std::filesystem::path& path);

// Flat f32 parameter snapshot (rank 1).
void write_weights(const std::filesystem::path& path, const DitModel& model);
std::vector<float> read_weights(const std::filesystem::path& path);

DumpHeader read_header(const std::filesystem::path& path);

// Raw bytes of a grid dump, for byte-level determinism checks.
std::vector<std::uint8_t> grid_to_bytes(const TokenGrid& grid);

}  // namespace hetcache
