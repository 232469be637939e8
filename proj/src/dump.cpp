#include "hetcache/dump.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hetcache {

namespace {

constexpr char kMagic[4] = {'H', 'T', 'C', 'L'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    std::uint8_t u8() {
        if (pos + 1 > buf.size()) throw std::runtime_error("dump file truncated");
        return buf[pos++];
    }
    std::uint16_t u16() {
        const std::uint16_t lo = u8();
        return static_cast<std::uint16_t>(lo | (static_cast<std::uint16_t>(u8()) << 8));
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

std::vector<std::uint8_t> encode(DumpDtype dtype, const std::vector<std::uint32_t>& dims,
                                 const float* fdata, const std::uint8_t* bdata, std::uint64_t count) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kDumpVersion);
    out.push_back(static_cast<std::uint8_t>(dtype));
    out.push_back(static_cast<std::uint8_t>(dims.size()));
    for (std::uint32_t d : dims) put_u32(out, d);
    if (dtype == DumpDtype::F32) {
        out.reserve(out.size() + count * 4);
        for (std::uint64_t i = 0; i < count; ++i) put_f32(out, fdata[i]);
    } else {
        out.insert(out.end(), bdata, bdata + count);
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("short write to " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

DumpHeader parse_header(Reader& r) {
    char magic[4];
    for (char& m : magic) m = static_cast<char>(r.u8());
    if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad magic, not a dump file");
    DumpHeader h;
    h.version = r.u16();
    if (h.version != kDumpVersion) {
        throw std::runtime_error("unsupported dump version " + std::to_string(h.version));
    }
    const std::uint8_t dtype = r.u8();
    if (dtype > 1) throw std::runtime_error("unknown dtype tag " + std::to_string(dtype));
    h.dtype = static_cast<DumpDtype>(dtype);
    const std::uint8_t rank = r.u8();
    h.dims.resize(rank);
    for (auto& d : h.dims) d = r.u32();
    return h;
}

}  // namespace

std::uint64_t DumpHeader::element_count() const {
    std::uint64_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return n;
}

std::vector<std::uint8_t> grid_to_bytes(const TokenGrid& grid) {
    const std::vector<std::uint32_t> dims = {
        static_cast<std::uint32_t>(grid.frames), static_cast<std::uint32_t>(grid.height),
        static_cast<std::uint32_t>(grid.width), static_cast<std::uint32_t>(grid.channels)};
    return encode(DumpDtype::F32, dims, grid.data.data(), nullptr, grid.data.size());
}

void write_grid(const std::filesystem::path& path, const TokenGrid& grid) {
    write_file(path, grid_to_bytes(grid));
}

TokenGrid read_grid(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    Reader r{bytes};
    const DumpHeader h = parse_header(r);
    if (h.dtype != DumpDtype::F32 || h.dims.size() != 4) {
        throw std::runtime_error(path.string() + ": expected a rank-4 f32 grid dump");
    }
    TokenGrid grid(static_cast<int>(h.dims[0]), static_cast<int>(h.dims[1]),
                   static_cast<int>(h.dims[2]), static_cast<int>(h.dims[3]));
    for (auto& v : grid.data) v = r.f32();
    return grid;
}

void write_mask(const std::filesystem::path& path, const EditMask& mask) {
    const std::vector<std::uint32_t> dims = {static_cast<std::uint32_t>(mask.frames),
                                             static_cast<std::uint32_t>(mask.height),
                                             static_cast<std::uint32_t>(mask.width)};
    write_file(path, encode(DumpDtype::U8, dims, nullptr, mask.flags.data(), mask.flags.size()));
}

EditMask read_mask(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    Reader r{bytes};
    const DumpHeader h = parse_header(r);
    if (h.dtype != DumpDtype::U8 || h.dims.size() != 3) {
        throw std::runtime_error(path.string() + ": expected a rank-3 u8 mask dump");
    }
    EditMask mask(static_cast<int>(h.dims[0]), static_cast<int>(h.dims[1]),
                  static_cast<int>(h.dims[2]));
    for (auto& flag : mask.flags) {
        const std::uint8_t v = r.u8();
        if (v > 1) throw std::runtime_error(path.string() + ": mask bytes must be 0 or 1");
        flag = v;
    }
    return mask;
}

void write_weights(const std::filesystem::path& path, const DitModel& model) {
    const std::vector<float> flat = model.flatten_weights();
    const std::vector<std::uint32_t> dims = {static_cast<std::uint32_t>(flat.size())};
    write_file(path, encode(DumpDtype::F32, dims, flat.data(), nullptr, flat.size()));
}

std::vector<float> read_weights(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    Reader r{bytes};
    const DumpHeader h = parse_header(r);
    if (h.dtype != DumpDtype::F32 || h.dims.size() != 1) {
        throw std::runtime_error(path.string() + ": expected a rank-1 f32 weight dump");
    }
    std::vector<float> flat(h.element_count());
    for (auto& v : flat) v = r.f32();
    return flat;
}

DumpHeader read_header(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    Reader r{bytes};
    return parse_header(r);
}

}  // namespace hetcache
