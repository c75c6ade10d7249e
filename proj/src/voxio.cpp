#include "voxshape/voxio.hpp"

#include <cstring>
#include <fstream>
#include <mutex>

namespace voxshape {

namespace {

constexpr char kMagic[5] = {'V', 'O', 'X', 'G', '1'};

std::mutex g_audit_mutex;
std::function<void(const std::string&)> g_audit_sink;

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

float get_f32(std::istream& is) {
    const std::uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void set_voxg_read_audit(std::function<void(const std::string&)> sink) {
    std::lock_guard<std::mutex> lock(g_audit_mutex);
    g_audit_sink = std::move(sink);
}

void write_voxg(const std::string& path, const VoxFile& file) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kMagic, 5);
    put_u32(os, std::uint32_t(file.dims.h));
    put_u32(os, std::uint32_t(file.dims.w));
    put_u32(os, std::uint32_t(file.dims.d));
    put_u32(os, file.channels);
    os.put(char(file.kind));
    const std::int64_t n = file.dims.count() * file.channels;
    if (file.kind == 0) {
        if (std::int64_t(file.f32.size()) != n) throw IoError("f32 payload size mismatch");
        for (float v : file.f32) put_f32(os, v);
    } else {
        if (std::int64_t(file.u8.size()) != n) throw IoError("u8 payload size mismatch");
        os.write(reinterpret_cast<const char*>(file.u8.data()),
                 std::streamsize(file.u8.size()));
    }
    if (!os) throw IoError("write failed: " + path);
}

VoxFile read_voxg(const std::string& path) {
    {
        std::lock_guard<std::mutex> lock(g_audit_mutex);
        if (g_audit_sink) g_audit_sink(path);
    }
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open: " + path);
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, kMagic, 5) != 0) {
        throw InputError("bad VOXG magic in " + path);
    }
    VoxFile file;
    const int h = int(get_u32(is));
    const int w = int(get_u32(is));
    const int d = int(get_u32(is));
    file.dims = GridDims(h, w, d);
    file.channels = get_u32(is);
    file.kind = std::uint8_t(is.get());
    const std::int64_t n = file.dims.count() * file.channels;
    if (file.kind == 0) {
        file.f32.resize(n);
        for (auto& v : file.f32) v = get_f32(is);
    } else if (file.kind == 1 || file.kind == 2) {
        file.u8.resize(n);
        is.read(reinterpret_cast<char*>(file.u8.data()), std::streamsize(n));
    } else {
        throw InputError("unknown VOXG element kind in " + path);
    }
    if (!is) throw InputError("truncated VOXG file: " + path);
    return file;
}

void write_occupancy(const std::string& path, const OccupancyGrid& grid) {
    VoxFile f;
    f.dims = grid.dims;
    f.kind = 1;
    f.u8 = grid.values;
    write_voxg(path, f);
}

OccupancyGrid read_occupancy(const std::string& path) {
    const VoxFile f = read_voxg(path);
    if (f.kind != 1 || f.channels != 1) throw InputError("not an occupancy grid: " + path);
    OccupancyGrid g(f.dims);
    g.values = f.u8;
    return g;
}

void write_sdf(const std::string& path, const SdfGrid& grid) {
    VoxFile f;
    f.dims = grid.dims;
    f.kind = 0;
    f.f32 = grid.values;
    write_voxg(path, f);
}

SdfGrid read_sdf(const std::string& path) {
    const VoxFile f = read_voxg(path);
    if (f.kind != 0 || f.channels != 1) throw InputError("not an sdf grid: " + path);
    SdfGrid g(f.dims);
    g.values = f.f32;
    return g;
}

void write_logtsdf(const std::string& path, const LogTsdfGrid& grid) {
    VoxFile f;
    f.dims = grid.dims;
    f.kind = 0;
    f.f32 = grid.values;
    write_voxg(path, f);
}

LogTsdfGrid read_logtsdf(const std::string& path) {
    const VoxFile f = read_voxg(path);
    if (f.kind != 0 || f.channels != 1) throw InputError("not a logtsdf grid: " + path);
    LogTsdfGrid g(f.dims);
    g.values = f.f32;
    return g;
}

void write_observation(const std::string& path, const Observation& obs) {
    VoxFile f;
    f.dims = obs.dims;
    f.kind = 2;
    f.u8 = obs.states;
    write_voxg(path, f);
}

Observation read_observation(const std::string& path) {
    const VoxFile f = read_voxg(path);
    if (f.kind != 2 || f.channels != 1) throw InputError("not an observation: " + path);
    Observation o(f.dims);
    o.states = f.u8;
    return o;
}

}  // namespace voxshape
