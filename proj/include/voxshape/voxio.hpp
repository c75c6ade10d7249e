#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "voxshape/grid.hpp"

namespace voxshape {

// Raw VOXG payload: magic "VOXG1", u32 H/W/D, u32 channels, u8 element kind,
// then channel-major values (row-major, D fastest). Element kinds:
//   0 = fp32, 1 = u8 binary, 2 = u8 ternary (unknown = 2).
struct VoxFile {
    GridDims dims;
    std::uint32_t channels = 1;
    std::uint8_t kind = 0;
    std::vector<float> f32;          // kind 0
    std::vector<std::uint8_t> u8;    // kinds 1 and 2
};

void write_voxg(const std::string& path, const VoxFile& file);
VoxFile read_voxg(const std::string& path);

void write_occupancy(const std::string& path, const OccupancyGrid& grid);
OccupancyGrid read_occupancy(const std::string& path);

void write_sdf(const std::string& path, const SdfGrid& grid);
SdfGrid read_sdf(const std::string& path);

void write_logtsdf(const std::string& path, const LogTsdfGrid& grid);
LogTsdfGrid read_logtsdf(const std::string& path);

void write_observation(const std::string& path, const Observation& obs);
Observation read_observation(const std::string& path);

// Observer for every VOXG read; lets harnesses audit which ground-truth
// artifacts a pipeline touched. Pass nullptr to clear.
void set_voxg_read_audit(std::function<void(const std::string&)> sink);

}  // namespace voxshape
