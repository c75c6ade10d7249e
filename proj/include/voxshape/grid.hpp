#pragma once

#include <cstdint>
#include <vector>

#include "voxshape/common.hpp"

namespace voxshape {

// Voxel grid extents. Index layout everywhere is row-major with the last
// axis fastest: idx(h, w, d) = (h * W + w) * D + d.
struct GridDims {
    int h = 0;
    int w = 0;
    int d = 0;

    GridDims() = default;
    GridDims(int h_, int w_, int d_);

    std::int64_t count() const { return std::int64_t(h) * w * d; }
    std::int64_t index(int ih, int iw, int id) const {
        return (std::int64_t(ih) * w + iw) * d + id;
    }
    bool contains(int ih, int iw, int id) const {
        return ih >= 0 && ih < h && iw >= 0 && iw < w && id >= 0 && id < d;
    }
    bool operator==(const GridDims&) const = default;
};

// Binary occupancy; voxel = 1 iff on or inside the surface.
struct OccupancyGrid {
    GridDims dims;
    std::vector<std::uint8_t> values;

    OccupancyGrid() = default;
    explicit OccupancyGrid(GridDims d) : dims(d), values(d.count(), 0) {}

    std::uint8_t at(int h, int w, int d) const { return values[dims.index(h, w, d)]; }
    void set(int h, int w, int d, std::uint8_t v) { values[dims.index(h, w, d)] = v; }
    std::int64_t count_occupied() const;
};

// Signed distance per voxel center, in voxel edge lengths. Non-positive
// exactly on occupied voxels.
struct SdfGrid {
    GridDims dims;
    std::vector<float> values;

    SdfGrid() = default;
    explicit SdfGrid(GridDims d) : dims(d), values(d.count(), 0.0f) {}

    float at(int h, int w, int d) const { return values[dims.index(h, w, d)]; }
};

// sign(v) * ln(1 + min(5, |v|)); values in [-ln 6, ln 6].
struct LogTsdfGrid {
    GridDims dims;
    std::vector<float> values;

    LogTsdfGrid() = default;
    explicit LogTsdfGrid(GridDims d) : dims(d), values(d.count(), 0.0f) {}
};

// Ternary per-voxel observation state.
enum class VoxelState : std::uint8_t { kFree = 0, kOccupied = 1, kUnknown = 2 };

struct Observation {
    GridDims dims;
    std::vector<std::uint8_t> states;  // VoxelState values

    Observation() = default;
    explicit Observation(GridDims d)
        : dims(d), states(d.count(), static_cast<std::uint8_t>(VoxelState::kUnknown)) {}

    VoxelState at(int h, int w, int d) const {
        return static_cast<VoxelState>(states[dims.index(h, w, d)]);
    }
    void set(int h, int w, int d, VoxelState s) {
        states[dims.index(h, w, d)] = static_cast<std::uint8_t>(s);
    }
    std::int64_t count_observed() const;
    std::int64_t count_state(VoxelState s) const;
};

// Per-voxel trust weights in [0,1].
struct WeightGrid {
    GridDims dims;
    std::vector<float> values;

    WeightGrid() = default;
    explicit WeightGrid(GridDims d) : dims(d), values(d.count(), 0.0f) {}
};

// One reference shape: paired occupancy and logTSDF channels.
struct ShapeSample {
    OccupancyGrid occ;
    LogTsdfGrid logtsdf;
};

inline constexpr double kLogTsdfTruncation = 5.0;  // |sdf| clamp before log
double log_tsdf_value(double v);
double inverse_log_tsdf_value(double v);

// Marks every voxel unreachable from the grid boundary through unoccupied
// 6-connected voxels as occupied; surface voxels stay occupied.
OccupancyGrid fill_interior(const OccupancyGrid& surface);

// Exact Euclidean SDF. Unoccupied voxels: distance to the nearest occupied
// center. Occupied voxels: -(distance to nearest unoccupied center - 1), so
// the zero level sits on the outermost occupied layer.
// Throws DegenerateInputError on all-occupied or all-empty input.
SdfGrid signed_distance_transform(const OccupancyGrid& filled);

LogTsdfGrid log_tsdf(const SdfGrid& sdf);
SdfGrid inverse_log_tsdf(const LogTsdfGrid& grid);

// Occupied iff sdf value <= 0.
OccupancyGrid occupancy_from_sdf(const SdfGrid& sdf);

// kappa_i = 1 - mean occupancy of voxel i across the references.
WeightGrid free_space_weights(const std::vector<OccupancyGrid>& references);

// Fraction of non-unknown voxels.
double supervision_fraction(const Observation& obs);

// Squared Euclidean distance (in voxels) from every voxel to the nearest
// voxel where mask != 0. Exact separable transform; infinity-free only if the
// mask has at least one set voxel.
std::vector<double> squared_distance_to_mask(const GridDims& dims,
                                             const std::vector<std::uint8_t>& mask);

}  // namespace voxshape
