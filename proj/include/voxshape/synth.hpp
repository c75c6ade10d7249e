#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxshape/grid.hpp"
#include "voxshape/mesh.hpp"

namespace voxshape {

// Pinhole camera in voxel coordinates; camera space looks along +z and
// world = rot * cam + eye.
struct Camera {
    int width = 0;
    int height = 0;
    double focal = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    std::array<double, 9> rot{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major cam->world
    Vec3 eye;

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                          int height, double focal);
    // Camera on a fixed-radius ring at mid-height, looking at the grid center.
    static Camera on_ring(const GridDims& dims, double azimuth, double radius_factor,
                          int width, int height, double focal_factor);

    Vec3 pixel_ray(int u, int v) const;  // unit direction in world space
};

struct DepthMap {
    int width = 0;
    int height = 0;
    double max_depth = 0.0;  // designated no-return value, voxel units
    std::vector<double> depths;

    DepthMap() = default;
    DepthMap(int w, int h, double max_d)
        : width(w), height(h), max_depth(max_d), depths(std::size_t(w) * h, max_d) {}

    double at(int u, int v) const { return depths[std::size_t(v) * width + u]; }
    double& at(int u, int v) { return depths[std::size_t(v) * width + u]; }
};

struct NoiseParams {
    double exp_rate = 70.0;   // rate of additive exponential noise, grid units
    double drop_prob = 0.075; // chance of replacing a return with max depth
};

enum class ShapeFamily { kCuboidUnion, kEllipsoidUnion, kChairLike, kTableLike };

// Watertight, outward-oriented mesh in normalized [0,1]^3 coordinates with
// randomized proportions and yaw. Deterministic in the seed.
TriangleMesh generate_primitive_shape(ShapeFamily family, std::uint64_t seed);

// Maps normalized [0,1]^3 coordinates onto the grid box [0,H]x[0,W]x[0,D].
TriangleMesh scale_to_grid(const TriangleMesh& normalized, const GridDims& dims);

// Surface voxelization: voxel occupied iff some triangle intersects its box.
// Throws DegenerateInputError if the mesh leaves the grid domain.
OccupancyGrid voxelize_mesh(const TriangleMesh& mesh, const GridDims& dims);

// First-hit depth along each pixel ray via exact voxel traversal.
// Throws DegenerateInputError if the camera sits inside an occupied voxel.
DepthMap render_depth(const OccupancyGrid& occ, const Camera& cam);

// Sensor noise: independently per returned pixel, drop to max depth with
// drop_prob, otherwise add exponential noise. The rate is interpreted in
// normalized grid units; span_voxels converts one grid unit to voxel units.
DepthMap perturb_depth(const DepthMap& depth, const NoiseParams& np, double span_voxels,
                       std::uint64_t seed);

// Back-projects returns into occupied voxels and carves free space along
// each ray. Occupied states take precedence over free.
Observation observation_from_depth(const DepthMap& depth, const Camera& cam,
                                   const GridDims& dims);

// Per voxel: occupied if any input is occupied, else free if any is free.
Observation fuse_observations(const std::vector<Observation>& obs);

struct SynthConfig {
    GridDims dims{16, 16, 16};
    int shapes_prior = 100;
    int shapes_train = 100;
    int shapes_test = 20;
    int views = 10;
    bool noise = false;
    double exp_rate = 70.0;
    double drop_prob = 0.075;
    int fuse_k = 1;
    std::uint64_t seed = 0;
    // Declared camera defaults; depth_w == 0 picks 24x32 clean, 8x10 noisy
    // (noisy views are sparser, mirroring a lower-resolution sensor).
    int depth_w = 0;
    int depth_h = 0;
    double ring_radius_factor = 2.4;
    // Frame size relative to the shape's projected extent; the camera zooms
    // so the image covers frame_cover times the object silhouette bound.
    double frame_cover = 1.1;
};

struct SampleRecord {
    std::string shape_id;
    int pose_id = 0;
    int view_id = 0;
    std::string split;  // "prior" | "train" | "test"
    std::string occ_path;
    std::string sdf_path;
    std::string logtsdf_path;
    std::string obs_path;      // "-" for none
    std::string fused_views;   // comma-separated source view ids
};

struct DatasetManifest {
    GridDims dims;
    std::uint64_t seed = 0;
    double mean_supervision = 0.0;
    std::string base_dir;  // not serialized; set when read or built
    std::vector<SampleRecord> records;

    std::string resolve(const std::string& rel_path) const;
    std::vector<const SampleRecord*> split_records(const std::string& split) const;
    // One record per shape (view 0) for splits where shapes repeat per view.
    std::vector<const SampleRecord*> split_shapes(const std::string& split) const;
};

// Generates shapes, reference grids and observations under out_dir and
// returns the manifest (also written to out_dir/manifest.tsv).
DatasetManifest build_dataset(const SynthConfig& config, const std::string& out_dir,
                              int threads = 1);

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

}  // namespace voxshape
