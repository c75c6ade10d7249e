#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "voxshape/geometry.hpp"
#include "voxshape/grid.hpp"
#include "voxshape/rng.hpp"

namespace voxshape {

// Vertex/face soup in voxel coordinates; voxel (i,j,k) is centered at
// (i + 0.5, j + 0.5, k + 0.5).
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;

    bool empty() const { return faces.empty(); }
    double area() const;
    // Divergence-theorem volume; positive for outward-oriented closed meshes.
    double signed_volume() const;
    std::array<Vec3, 3> triangle(std::size_t f) const {
        return {vertices[faces[f][0]], vertices[faces[f][1]], vertices[faces[f][2]]};
    }
};

enum class MeshFormat { kOff, kObj };

// Standard 256-case marching cubes at the given iso level with linear edge
// interpolation. Vertices are welded across cells; triangles are oriented
// outward (normals point toward positive values).
TriangleMesh marching_cubes(const SdfGrid& sdf, double iso = 0.0);

// n points drawn area-proportionally across triangles, uniform inside each.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n,
                                 std::uint64_t seed);

// BVH over triangles for repeated distance queries. Results match the
// brute-force minimum over all faces exactly.
class MeshDistanceIndex {
public:
    explicit MeshDistanceIndex(const TriangleMesh& mesh);
    ~MeshDistanceIndex();
    MeshDistanceIndex(MeshDistanceIndex&&) noexcept;
    MeshDistanceIndex& operator=(MeshDistanceIndex&&) noexcept;

    double distance(const Vec3& p) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<double> point_mesh_distance(const std::vector<Vec3>& points,
                                        const TriangleMesh& mesh);

void export_mesh(const TriangleMesh& mesh, const std::string& path, MeshFormat format);
TriangleMesh import_mesh(const std::string& path, MeshFormat format);

// Diagnostics used by tests and dataset validation.
// True iff every edge is shared by exactly two faces.
bool is_edge_manifold_closed(const TriangleMesh& mesh);
// V - E + F over welded vertices.
long euler_characteristic(const TriangleMesh& mesh);

}  // namespace voxshape
