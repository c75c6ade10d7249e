#include "voxshape/mesh.hpp"

#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"

using namespace voxshape;

namespace {

SdfGrid analytic_sphere(GridDims dims, double radius) {
    SdfGrid sdf(dims);
    const Vec3 c{dims.h / 2.0, dims.w / 2.0, dims.d / 2.0};
    for (int h = 0; h < dims.h; ++h)
        for (int w = 0; w < dims.w; ++w)
            for (int d = 0; d < dims.d; ++d) {
                const Vec3 p{h + 0.5, w + 0.5, d + 0.5};
                sdf.values[dims.index(h, w, d)] = float((p - c).norm() - radius);
            }
    return sdf;
}

TriangleMesh unit_cube_mesh() {
    TriangleMesh m;
    for (int i = 0; i < 8; ++i) {
        m.vertices.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
    }
    // 12 outward-oriented triangles.
    const std::uint32_t f[12][3] = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6},
                                    {0, 1, 4}, {1, 5, 4}, {2, 6, 3}, {3, 6, 7},
                                    {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    for (const auto& t : f) m.faces.push_back({t[0], t[1], t[2]});
    return m;
}

}  // namespace

TEST_CASE("marching_cubes empty field") {
    SdfGrid sdf(GridDims(6, 6, 6));
    for (auto& v : sdf.values) v = 1.0f;
    CHECK(marching_cubes(sdf).empty());
}

TEST_CASE("marching_cubes sphere geometry") {
    const auto sdf = analytic_sphere(GridDims(16, 16, 16), 5.0);
    const auto mesh = marching_cubes(sdf);
    REQUIRE(!mesh.empty());
    const Vec3 c{8.0, 8.0, 8.0};
    for (const auto& v : mesh.vertices) {
        CHECK((v - c).norm() == doctest::Approx(5.0).epsilon(0.1));
        CHECK(std::abs((v - c).norm() - 5.0) < 0.5);
    }
    // Outward orientation: divergence-theorem volume close to 4/3 pi r^3.
    const double vol = mesh.signed_volume();
    CHECK(vol > 0.0);
    CHECK(vol == doctest::Approx(4.0 / 3.0 * M_PI * 125.0).epsilon(0.05));
    CHECK(is_edge_manifold_closed(mesh));
    CHECK(euler_characteristic(mesh) == 2);
}

TEST_CASE("marching_cubes single negative voxel is a closed surface") {
    SdfGrid sdf(GridDims(5, 5, 5));
    for (auto& v : sdf.values) v = 1.0f;
    sdf.values[sdf.dims.index(2, 2, 2)] = -1.0f;
    const auto mesh = marching_cubes(sdf);
    REQUIRE(!mesh.empty());
    CHECK(is_edge_manifold_closed(mesh));
    CHECK(euler_characteristic(mesh) == 2);
    CHECK(mesh.signed_volume() > 0.0);
}

TEST_CASE("marching_cubes vertices sit on the trilinear zero level") {
    const auto sdf = analytic_sphere(GridDims(12, 12, 12), 4.0);
    const auto mesh = marching_cubes(sdf);
    // Vertices lie on lattice edges; linear interpolation along the edge is
    // exact there, so the interpolated SDF must vanish.
    for (const auto& v : mesh.vertices) {
        const int h0 = int(std::floor(v.x - 0.5));
        const int w0 = int(std::floor(v.y - 0.5));
        const int d0 = int(std::floor(v.z - 0.5));
        double interp = 0.0;
        for (int dh = 0; dh < 2; ++dh)
            for (int dw = 0; dw < 2; ++dw)
                for (int dd = 0; dd < 2; ++dd) {
                    const double wx = dh ? v.x - 0.5 - h0 : 1.0 - (v.x - 0.5 - h0);
                    const double wy = dw ? v.y - 0.5 - w0 : 1.0 - (v.y - 0.5 - w0);
                    const double wz = dd ? v.z - 0.5 - d0 : 1.0 - (v.z - 0.5 - d0);
                    const int hh = std::min(h0 + dh, sdf.dims.h - 1);
                    const int ww = std::min(w0 + dw, sdf.dims.w - 1);
                    const int ddd = std::min(d0 + dd, sdf.dims.d - 1);
                    interp += wx * wy * wz * sdf.values[sdf.dims.index(hh, ww, ddd)];
                }
        CHECK(std::abs(interp) < 1e-6);
    }
}

TEST_CASE("sample_surface") {
    TriangleMesh tri;
    tri.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 2, 0}};
    tri.faces = {{0, 1, 2}};
    const auto pts = sample_surface(tri, 500, 42);
    for (const auto& p : pts) {
        CHECK(p.x >= -1e-12);
        CHECK(p.y >= -1e-12);
        CHECK(p.x + p.y <= 2.0 + 1e-12);
        CHECK(p.z == doctest::Approx(0.0));
    }
    CHECK(sample_surface(tri, 0, 1).empty());

    // Two triangles with areas 1 and 3: hit proportions 25%/75%.
    TriangleMesh two;
    two.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {10, 0, 0}, {12, 0, 0}, {10, 3, 0}};
    two.faces = {{0, 1, 2}, {3, 4, 5}};
    const std::size_t n = 10000;
    const auto samples = sample_surface(two, n, 7);
    std::size_t hits_small = 0;
    for (const auto& p : samples) hits_small += p.x < 5.0;
    const double frac = double(hits_small) / double(n);
    const double se = std::sqrt(0.25 * 0.75 / double(n));
    CHECK(std::abs(frac - 0.25) < 3.0 * se);
}

TEST_CASE("point_mesh_distance exact values") {
    const auto cube = unit_cube_mesh();
    CHECK(point_mesh_distance({{0, 0, 0}}, cube)[0] == doctest::Approx(0.0));
    CHECK(point_mesh_distance({{0.5, 0.5, 1.7}}, cube)[0] == doctest::Approx(0.7));
    CHECK(point_mesh_distance({{-1.0, 0.5, 0.5}}, cube)[0] == doctest::Approx(1.0));
}

TEST_CASE("point_mesh_distance matches brute force") {
    const auto sdf = analytic_sphere(GridDims(10, 10, 10), 3.0);
    const auto mesh = marching_cubes(sdf);
    REQUIRE(mesh.faces.size() >= 100);
    const auto pts = sample_surface(unit_cube_mesh(), 64, 5);
    std::vector<Vec3> queries;
    for (const auto& p : pts) queries.push_back(p * 9.0 + Vec3{0.5, 0.5, 0.5});
    const auto fast = point_mesh_distance(queries, mesh);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        double best = 1e300;
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            const auto t = mesh.triangle(f);
            best = std::min(best, point_triangle_distance(queries[i], t[0], t[1], t[2]));
        }
        CHECK(fast[i] == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("point_mesh_distance rigid invariance") {
    const auto cube = unit_cube_mesh();
    // Rotation by 90 degrees about z plus a translation.
    auto rigid = [](const Vec3& p) { return Vec3{-p.y + 3.0, p.x - 1.0, p.z + 2.0}; };
    TriangleMesh moved = cube;
    for (auto& v : moved.vertices) v = rigid(v);
    const std::vector<Vec3> pts = {{2.0, 0.3, -0.5}, {0.1, 0.2, 0.3}, {-1, -1, -1}};
    std::vector<Vec3> moved_pts;
    for (const auto& p : pts) moved_pts.push_back(rigid(p));
    const auto d0 = point_mesh_distance(pts, cube);
    const auto d1 = point_mesh_distance(moved_pts, moved);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(d0[i] == doctest::Approx(d1[i]).epsilon(1e-9));
    }
}

TEST_CASE("export and import round trip") {
    const auto cube = unit_cube_mesh();
    const auto dir = std::filesystem::temp_directory_path() / "voxshape_mesh_test";
    std::filesystem::create_directories(dir);

    for (auto format : {MeshFormat::kOff, MeshFormat::kObj}) {
        const auto path =
            (dir / (format == MeshFormat::kOff ? "cube.off" : "cube.obj")).string();
        export_mesh(cube, path, format);
        const auto back = import_mesh(path, format);
        REQUIRE(back.vertices.size() == 8);
        REQUIRE(back.faces.size() == 12);
        for (std::size_t i = 0; i < 8; ++i) {
            CHECK(back.vertices[i].x == doctest::Approx(cube.vertices[i].x));
            CHECK(back.vertices[i].y == doctest::Approx(cube.vertices[i].y));
            CHECK(back.vertices[i].z == doctest::Approx(cube.vertices[i].z));
        }
        CHECK(back.faces == cube.faces);
    }

    TriangleMesh empty;
    const auto path = (dir / "empty.off").string();
    export_mesh(empty, path, MeshFormat::kOff);
    const auto back = import_mesh(path, MeshFormat::kOff);
    CHECK(back.vertices.empty());
    CHECK(back.faces.empty());
}
