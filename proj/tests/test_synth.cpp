#include "voxshape/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "voxshape/rng.hpp"
#include "voxshape/voxio.hpp"

using namespace voxshape;

namespace {

std::string temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "voxshape_synth" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("generate_primitive_shape contracts") {
    const auto families = {ShapeFamily::kCuboidUnion, ShapeFamily::kEllipsoidUnion,
                           ShapeFamily::kChairLike, ShapeFamily::kTableLike};
    for (auto family : families) {
        const auto mesh = generate_primitive_shape(family, 0);
        CHECK(is_edge_manifold_closed(mesh));
        for (const auto& v : mesh.vertices) {
            CHECK(v.x > 0.05);
            CHECK(v.x < 0.95);
            CHECK(v.y > 0.05);
            CHECK(v.y < 0.95);
            CHECK(v.z > 0.05);
            CHECK(v.z < 0.95);
        }
        // Determinism: same seed, same bytes.
        const auto again = generate_primitive_shape(family, 0);
        CHECK(again.vertices.size() == mesh.vertices.size());
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            CHECK(again.vertices[i].x == mesh.vertices[i].x);
            CHECK(again.vertices[i].y == mesh.vertices[i].y);
            CHECK(again.vertices[i].z == mesh.vertices[i].z);
        }
        CHECK(again.faces == mesh.faces);
    }
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto mesh = generate_primitive_shape(
            static_cast<ShapeFamily>(seed % 4), seed);
        CHECK(mesh.signed_volume() > 0.0);
    }
}

TEST_CASE("voxelize_mesh single triangle") {
    TriangleMesh tri;
    tri.vertices = {{3.2, 4.2, 5.2}, {3.7, 4.3, 5.3}, {3.4, 4.7, 5.6}};
    tri.faces = {{0, 1, 2}};
    const GridDims dims(8, 8, 8);
    const auto occ = voxelize_mesh(tri, dims);
    for (int h = 0; h < 8; ++h)
        for (int w = 0; w < 8; ++w)
            for (int d = 0; d < 8; ++d) {
                CHECK(occ.at(h, w, d) == ((h == 3 && w == 4 && d == 5) ? 1 : 0));
            }
}

TEST_CASE("voxelize_mesh axis-aligned cube shell") {
    // Cube [2.5, 5.5]^3: faces pass through the voxel shell [2..5]^3 minus
    // the strict interior.
    TriangleMesh cube;
    const Vec3 lo{2.5, 2.5, 2.5}, hi{5.5, 5.5, 5.5};
    for (int i = 0; i < 8; ++i) {
        cube.vertices.push_back(
            {i & 1 ? hi.x : lo.x, i & 2 ? hi.y : lo.y, i & 4 ? hi.z : lo.z});
    }
    const std::uint32_t f[12][3] = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6},
                                    {0, 1, 4}, {1, 5, 4}, {2, 6, 3}, {3, 6, 7},
                                    {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    for (const auto& t : f) cube.faces.push_back({t[0], t[1], t[2]});

    const auto occ = voxelize_mesh(cube, GridDims(8, 8, 8));
    for (int h = 0; h < 8; ++h)
        for (int w = 0; w < 8; ++w)
            for (int d = 0; d < 8; ++d) {
                const bool in_block = h >= 2 && h <= 5 && w >= 2 && w <= 5 && d >= 2 && d <= 5;
                const bool interior = h >= 3 && h <= 4 && w >= 3 && w <= 4 && d >= 3 && d <= 4;
                CHECK(occ.at(h, w, d) == ((in_block && !interior) ? 1 : 0));
            }

    TriangleMesh empty;
    CHECK(voxelize_mesh(empty, GridDims(4, 4, 4)).count_occupied() == 0);

    TriangleMesh outside;
    outside.vertices = {{-1, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    outside.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(voxelize_mesh(outside, GridDims(4, 4, 4)), DegenerateInputError);
}

TEST_CASE("render_depth basics") {
    const GridDims dims(9, 9, 9);
    const Camera cam = Camera::on_ring(dims, 0.0, 2.4, 16, 16, 2.5);

    OccupancyGrid empty(dims);
    const auto depth_empty = render_depth(empty, cam);
    for (double d : depth_empty.depths) CHECK(d == depth_empty.max_depth);

    OccupancyGrid one(dims);
    one.set(4, 4, 4, 1);
    const auto depth = render_depth(one, cam);
    // Camera sits at x = 4.5 + 2.4 * 9; the voxel's entry face is x = 5.
    const double expected = (4.5 + 2.4 * 9.0) - 5.0;
    const double center_depth = depth.at(8, 8);
    CHECK(std::abs(center_depth - expected) < 0.5);

    // Removing occupied voxels never decreases depth.
    OccupancyGrid dense(dims);
    Rng rng(5);
    for (auto& v : dense.values) v = rng.bernoulli(0.2) ? 1 : 0;
    OccupancyGrid sparse = dense;
    for (auto& v : sparse.values) {
        if (v && rng.bernoulli(0.5)) v = 0;
    }
    const auto d_dense = render_depth(dense, cam);
    const auto d_sparse = render_depth(sparse, cam);
    for (std::size_t i = 0; i < d_dense.depths.size(); ++i) {
        CHECK(d_sparse.depths[i] >= d_dense.depths[i] - 1e-12);
    }

    OccupancyGrid blocked(dims);
    for (auto& v : blocked.values) v = 1;
    Camera inside = cam;
    inside.eye = {4.5, 4.5, 4.5};
    CHECK_THROWS_AS(render_depth(blocked, inside), DegenerateInputError);
}

TEST_CASE("perturb_depth") {
    DepthMap depth(100, 1000, 1000.0);
    for (auto& d : depth.depths) d = 10.0;

    const auto dropped = perturb_depth(depth, {70.0, 1.0}, 1.0, 3);
    for (double d : dropped.depths) CHECK(d == 1000.0);

    const auto nearly_clean = perturb_depth(depth, {1e6, 0.0}, 1.0, 4);
    for (double d : nearly_clean.depths) CHECK(std::abs(d - 10.0) < 1e-3);

    const auto noisy = perturb_depth(depth, {70.0, 0.0}, 1.0, 5);
    double mean_added = 0.0;
    for (std::size_t i = 0; i < noisy.depths.size(); ++i) {
        mean_added += noisy.depths[i] - 10.0;
    }
    mean_added /= double(noisy.depths.size());
    const double se = (1.0 / 70.0) / std::sqrt(double(noisy.depths.size()));
    CHECK(std::abs(mean_added - 1.0 / 70.0) < 3.0 * se);
}

TEST_CASE("observation_from_depth single voxel scene") {
    const GridDims dims(9, 9, 9);
    const Camera cam = Camera::on_ring(dims, 0.0, 2.4, 16, 16, 2.5);
    OccupancyGrid one(dims);
    one.set(4, 4, 4, 1);
    const auto depth = render_depth(one, cam);
    const auto obs = observation_from_depth(depth, cam, dims);

    CHECK(obs.at(4, 4, 4) == VoxelState::kOccupied);
    // Straight path from the camera (+h side) to the voxel is carved free.
    for (int h = 5; h < 9; ++h) CHECK(obs.at(h, 4, 4) == VoxelState::kFree);
    // Directly behind the voxel stays unobserved.
    CHECK(obs.at(3, 4, 4) == VoxelState::kUnknown);
    CHECK(obs.count_state(VoxelState::kOccupied) == 1);

    // All-max-depth map: only free and unknown states.
    DepthMap all_max(cam.width, cam.height, depth.max_depth);
    const auto carved = observation_from_depth(all_max, cam, dims);
    CHECK(carved.count_state(VoxelState::kOccupied) == 0);
    CHECK(carved.count_state(VoxelState::kFree) > 0);
}

TEST_CASE("fuse_observations") {
    const GridDims dims(4, 4, 4);
    Observation a(dims), b(dims);
    a.set(1, 1, 1, VoxelState::kOccupied);
    a.set(2, 2, 2, VoxelState::kFree);
    b.set(3, 3, 3, VoxelState::kOccupied);
    b.set(2, 2, 2, VoxelState::kOccupied);

    const auto ab = fuse_observations({a, b});
    const auto ba = fuse_observations({b, a});
    CHECK(ab.states == ba.states);
    CHECK(ab.at(1, 1, 1) == VoxelState::kOccupied);
    CHECK(ab.at(3, 3, 3) == VoxelState::kOccupied);
    CHECK(ab.at(2, 2, 2) == VoxelState::kOccupied);  // occupied beats free
    CHECK(ab.at(0, 0, 0) == VoxelState::kUnknown);

    const auto solo = fuse_observations({a});
    CHECK(solo.states == a.states);
    CHECK_THROWS_AS(fuse_observations({}), DegenerateInputError);
}

TEST_CASE("build_dataset structure and determinism") {
    SynthConfig cfg;
    cfg.dims = GridDims(16, 16, 16);
    cfg.shapes_prior = 3;
    cfg.shapes_train = 2;
    cfg.shapes_test = 1;
    cfg.views = 4;
    cfg.seed = 11;

    const auto dir_a = temp_dir("run_a");
    const auto manifest = build_dataset(cfg, dir_a);
    CHECK(manifest.records.size() == std::size_t(6 * 4));
    CHECK(manifest.split_records("prior").size() == 12);
    CHECK(manifest.split_records("train").size() == 8);
    CHECK(manifest.split_records("test").size() == 4);
    CHECK(manifest.split_shapes("prior").size() == 3);

    // Prior shape ids disjoint from inference/test ids.
    for (const auto* p : manifest.split_records("prior")) {
        for (const auto* t : manifest.split_records("train")) {
            CHECK(p->shape_id != t->shape_id);
        }
        for (const auto* t : manifest.split_records("test")) {
            CHECK(p->shape_id != t->shape_id);
        }
    }

    const auto dir_b = temp_dir("run_b");
    build_dataset(cfg, dir_b);
    CHECK(slurp(dir_a + "/manifest.tsv") == slurp(dir_b + "/manifest.tsv"));
    for (const auto& rec : manifest.records) {
        CHECK(slurp(dir_a + "/" + rec.obs_path) == slurp(dir_b + "/" + rec.obs_path));
    }
    CHECK(slurp(dir_a + "/shapes/s0000_sdf.voxg") ==
          slurp(dir_b + "/shapes/s0000_sdf.voxg"));

    // Round trip through the manifest reader.
    const auto loaded = read_manifest(dir_a + "/manifest.tsv");
    CHECK(loaded.records.size() == manifest.records.size());
    CHECK(loaded.seed == cfg.seed);
    CHECK(loaded.dims == cfg.dims);
    CHECK(loaded.mean_supervision == doctest::Approx(manifest.mean_supervision));
    CHECK(loaded.records.back().obs_path == manifest.records.back().obs_path);
}

TEST_CASE("noiseless observations are consistent with ground truth") {
    SynthConfig cfg;
    cfg.dims = GridDims(16, 16, 16);
    cfg.shapes_prior = 2;
    cfg.shapes_train = 2;
    cfg.shapes_test = 1;
    cfg.views = 3;
    cfg.seed = 21;

    const auto dir = temp_dir("consistency");
    const auto manifest = build_dataset(cfg, dir);
    for (const auto& rec : manifest.records) {
        const auto occ = read_occupancy(manifest.resolve(rec.occ_path));
        const auto obs = read_observation(manifest.resolve(rec.obs_path));
        const auto sdf = read_sdf(manifest.resolve(rec.sdf_path));
        const auto round = occupancy_from_sdf(sdf);
        CHECK(round.values == occ.values);
        for (std::int64_t i = 0; i < cfg.dims.count(); ++i) {
            if (obs.states[i] == std::uint8_t(VoxelState::kOccupied)) {
                CHECK(occ.values[i] == 1);
            } else if (obs.states[i] == std::uint8_t(VoxelState::kFree)) {
                CHECK(occ.values[i] == 0);
            }
        }
        CHECK(obs.count_observed() > 0);
    }
    CHECK(manifest.mean_supervision < 0.25);
    CHECK(manifest.mean_supervision > 0.0);
}

TEST_CASE("noisy dataset has lower supervision than clean") {
    SynthConfig clean;
    clean.dims = GridDims(16, 16, 16);
    clean.shapes_prior = 2;
    clean.shapes_train = 2;
    clean.shapes_test = 1;
    clean.views = 3;
    clean.seed = 31;
    SynthConfig noisy = clean;
    noisy.noise = true;

    const auto m_clean = build_dataset(clean, temp_dir("sup_clean"));
    const auto m_noisy = build_dataset(noisy, temp_dir("sup_noisy"));
    CHECK(m_noisy.mean_supervision < m_clean.mean_supervision);
}

TEST_CASE("fuse_k wires fused views into the manifest") {
    SynthConfig cfg;
    cfg.dims = GridDims(16, 16, 16);
    cfg.shapes_prior = 1;
    cfg.shapes_train = 1;
    cfg.shapes_test = 1;
    cfg.views = 4;
    cfg.fuse_k = 3;
    cfg.seed = 41;

    const auto manifest = build_dataset(cfg, temp_dir("fused"));
    for (const auto& rec : manifest.records) {
        int commas = 0;
        for (char c : rec.fused_views) commas += c == ',';
        CHECK(commas == 2);
    }
    // A fused observation is a superset of its first source view.
    SynthConfig single = cfg;
    single.fuse_k = 1;
    const auto m1 = build_dataset(single, temp_dir("unfused"));
    const auto fused_obs =
        read_observation(manifest.resolve(manifest.records[0].obs_path));
    const auto single_obs = read_observation(m1.resolve(m1.records[0].obs_path));
    CHECK(fused_obs.count_observed() >= single_obs.count_observed());
}
