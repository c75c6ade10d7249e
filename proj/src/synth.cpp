#include "voxshape/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "voxshape/parallel.hpp"
#include "voxshape/rng.hpp"
#include "voxshape/voxio.hpp"

namespace voxshape {

namespace fs = std::filesystem;

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                       int height, double focal) {
    Camera cam;
    cam.eye = eye;
    cam.width = width;
    cam.height = height;
    cam.focal = focal;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    const Vec3 f = (target - eye).normalized();
    const Vec3 r = up.cross(f).normalized();
    const Vec3 u = f.cross(r);
    // Columns of cam->world rotation: right, image-down, forward.
    cam.rot = {r.x, u.x, f.x, r.y, u.y, f.y, r.z, u.z, f.z};
    return cam;
}

Camera Camera::on_ring(const GridDims& dims, double azimuth, double radius_factor,
                       int width, int height, double focal_factor) {
    const double span = std::max({dims.h, dims.w, dims.d});
    const Vec3 center{dims.h / 2.0, dims.w / 2.0, dims.d / 2.0};
    const Vec3 eye = center + Vec3{std::cos(azimuth), 0.0, std::sin(azimuth)} *
                                  (radius_factor * span);
    return look_at(eye, center, {0.0, 1.0, 0.0}, width, height,
                   focal_factor * std::max(width, height));
}

Vec3 Camera::pixel_ray(int u, int v) const {
    const Vec3 d{(u + 0.5 - cx) / focal, (v + 0.5 - cy) / focal, 1.0};
    const Vec3 n = d.normalized();
    return {rot[0] * n.x + rot[1] * n.y + rot[2] * n.z,
            rot[3] * n.x + rot[4] * n.y + rot[5] * n.z,
            rot[6] * n.x + rot[7] * n.y + rot[8] * n.z};
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Amanatides-Woo stepping over half-open voxels [i, i+1). Calls
// visit(h, w, d, t_in, t_out); traversal stops when visit returns false or
// the ray leaves the grid. Both the renderer and the carver use this helper
// so recorded depths land in exactly the voxel they were generated from.
template <class F>
void traverse_grid(const GridDims& dims, const Vec3& origin, const Vec3& dir, F&& visit) {
    const double n[3] = {double(dims.h), double(dims.w), double(dims.d)};
    const double o[3] = {origin.x, origin.y, origin.z};
    const double v[3] = {dir.x, dir.y, dir.z};

    double t0 = 0.0, t1 = kInf;
    for (int a = 0; a < 3; ++a) {
        if (v[a] == 0.0) {
            if (o[a] < 0.0 || o[a] >= n[a]) return;
            continue;
        }
        const double ta = (0.0 - o[a]) / v[a];
        const double tb = (n[a] - o[a]) / v[a];
        t0 = std::max(t0, std::min(ta, tb));
        t1 = std::min(t1, std::max(ta, tb));
    }
    if (t1 <= t0) return;

    const double px = o[0] + t0 * v[0];
    const double py = o[1] + t0 * v[1];
    const double pz = o[2] + t0 * v[2];
    int idx[3] = {std::clamp(int(std::floor(px)), 0, dims.h - 1),
                  std::clamp(int(std::floor(py)), 0, dims.w - 1),
                  std::clamp(int(std::floor(pz)), 0, dims.d - 1)};
    int step[3];
    double tmax[3], tdelta[3];
    const double p[3] = {px, py, pz};
    for (int a = 0; a < 3; ++a) {
        if (v[a] > 0.0) {
            step[a] = 1;
            tdelta[a] = 1.0 / v[a];
            tmax[a] = t0 + (idx[a] + 1 - p[a]) / v[a];
        } else if (v[a] < 0.0) {
            step[a] = -1;
            tdelta[a] = -1.0 / v[a];
            tmax[a] = t0 + (idx[a] - p[a]) / v[a];
        } else {
            step[a] = 0;
            tdelta[a] = kInf;
            tmax[a] = kInf;
        }
    }

    double t_cur = t0;
    while (t_cur < t1) {
        int axis = 0;
        if (tmax[1] < tmax[axis]) axis = 1;
        if (tmax[2] < tmax[axis]) axis = 2;
        const double t_next = std::min(tmax[axis], t1);
        if (t_next > t_cur) {
            if (!visit(idx[0], idx[1], idx[2], t_cur, t_next)) return;
        }
        idx[axis] += step[axis];
        if (idx[axis] < 0 || idx[axis] >= (axis == 0 ? dims.h : axis == 1 ? dims.w : dims.d)) {
            return;
        }
        t_cur = tmax[axis];
        tmax[axis] += tdelta[axis];
    }
}

void append_box(TriangleMesh& mesh, const Vec3& lo, const Vec3& hi) {
    const auto base = std::uint32_t(mesh.vertices.size());
    for (int i = 0; i < 8; ++i) {
        mesh.vertices.push_back({i & 1 ? hi.x : lo.x, i & 2 ? hi.y : lo.y,
                                 i & 4 ? hi.z : lo.z});
    }
    static const std::uint32_t f[12][3] = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6},
                                           {0, 1, 4}, {1, 5, 4}, {2, 6, 3}, {3, 6, 7},
                                           {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    for (const auto& t : f) mesh.faces.push_back({base + t[0], base + t[1], base + t[2]});
}

void append_ellipsoid(TriangleMesh& mesh, const Vec3& center, const Vec3& radii) {
    // Icosahedron subdivided twice, then scaled per axis.
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                               {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                               {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& v : verts) v = v.normalized();
    std::vector<std::array<std::uint32_t, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

    for (int pass = 0; pass < 2; ++pass) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            const auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const auto idx = std::uint32_t(verts.size());
            verts.push_back(((verts[a] + verts[b]) * 0.5).normalized());
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<std::uint32_t, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const auto ab = mid(f[0], f[1]);
            const auto bc = mid(f[1], f[2]);
            const auto ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    const auto base = std::uint32_t(mesh.vertices.size());
    for (const auto& v : verts) {
        mesh.vertices.push_back(center + Vec3{v.x * radii.x, v.y * radii.y, v.z * radii.z});
    }
    for (const auto& f : faces) {
        mesh.faces.push_back({base + f[0], base + f[1], base + f[2]});
    }
}

void append_four_legs(TriangleMesh& mesh, Rng& rng, double top_y, double half_w,
                      double half_d) {
    const double leg = rng.uniform(0.03, 0.06);
    for (int sx = -1; sx <= 1; sx += 2) {
        for (int sz = -1; sz <= 1; sz += 2) {
            const double cx = 0.5 + sx * (half_w - leg);
            const double cz = 0.5 + sz * (half_d - leg);
            append_box(mesh, {cx - leg, 0.0, cz - leg}, {cx + leg, top_y, cz + leg});
        }
    }
}

void rotate_yaw(TriangleMesh& mesh, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (auto& v : mesh.vertices) {
        const double x = v.x - 0.5;
        const double z = v.z - 0.5;
        v.x = 0.5 + c * x - s * z;
        v.z = 0.5 + s * x + c * z;
    }
}

// Uniformly rescales + recenters so the AABB sits inside the safe box, with
// a small random offset. Keeps shapes clear of the grid border so the
// translation augmentation cannot push them out.
void fit_into_domain(TriangleMesh& mesh, Rng& rng, double lo, double hi) {
    Aabb box;
    for (const auto& v : mesh.vertices) box.expand(v);
    const Vec3 ext = box.hi - box.lo;
    const double max_ext = std::max({ext.x, ext.y, ext.z, 1e-9});
    const double scale = std::min(1.0, (hi - lo) / max_ext);
    const Vec3 center = box.center();
    const double slack = (hi - lo) - max_ext * scale;
    const Vec3 jitter{rng.uniform(-0.5, 0.5) * slack, rng.uniform(-0.5, 0.5) * slack,
                      rng.uniform(-0.5, 0.5) * slack};
    for (auto& v : mesh.vertices) {
        v = (v - center) * scale + Vec3{0.5, 0.5, 0.5} + jitter;
    }
}

}  // namespace

TriangleMesh generate_primitive_shape(ShapeFamily family, std::uint64_t seed) {
    Rng rng(seed);
    TriangleMesh mesh;
    switch (family) {
        case ShapeFamily::kCuboidUnion: {
            const int n = int(rng.uniform_int(2, 4));
            append_box(mesh, {0.5 - rng.uniform(0.15, 0.3), 0.5 - rng.uniform(0.1, 0.25),
                              0.5 - rng.uniform(0.15, 0.3)},
                       {0.5 + rng.uniform(0.15, 0.3), 0.5 + rng.uniform(0.1, 0.25),
                        0.5 + rng.uniform(0.15, 0.3)});
            for (int i = 1; i < n; ++i) {
                const Vec3 c{rng.uniform(0.35, 0.65), rng.uniform(0.35, 0.65),
                             rng.uniform(0.35, 0.65)};
                const Vec3 half{rng.uniform(0.08, 0.2), rng.uniform(0.08, 0.2),
                                rng.uniform(0.08, 0.2)};
                append_box(mesh, c - half, c + half);
            }
            break;
        }
        case ShapeFamily::kEllipsoidUnion: {
            const int n = int(rng.uniform_int(1, 3));
            append_ellipsoid(mesh, {0.5, 0.5, 0.5},
                             {rng.uniform(0.18, 0.32), rng.uniform(0.18, 0.32),
                              rng.uniform(0.18, 0.32)});
            for (int i = 1; i < n; ++i) {
                append_ellipsoid(mesh,
                                 {rng.uniform(0.4, 0.6), rng.uniform(0.4, 0.6),
                                  rng.uniform(0.4, 0.6)},
                                 {rng.uniform(0.1, 0.2), rng.uniform(0.1, 0.2),
                                  rng.uniform(0.1, 0.2)});
            }
            break;
        }
        case ShapeFamily::kChairLike: {
            const double seat_y = rng.uniform(0.38, 0.5);
            const double seat_t = rng.uniform(0.05, 0.09);
            const double half_w = rng.uniform(0.2, 0.3);
            const double half_d = rng.uniform(0.2, 0.28);
            append_box(mesh, {0.5 - half_w, seat_y - seat_t, 0.5 - half_d},
                       {0.5 + half_w, seat_y, 0.5 + half_d});
            append_four_legs(mesh, rng, seat_y - seat_t, half_w, half_d);
            const double back_t = rng.uniform(0.04, 0.08);
            const double back_h = rng.uniform(0.3, 0.45);
            append_box(mesh, {0.5 - half_w, seat_y, 0.5 + half_d - back_t},
                       {0.5 + half_w, seat_y + back_h, 0.5 + half_d});
            break;
        }
        case ShapeFamily::kTableLike: {
            const double top_y = rng.uniform(0.45, 0.6);
            const double top_t = rng.uniform(0.04, 0.08);
            const double half_w = rng.uniform(0.25, 0.38);
            const double half_d = rng.uniform(0.22, 0.34);
            append_box(mesh, {0.5 - half_w, top_y - top_t, 0.5 - half_d},
                       {0.5 + half_w, top_y, 0.5 + half_d});
            append_four_legs(mesh, rng, top_y - top_t, half_w, half_d);
            break;
        }
    }
    rotate_yaw(mesh, rng.uniform(-M_PI / 6.0, M_PI / 6.0));
    fit_into_domain(mesh, rng, 0.2, 0.8);
    return mesh;
}

TriangleMesh scale_to_grid(const TriangleMesh& normalized, const GridDims& dims) {
    TriangleMesh out = normalized;
    for (auto& v : out.vertices) {
        v.x *= dims.h;
        v.y *= dims.w;
        v.z *= dims.d;
    }
    return out;
}

OccupancyGrid voxelize_mesh(const TriangleMesh& mesh, const GridDims& dims) {
    OccupancyGrid occ(dims);
    constexpr double kEps = 1e-9;
    for (const auto& v : mesh.vertices) {
        if (v.x < -kEps || v.x > dims.h + kEps || v.y < -kEps || v.y > dims.w + kEps ||
            v.z < -kEps || v.z > dims.d + kEps) {
            throw DegenerateInputError("voxelize_mesh: mesh outside grid domain");
        }
    }
    const Vec3 half{0.5, 0.5, 0.5};
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto t = mesh.triangle(f);
        Aabb box;
        for (const auto& p : t) box.expand(p);
        const int h0 = std::max(0, int(std::floor(box.lo.x)));
        const int h1 = std::min(dims.h - 1, int(std::floor(box.hi.x)));
        const int w0 = std::max(0, int(std::floor(box.lo.y)));
        const int w1 = std::min(dims.w - 1, int(std::floor(box.hi.y)));
        const int d0 = std::max(0, int(std::floor(box.lo.z)));
        const int d1 = std::min(dims.d - 1, int(std::floor(box.hi.z)));
        for (int h = h0; h <= h1; ++h)
            for (int w = w0; w <= w1; ++w)
                for (int d = d0; d <= d1; ++d) {
                    if (occ.at(h, w, d)) continue;
                    const Vec3 center{h + 0.5, w + 0.5, d + 0.5};
                    if (triangle_box_overlap(center, half, t[0], t[1], t[2])) {
                        occ.set(h, w, d, 1);
                    }
                }
    }
    return occ;
}

DepthMap render_depth(const OccupancyGrid& occ, const Camera& cam) {
    const GridDims& dims = occ.dims;
    const Vec3 center{dims.h / 2.0, dims.w / 2.0, dims.d / 2.0};
    const double span = std::max({dims.h, dims.w, dims.d});
    const double max_depth = (cam.eye - center).norm() + 2.0 * span;

    const int eh = int(std::floor(cam.eye.x));
    const int ew = int(std::floor(cam.eye.y));
    const int ed = int(std::floor(cam.eye.z));
    if (dims.contains(eh, ew, ed) && occ.at(eh, ew, ed)) {
        throw DegenerateInputError("render_depth: camera inside an occupied voxel");
    }

    DepthMap depth(cam.width, cam.height, max_depth);
    for (int v = 0; v < cam.height; ++v) {
        for (int u = 0; u < cam.width; ++u) {
            const Vec3 dir = cam.pixel_ray(u, v);
            double hit = max_depth;
            traverse_grid(dims, cam.eye, dir,
                          [&](int h, int w, int d, double t_in, double) {
                              if (occ.at(h, w, d)) {
                                  hit = t_in;
                                  return false;
                              }
                              return true;
                          });
            depth.at(u, v) = hit;
        }
    }
    return depth;
}

DepthMap perturb_depth(const DepthMap& depth, const NoiseParams& np, double span_voxels,
                       std::uint64_t seed) {
    if (np.exp_rate <= 0.0) throw DegenerateInputError("perturb_depth: exp_rate <= 0");
    Rng rng(seed);
    DepthMap out = depth;
    for (auto& d : out.depths) {
        if (d >= depth.max_depth) continue;
        if (rng.bernoulli(np.drop_prob)) {
            d = depth.max_depth;
        } else {
            d = std::min(depth.max_depth, d + rng.exponential(np.exp_rate) * span_voxels);
        }
    }
    return out;
}

Observation observation_from_depth(const DepthMap& depth, const Camera& cam,
                                   const GridDims& dims) {
    Observation obs(dims);
    auto mark_free = [&](int h, int w, int d) {
        auto& s = obs.states[dims.index(h, w, d)];
        if (s != std::uint8_t(VoxelState::kOccupied)) s = std::uint8_t(VoxelState::kFree);
    };
    for (int v = 0; v < cam.height; ++v) {
        for (int u = 0; u < cam.width; ++u) {
            const double t_point = depth.at(u, v);
            const Vec3 dir = cam.pixel_ray(u, v);
            const bool no_return = t_point >= depth.max_depth;
            traverse_grid(dims, cam.eye, dir,
                          [&](int h, int w, int d, double t_in, double t_out) {
                              if (no_return) {
                                  mark_free(h, w, d);
                                  return true;
                              }
                              if (t_in <= t_point && t_point < t_out) {
                                  obs.states[dims.index(h, w, d)] =
                                      std::uint8_t(VoxelState::kOccupied);
                                  return false;
                              }
                              if (t_out <= t_point) {
                                  mark_free(h, w, d);
                                  return true;
                              }
                              return false;  // point lies before this voxel
                          });
        }
    }
    return obs;
}

Observation fuse_observations(const std::vector<Observation>& obs) {
    if (obs.empty()) throw DegenerateInputError("fuse_observations: empty list");
    const GridDims dims = obs.front().dims;
    Observation out(dims);
    for (const auto& o : obs) {
        if (!(o.dims == dims)) {
            throw DegenerateInputError("fuse_observations: dims mismatch");
        }
        for (std::int64_t i = 0; i < dims.count(); ++i) {
            const auto s = o.states[i];
            auto& t = out.states[i];
            if (s == std::uint8_t(VoxelState::kOccupied)) {
                t = std::uint8_t(VoxelState::kOccupied);
            } else if (s == std::uint8_t(VoxelState::kFree) &&
                       t == std::uint8_t(VoxelState::kUnknown)) {
                t = std::uint8_t(VoxelState::kFree);
            }
        }
    }
    return out;
}

std::string DatasetManifest::resolve(const std::string& rel_path) const {
    if (base_dir.empty() || rel_path.empty() || rel_path.front() == '/') return rel_path;
    return (fs::path(base_dir) / rel_path).string();
}

std::vector<const SampleRecord*> DatasetManifest::split_records(
    const std::string& split) const {
    std::vector<const SampleRecord*> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(&r);
    }
    return out;
}

std::vector<const SampleRecord*> DatasetManifest::split_shapes(
    const std::string& split) const {
    std::vector<const SampleRecord*> out;
    for (const auto& r : records) {
        if (r.split == split && r.view_id == 0) out.push_back(&r);
    }
    return out;
}

namespace {

constexpr std::uint64_t kTagShape = 0x53484150u;  // shape stream
constexpr std::uint64_t kTagView = 0x56494557u;   // view stream

struct ShapeJob {
    int index = 0;
    std::string id;
    std::string split;
    ShapeFamily family = ShapeFamily::kCuboidUnion;
    std::vector<double> supervision;  // per final observation record
};

}  // namespace

DatasetManifest build_dataset(const SynthConfig& config, const std::string& out_dir,
                              int threads) {
    if (config.shapes_prior <= 0 || config.shapes_train <= 0 || config.shapes_test <= 0) {
        throw ConfigError("build_dataset: all split sizes must be positive");
    }
    if (config.views <= 0) throw ConfigError("build_dataset: views must be positive");
    if (config.fuse_k < 1 || config.fuse_k > config.views) {
        throw ConfigError("build_dataset: fuse_k must be in [1, views]");
    }

    fs::create_directories(fs::path(out_dir) / "shapes");
    fs::create_directories(fs::path(out_dir) / "obs");

    const int total = config.shapes_prior + config.shapes_train + config.shapes_test;
    std::vector<ShapeJob> jobs(total);
    for (int i = 0; i < total; ++i) {
        jobs[i].index = i;
        char buf[16];
        std::snprintf(buf, sizeof buf, "s%04d", i);
        jobs[i].id = buf;
        jobs[i].split = i < config.shapes_prior ? "prior"
                        : i < config.shapes_prior + config.shapes_train ? "train"
                                                                        : "test";
        jobs[i].family = static_cast<ShapeFamily>(i % 4);
        jobs[i].supervision.resize(config.views, 0.0);
    }

    const int depth_w = config.depth_w > 0 ? config.depth_w : (config.noise ? 8 : 24);
    const int depth_h = config.depth_h > 0 ? config.depth_h : (config.noise ? 10 : 32);
    const double span = std::max({config.dims.h, config.dims.w, config.dims.d});

    parallel_for(total, threads, [&](int i) {
        ShapeJob& job = jobs[i];
        const auto shape_seed = derive_seed(config.seed, kTagShape, std::uint64_t(i));
        const auto mesh =
            scale_to_grid(generate_primitive_shape(job.family, shape_seed), config.dims);
        const auto surface = voxelize_mesh(mesh, config.dims);
        const auto filled = fill_interior(surface);
        const auto sdf = signed_distance_transform(filled);
        const auto logtsdf = log_tsdf(sdf);

        const auto stem = (fs::path(out_dir) / "shapes" / job.id).string();
        write_occupancy(stem + "_occ.voxg", filled);
        write_sdf(stem + "_sdf.voxg", sdf);
        write_logtsdf(stem + "_logtsdf.voxg", logtsdf);

        // Projected silhouette bounds seen from the ring: horizontal extent
        // in the h-d plane, vertical along w. Half a voxel of padding.
        Aabb mesh_box;
        for (const auto& v : mesh.vertices) mesh_box.expand(v);
        const Vec3 ext = mesh_box.hi - mesh_box.lo;
        const double r_horiz = 0.5 * std::hypot(ext.x, ext.z) + 0.5;
        const double r_vert = 0.5 * ext.y + 0.5;

        std::vector<Observation> views(config.views);
        for (int v = 0; v < config.views; ++v) {
            const auto view_seed =
                derive_seed(config.seed, kTagView, std::uint64_t(i), std::uint64_t(v));
            Rng view_rng(view_seed);
            const double azimuth = view_rng.uniform(0.0, 2.0 * M_PI);
            const Vec3 center{config.dims.h / 2.0, config.dims.w / 2.0,
                              config.dims.d / 2.0};
            const Vec3 eye = center + Vec3{std::cos(azimuth), 0.0, std::sin(azimuth)} *
                                          (config.ring_radius_factor * span);
            const double dist = (eye - center).norm();
            // Zoom so the frame spans frame_cover times the silhouette bound
            // on the tighter axis.
            const double f_w = (depth_w / 2.0) * dist / (config.frame_cover * r_horiz);
            const double f_h = (depth_h / 2.0) * dist / (config.frame_cover * r_vert);
            const Camera cam = Camera::look_at(eye, center, {0.0, 1.0, 0.0}, depth_w,
                                               depth_h, std::max(f_w, f_h));
            DepthMap depth = render_depth(filled, cam);
            if (config.noise) {
                depth = perturb_depth(depth, {config.exp_rate, config.drop_prob}, span,
                                      view_rng.next_u64());
            }
            views[v] = observation_from_depth(depth, cam, config.dims);
        }
        for (int v = 0; v < config.views; ++v) {
            Observation final_obs;
            if (config.fuse_k == 1) {
                final_obs = views[v];
            } else {
                std::vector<Observation> group;
                for (int k = 0; k < config.fuse_k; ++k) {
                    group.push_back(views[(v + k) % config.views]);
                }
                final_obs = fuse_observations(group);
            }
            char buf[16];
            std::snprintf(buf, sizeof buf, "_v%02d", v);
            write_observation((fs::path(out_dir) / "obs" / (job.id + buf + "_obs.voxg")).string(),
                              final_obs);
            job.supervision[v] = supervision_fraction(final_obs);
        }
    });

    DatasetManifest manifest;
    manifest.dims = config.dims;
    manifest.seed = config.seed;
    manifest.base_dir = out_dir;
    double sup_sum = 0.0;
    std::int64_t sup_n = 0;
    for (const auto& job : jobs) {
        for (int v = 0; v < config.views; ++v) {
            SampleRecord rec;
            rec.shape_id = job.id;
            rec.pose_id = 0;
            rec.view_id = v;
            rec.split = job.split;
            rec.occ_path = "shapes/" + job.id + "_occ.voxg";
            rec.sdf_path = "shapes/" + job.id + "_sdf.voxg";
            rec.logtsdf_path = "shapes/" + job.id + "_logtsdf.voxg";
            char buf[16];
            std::snprintf(buf, sizeof buf, "_v%02d", v);
            rec.obs_path = "obs/" + job.id + buf + "_obs.voxg";
            if (config.fuse_k > 1) {
                std::string fused;
                for (int k = 0; k < config.fuse_k; ++k) {
                    if (k) fused += ',';
                    fused += std::to_string((v + k) % config.views);
                }
                rec.fused_views = fused;
            } else {
                rec.fused_views = std::to_string(v);
            }
            manifest.records.push_back(std::move(rec));
            sup_sum += job.supervision[v];
            ++sup_n;
        }
    }
    manifest.mean_supervision = sup_sum / double(sup_n);
    write_manifest((fs::path(out_dir) / "manifest.tsv").string(), manifest);
    return manifest;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    char buf[64];
    os << "#voxshape-manifest 1\n";
    os << "#dims " << manifest.dims.h << " " << manifest.dims.w << " " << manifest.dims.d
       << "\n";
    os << "#seed " << manifest.seed << "\n";
    std::snprintf(buf, sizeof buf, "%.6f", manifest.mean_supervision);
    os << "#mean_supervision " << buf << "\n";
    os << "#fields shape_id pose_id view_id split occ sdf logtsdf obs fused_views\n";
    for (const auto& r : manifest.records) {
        os << r.shape_id << '\t' << r.pose_id << '\t' << r.view_id << '\t' << r.split
           << '\t' << r.occ_path << '\t' << r.sdf_path << '\t' << r.logtsdf_path << '\t'
           << r.obs_path << '\t' << r.fused_views << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open: " + path);
    DatasetManifest manifest;
    manifest.base_dir = fs::path(path).parent_path().string();
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key;
            ls >> key;
            if (key == "dims") {
                int h = 0, w = 0, d = 0;
                ls >> h >> w >> d;
                manifest.dims = GridDims(h, w, d);
            } else if (key == "seed") {
                ls >> manifest.seed;
            } else if (key == "mean_supervision") {
                ls >> manifest.mean_supervision;
            }
            continue;
        }
        std::istringstream ls(line);
        SampleRecord rec;
        if (!(ls >> rec.shape_id >> rec.pose_id >> rec.view_id >> rec.split >>
              rec.occ_path >> rec.sdf_path >> rec.logtsdf_path >> rec.obs_path >>
              rec.fused_views)) {
            throw InputError("malformed manifest record in " + path);
        }
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

}  // namespace voxshape
