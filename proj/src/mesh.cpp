#include "voxshape/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "voxshape/mc_tables.hpp"

namespace voxshape {

double TriangleMesh::area() const {
    double a = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto t = triangle(f);
        a += 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
    }
    return a;
}

double TriangleMesh::signed_volume() const {
    double vol = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto t = triangle(f);
        vol += t[0].dot(t[1].cross(t[2])) / 6.0;
    }
    return vol;
}

namespace {

// Corner offsets in Bourke's ordering: 0-3 bottom (d), 4-7 top (d+1).
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                     {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Values exactly at the iso level are nudged inside, which is equivalent to
// extracting at iso+eps: it removes corner hits and the zero-area slivers
// they would create.
constexpr double kIsoNudge = 1e-6;

}  // namespace

TriangleMesh marching_cubes(const SdfGrid& sdf, double iso) {
    const GridDims& dims = sdf.dims;
    TriangleMesh mesh;
    if (dims.h < 2 || dims.w < 2 || dims.d < 2) return mesh;

    auto value = [&](int h, int w, int d) -> double {
        const double v = sdf.values[dims.index(h, w, d)];
        return v == iso ? iso - kIsoNudge : v;
    };

    // Canonical lattice-edge key: lattice point index * 3 + axis. Welds the
    // interpolated vertex between adjacent cells.
    std::unordered_map<std::int64_t, std::uint32_t> edge_vertex;
    auto vertex_on_edge = [&](int h, int w, int d, int axis, double v0,
                              double v1) -> std::uint32_t {
        const std::int64_t key = dims.index(h, w, d) * 3 + axis;
        const auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        double t = (iso - v0) / (v1 - v0);
        t = std::clamp(t, 0.0, 1.0);
        Vec3 p{h + 0.5, w + 0.5, d + 0.5};
        if (axis == 0) p.x += t;
        if (axis == 1) p.y += t;
        if (axis == 2) p.z += t;
        const auto idx = std::uint32_t(mesh.vertices.size());
        mesh.vertices.push_back(p);
        edge_vertex.emplace(key, idx);
        return idx;
    };

    double val[8];
    std::uint32_t vert[12];
    for (int h = 0; h + 1 < dims.h; ++h) {
        for (int w = 0; w + 1 < dims.w; ++w) {
            for (int d = 0; d + 1 < dims.d; ++d) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    val[c] = value(h + kCorner[c][0], w + kCorner[c][1], d + kCorner[c][2]);
                    if (val[c] < iso) cube |= 1 << c;
                }
                const int edges = kMcEdgeTable[cube];
                if (edges == 0) continue;
                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1 << e))) continue;
                    const int a = kEdgeCorners[e][0];
                    const int b = kEdgeCorners[e][1];
                    // The varying axis and the lower corner identify the edge.
                    int axis = 0;
                    for (int k = 0; k < 3; ++k) {
                        if (kCorner[a][k] != kCorner[b][k]) axis = k;
                    }
                    const int lo[3] = {h + std::min(kCorner[a][0], kCorner[b][0]),
                                       w + std::min(kCorner[a][1], kCorner[b][1]),
                                       d + std::min(kCorner[a][2], kCorner[b][2])};
                    const bool a_is_lo = kCorner[a][axis] <= kCorner[b][axis];
                    vert[e] = vertex_on_edge(lo[0], lo[1], lo[2], axis,
                                             a_is_lo ? val[a] : val[b],
                                             a_is_lo ? val[b] : val[a]);
                }
                for (int t = 0; kMcTriTable[cube][t] != -1; t += 3) {
                    // Reversed winding so normals point toward positive values.
                    mesh.faces.push_back({vert[kMcTriTable[cube][t]],
                                          vert[kMcTriTable[cube][t + 2]],
                                          vert[kMcTriTable[cube][t + 1]]});
                }
            }
        }
    }
    return mesh;
}

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n,
                                 std::uint64_t seed) {
    if (mesh.empty()) throw DegenerateInputError("sample_surface: empty mesh");
    std::vector<double> cum(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto t = mesh.triangle(f);
        total += 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
        cum[f] = total;
    }
    if (total <= 0.0) throw DegenerateInputError("sample_surface: zero-area mesh");

    Rng rng(seed);
    std::vector<Vec3> points;
    points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = rng.uniform() * total;
        const std::size_t f =
            std::min(std::size_t(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin()),
                     mesh.faces.size() - 1);
        const auto t = mesh.triangle(f);
        const double sq = std::sqrt(rng.uniform());
        const double u = 1.0 - sq;
        const double v = rng.uniform() * sq;
        points.push_back(t[0] * u + t[1] * v + t[2] * (1.0 - u - v));
    }
    return points;
}

struct MeshDistanceIndex::Impl {
    struct Node {
        Aabb box;
        int left = -1, right = -1;
        int first = 0, count = 0;  // leaf triangle range
    };

    std::vector<std::array<Vec3, 3>> tris;
    std::vector<int> order;
    std::vector<Node> nodes;

    int build(int first, int count) {
        Node node;
        node.first = first;
        node.count = count;
        for (int i = first; i < first + count; ++i) {
            for (const auto& p : tris[order[i]]) node.box.expand(p);
        }
        const int idx = int(nodes.size());
        nodes.push_back(node);
        if (count <= 4) return idx;

        const Vec3 ext = node.box.hi - node.box.lo;
        const int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
        const int mid = first + count / 2;
        std::nth_element(order.begin() + first, order.begin() + mid,
                         order.begin() + first + count, [&](int a, int b) {
                             const Vec3 ca = (tris[a][0] + tris[a][1] + tris[a][2]) / 3.0;
                             const Vec3 cb = (tris[b][0] + tris[b][1] + tris[b][2]) / 3.0;
                             return ca[axis] < cb[axis];
                         });
        const int l = build(first, mid - first);
        const int r = build(mid, first + count - mid);
        nodes[idx].left = l;
        nodes[idx].right = r;
        nodes[idx].count = 0;
        return idx;
    }

    void query(int idx, const Vec3& p, double& best) const {
        const Node& node = nodes[idx];
        if (node.box.sq_distance(p) > best * best) return;
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const auto& t = tris[order[i]];
                best = std::min(best, point_triangle_distance(p, t[0], t[1], t[2]));
            }
            return;
        }
        const double dl = nodes[node.left].box.sq_distance(p);
        const double dr = nodes[node.right].box.sq_distance(p);
        if (dl <= dr) {
            query(node.left, p, best);
            query(node.right, p, best);
        } else {
            query(node.right, p, best);
            query(node.left, p, best);
        }
    }
};

MeshDistanceIndex::MeshDistanceIndex(const TriangleMesh& mesh) : impl_(new Impl) {
    if (mesh.empty()) throw DegenerateInputError("MeshDistanceIndex: empty mesh");
    impl_->tris.reserve(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) impl_->tris.push_back(mesh.triangle(f));
    impl_->order.resize(impl_->tris.size());
    for (std::size_t i = 0; i < impl_->order.size(); ++i) impl_->order[i] = int(i);
    impl_->nodes.reserve(2 * impl_->tris.size());
    impl_->build(0, int(impl_->tris.size()));
}

MeshDistanceIndex::~MeshDistanceIndex() = default;
MeshDistanceIndex::MeshDistanceIndex(MeshDistanceIndex&&) noexcept = default;
MeshDistanceIndex& MeshDistanceIndex::operator=(MeshDistanceIndex&&) noexcept = default;

double MeshDistanceIndex::distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    // Seed with one concrete triangle so box pruning has a bound.
    const auto& t0 = impl_->tris[impl_->order[0]];
    best = point_triangle_distance(p, t0[0], t0[1], t0[2]);
    impl_->query(0, p, best);
    return best;
}

std::vector<double> point_mesh_distance(const std::vector<Vec3>& points,
                                        const TriangleMesh& mesh) {
    MeshDistanceIndex index(mesh);
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(index.distance(p));
    return out;
}

void export_mesh(const TriangleMesh& mesh, const std::string& path, MeshFormat format) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    char buf[128];
    if (format == MeshFormat::kOff) {
        os << "OFF\n" << mesh.vertices.size() << " " << mesh.faces.size() << " 0\n";
        for (const auto& v : mesh.vertices) {
            std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", v.x, v.y, v.z);
            os << buf;
        }
        for (const auto& f : mesh.faces) {
            os << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
        }
    } else {
        for (const auto& v : mesh.vertices) {
            std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
            os << buf;
        }
        for (const auto& f : mesh.faces) {
            os << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

TriangleMesh import_mesh(const std::string& path, MeshFormat format) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open: " + path);
    TriangleMesh mesh;
    if (format == MeshFormat::kOff) {
        std::string header;
        is >> header;
        if (header != "OFF") throw InputError("not an OFF file: " + path);
        std::size_t nv = 0, nf = 0, ne = 0;
        is >> nv >> nf >> ne;
        mesh.vertices.resize(nv);
        for (auto& v : mesh.vertices) is >> v.x >> v.y >> v.z;
        mesh.faces.resize(nf);
        for (auto& f : mesh.faces) {
            int k = 0;
            is >> k >> f[0] >> f[1] >> f[2];
            if (k != 3) throw InputError("non-triangle face in " + path);
        }
        if (!is) throw InputError("truncated OFF file: " + path);
    } else {
        std::string line;
        while (std::getline(is, line)) {
            std::istringstream ls(line);
            std::string tag;
            ls >> tag;
            if (tag == "v") {
                Vec3 v;
                ls >> v.x >> v.y >> v.z;
                mesh.vertices.push_back(v);
            } else if (tag == "f") {
                std::array<std::uint32_t, 3> f{};
                for (auto& i : f) {
                    std::string tok;
                    ls >> tok;
                    i = std::uint32_t(std::stoul(tok.substr(0, tok.find('/')))) - 1;
                }
                mesh.faces.push_back(f);
            }
        }
    }
    return mesh;
}

bool is_edge_manifold_closed(const TriangleMesh& mesh) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
    for (const auto& f : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            const std::uint32_t a = f[e];
            const std::uint32_t b = f[(e + 1) % 3];
            count[{std::min(a, b), std::max(a, b)}] += 1;
        }
    }
    for (const auto& [edge, c] : count) {
        if (c != 2) return false;
    }
    return !mesh.faces.empty();
}

long euler_characteristic(const TriangleMesh& mesh) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
    std::vector<std::uint8_t> used(mesh.vertices.size(), 0);
    for (const auto& f : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            used[f[e]] = 1;
            const std::uint32_t a = f[e];
            const std::uint32_t b = f[(e + 1) % 3];
            edges[{std::min(a, b), std::max(a, b)}] = 1;
        }
    }
    long v = 0;
    for (auto u : used) v += u;
    return v - long(edges.size()) + long(mesh.faces.size());
}

}  // namespace voxshape
