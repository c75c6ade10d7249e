#include "voxshape/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace voxshape {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

GridDims::GridDims(int h_, int w_, int d_) : h(h_), w(w_), d(d_) {
    if (h <= 0 || w <= 0 || d <= 0) {
        throw DegenerateInputError("grid dims must be positive");
    }
    if (h > 256 || w > 256 || d > 256) {
        throw DegenerateInputError("grid dims exceed the 256 per-axis limit");
    }
}

std::int64_t OccupancyGrid::count_occupied() const {
    std::int64_t n = 0;
    for (auto v : values) n += (v != 0);
    return n;
}

std::int64_t Observation::count_observed() const {
    std::int64_t n = 0;
    for (auto s : states) n += (s != static_cast<std::uint8_t>(VoxelState::kUnknown));
    return n;
}

std::int64_t Observation::count_state(VoxelState s) const {
    std::int64_t n = 0;
    for (auto v : states) n += (v == static_cast<std::uint8_t>(s));
    return n;
}

double log_tsdf_value(double v) {
    const double a = std::min(kLogTsdfTruncation, std::abs(v));
    const double m = std::log1p(a);
    return v < 0.0 ? -m : m;
}

double inverse_log_tsdf_value(double v) {
    const double m = std::expm1(std::abs(v));
    return v < 0.0 ? -m : m;
}

OccupancyGrid fill_interior(const OccupancyGrid& surface) {
    const GridDims dims = surface.dims;
    std::vector<std::uint8_t> outside(dims.count(), 0);
    std::vector<std::int64_t> queue;
    queue.reserve(dims.count() / 4 + 1);

    auto try_push = [&](int h, int w, int d) {
        const std::int64_t i = dims.index(h, w, d);
        if (!outside[i] && surface.values[i] == 0) {
            outside[i] = 1;
            queue.push_back(i);
        }
    };

    for (int h = 0; h < dims.h; ++h) {
        for (int w = 0; w < dims.w; ++w) {
            for (int d = 0; d < dims.d; ++d) {
                if (h == 0 || h == dims.h - 1 || w == 0 || w == dims.w - 1 || d == 0 ||
                    d == dims.d - 1) {
                    try_push(h, w, d);
                }
            }
        }
    }

    // BFS over unoccupied 6-connected voxels reachable from the boundary.
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const std::int64_t i = queue[head];
        const int d = static_cast<int>(i % dims.d);
        const int w = static_cast<int>((i / dims.d) % dims.w);
        const int h = static_cast<int>(i / (std::int64_t(dims.d) * dims.w));
        if (h > 0) try_push(h - 1, w, d);
        if (h < dims.h - 1) try_push(h + 1, w, d);
        if (w > 0) try_push(h, w - 1, d);
        if (w < dims.w - 1) try_push(h, w + 1, d);
        if (d > 0) try_push(h, w, d - 1);
        if (d < dims.d - 1) try_push(h, w, d + 1);
    }

    OccupancyGrid filled(dims);
    for (std::int64_t i = 0; i < dims.count(); ++i) {
        filled.values[i] = outside[i] ? 0 : 1;
    }
    return filled;
}

namespace {

// 1D squared-distance lower envelope (Felzenszwalb & Huttenlocher).
// Parabolas with infinite height are skipped on insertion.
void edt_1d(const double* f, double* out, int n, int* v, double* z) {
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        double s = 0.0;
        while (k >= 0) {
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -kInf : s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        std::fill(out, out + n, kInf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double dq = q - v[j];
        out[q] = dq * dq + f[v[j]];
    }
}

void edt_pass(std::vector<double>& g, const GridDims& dims, int axis) {
    const int n = axis == 0 ? dims.h : axis == 1 ? dims.w : dims.d;
    std::vector<double> f(n), out(n);
    std::vector<int> v(n);
    std::vector<double> z(n + 1);

    auto run_line = [&](auto&& at) {
        for (int q = 0; q < n; ++q) f[q] = at(q);
        edt_1d(f.data(), out.data(), n, v.data(), z.data());
        for (int q = 0; q < n; ++q) at(q) = out[q];
    };

    if (axis == 0) {
        for (int w = 0; w < dims.w; ++w)
            for (int d = 0; d < dims.d; ++d)
                run_line([&](int q) -> double& { return g[dims.index(q, w, d)]; });
    } else if (axis == 1) {
        for (int h = 0; h < dims.h; ++h)
            for (int d = 0; d < dims.d; ++d)
                run_line([&](int q) -> double& { return g[dims.index(h, q, d)]; });
    } else {
        for (int h = 0; h < dims.h; ++h)
            for (int w = 0; w < dims.w; ++w)
                run_line([&](int q) -> double& { return g[dims.index(h, w, q)]; });
    }
}

}  // namespace

std::vector<double> squared_distance_to_mask(const GridDims& dims,
                                             const std::vector<std::uint8_t>& mask) {
    std::vector<double> g(dims.count());
    for (std::int64_t i = 0; i < dims.count(); ++i) g[i] = mask[i] ? 0.0 : kInf;
    edt_pass(g, dims, 2);
    edt_pass(g, dims, 1);
    edt_pass(g, dims, 0);
    return g;
}

SdfGrid signed_distance_transform(const OccupancyGrid& filled) {
    const std::int64_t occ = filled.count_occupied();
    if (occ == 0 || occ == filled.dims.count()) {
        throw DegenerateInputError(
            "signed_distance_transform needs both occupied and unoccupied voxels");
    }
    std::vector<std::uint8_t> inv(filled.values.size());
    for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = filled.values[i] ? 0 : 1;

    const auto d_occ = squared_distance_to_mask(filled.dims, filled.values);
    const auto d_free = squared_distance_to_mask(filled.dims, inv);

    SdfGrid sdf(filled.dims);
    for (std::int64_t i = 0; i < filled.dims.count(); ++i) {
        sdf.values[i] = filled.values[i]
                            ? static_cast<float>(-(std::sqrt(d_free[i]) - 1.0))
                            : static_cast<float>(std::sqrt(d_occ[i]));
    }
    return sdf;
}

LogTsdfGrid log_tsdf(const SdfGrid& sdf) {
    LogTsdfGrid out(sdf.dims);
    for (std::size_t i = 0; i < sdf.values.size(); ++i) {
        out.values[i] = static_cast<float>(log_tsdf_value(sdf.values[i]));
    }
    return out;
}

SdfGrid inverse_log_tsdf(const LogTsdfGrid& grid) {
    SdfGrid out(grid.dims);
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        out.values[i] = static_cast<float>(inverse_log_tsdf_value(grid.values[i]));
    }
    return out;
}

OccupancyGrid occupancy_from_sdf(const SdfGrid& sdf) {
    OccupancyGrid occ(sdf.dims);
    for (std::size_t i = 0; i < sdf.values.size(); ++i) {
        occ.values[i] = sdf.values[i] <= 0.0f ? 1 : 0;
    }
    return occ;
}

WeightGrid free_space_weights(const std::vector<OccupancyGrid>& references) {
    if (references.empty()) {
        throw DegenerateInputError("free_space_weights needs at least one reference");
    }
    const GridDims dims = references.front().dims;
    std::vector<double> acc(dims.count(), 0.0);
    for (const auto& ref : references) {
        if (!(ref.dims == dims)) {
            throw DegenerateInputError("free_space_weights references disagree on dims");
        }
        for (std::int64_t i = 0; i < dims.count(); ++i) acc[i] += ref.values[i];
    }
    WeightGrid w(dims);
    const double inv_m = 1.0 / static_cast<double>(references.size());
    for (std::int64_t i = 0; i < dims.count(); ++i) {
        w.values[i] = static_cast<float>(1.0 - acc[i] * inv_m);
    }
    return w;
}

double supervision_fraction(const Observation& obs) {
    return static_cast<double>(obs.count_observed()) /
           static_cast<double>(obs.dims.count());
}

}  // namespace voxshape
