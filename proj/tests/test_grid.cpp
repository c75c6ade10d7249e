#include "voxshape/grid.hpp"

#include <cmath>

#include "doctest.h"
#include "voxshape/rng.hpp"

using namespace voxshape;

namespace {

// Exhaustive nearest-voxel search; the independent oracle for the separable
// distance transform.
SdfGrid brute_force_sdf(const OccupancyGrid& g) {
    SdfGrid out(g.dims);
    for (int h = 0; h < g.dims.h; ++h) {
        for (int w = 0; w < g.dims.w; ++w) {
            for (int d = 0; d < g.dims.d; ++d) {
                const bool occ = g.at(h, w, d) != 0;
                double best = 1e300;
                for (int h2 = 0; h2 < g.dims.h; ++h2)
                    for (int w2 = 0; w2 < g.dims.w; ++w2)
                        for (int d2 = 0; d2 < g.dims.d; ++d2) {
                            if ((g.at(h2, w2, d2) != 0) == occ) continue;
                            const double dist = std::sqrt(double(h - h2) * (h - h2) +
                                                          double(w - w2) * (w - w2) +
                                                          double(d - d2) * (d - d2));
                            best = std::min(best, dist);
                        }
                out.values[g.dims.index(h, w, d)] =
                    float(occ ? -(best - 1.0) : best);
            }
        }
    }
    return out;
}

OccupancyGrid hollow_cube_shell() {
    // 5x5x5 shell centered in an 8^3 grid.
    OccupancyGrid g(GridDims(8, 8, 8));
    for (int h = 2; h <= 6; ++h)
        for (int w = 2; w <= 6; ++w)
            for (int d = 2; d <= 6; ++d) {
                const bool boundary = h == 2 || h == 6 || w == 2 || w == 6 || d == 2 || d == 6;
                if (boundary) g.set(h, w, d, 1);
            }
    return g;
}

}  // namespace

TEST_CASE("fill_interior basics") {
    OccupancyGrid empty(GridDims(6, 6, 6));
    CHECK(fill_interior(empty).count_occupied() == 0);

    OccupancyGrid one(GridDims(6, 6, 6));
    one.set(3, 3, 3, 1);
    const auto filled = fill_interior(one);
    CHECK(filled.count_occupied() == 1);
    CHECK(filled.at(3, 3, 3) == 1);
}

TEST_CASE("fill_interior solidifies a hollow cube shell") {
    const auto shell = hollow_cube_shell();
    CHECK(shell.count_occupied() == 98);
    const auto filled = fill_interior(shell);
    CHECK(filled.count_occupied() == 125);
    // Geometric oracle: the filled region is exactly the solid 5^3 block.
    for (int h = 0; h < 8; ++h)
        for (int w = 0; w < 8; ++w)
            for (int d = 0; d < 8; ++d) {
                const bool inside =
                    h >= 2 && h <= 6 && w >= 2 && w <= 6 && d >= 2 && d <= 6;
                CHECK(filled.at(h, w, d) == (inside ? 1 : 0));
            }
}

TEST_CASE("fill_interior is idempotent") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        OccupancyGrid g(GridDims(7, 7, 7));
        for (auto& v : g.values) v = rng.bernoulli(0.3) ? 1 : 0;
        const auto once = fill_interior(g);
        const auto twice = fill_interior(once);
        CHECK(once.values == twice.values);
    }
}

TEST_CASE("signed_distance_transform single voxel") {
    OccupancyGrid g(GridDims(8, 8, 8));
    g.set(4, 4, 4, 1);
    const auto sdf = signed_distance_transform(g);
    CHECK(sdf.at(5, 4, 4) == doctest::Approx(1.0));
    CHECK(sdf.at(5, 5, 4) == doctest::Approx(std::sqrt(2.0)));
    CHECK(sdf.at(4, 4, 4) == doctest::Approx(0.0));
}

TEST_CASE("signed_distance_transform slab and errors") {
    OccupancyGrid slab(GridDims(8, 8, 8));
    for (int h = 3; h <= 4; ++h)
        for (int w = 0; w < 8; ++w)
            for (int d = 0; d < 8; ++d) slab.set(h, w, d, 1);
    const auto sdf = signed_distance_transform(slab);
    CHECK(sdf.at(5, 4, 4) == doctest::Approx(1.0));
    CHECK(sdf.at(2, 4, 4) == doctest::Approx(1.0));

    OccupancyGrid empty(GridDims(4, 4, 4));
    CHECK_THROWS_AS(signed_distance_transform(empty), DegenerateInputError);
    OccupancyGrid full(GridDims(4, 4, 4));
    for (auto& v : full.values) v = 1;
    CHECK_THROWS_AS(signed_distance_transform(full), DegenerateInputError);
}

TEST_CASE("signed_distance_transform matches exhaustive search") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = int(rng.uniform_int(2, 8));
        OccupancyGrid g(GridDims(n, n, n));
        std::int64_t occ = 0;
        for (auto& v : g.values) {
            v = rng.bernoulli(0.35) ? 1 : 0;
            occ += v;
        }
        if (occ == 0 || occ == g.dims.count()) continue;
        const auto fast = signed_distance_transform(g);
        const auto slow = brute_force_sdf(g);
        for (std::size_t i = 0; i < fast.values.size(); ++i) {
            CHECK(fast.values[i] == doctest::Approx(slow.values[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("log_tsdf values and properties") {
    CHECK(log_tsdf_value(0.0) == doctest::Approx(0.0));
    CHECK(log_tsdf_value(5.0) == doctest::Approx(std::log(6.0)));
    CHECK(log_tsdf_value(12.0) == doctest::Approx(std::log(6.0)));
    CHECK(log_tsdf_value(-1.0) == doctest::Approx(-std::log(2.0)));

    Rng rng(3);
    double prev_in = -20.0, prev_out = log_tsdf_value(prev_in);
    for (int i = 0; i < 200; ++i) {
        const double v = rng.uniform(-20.0, 20.0);
        CHECK(log_tsdf_value(-v) == doctest::Approx(-log_tsdf_value(v)));
        CHECK(std::abs(log_tsdf_value(v)) <= std::log(6.0) + 1e-12);
        CHECK(inverse_log_tsdf_value(log_tsdf_value(v)) ==
              doctest::Approx(std::clamp(v, -5.0, 5.0)).epsilon(1e-9));
        const double in = prev_in + rng.uniform(0.0, 0.5);
        const double out = log_tsdf_value(in);
        CHECK(out >= prev_out - 1e-12);
        prev_in = in;
        prev_out = out;
    }
}

TEST_CASE("occupancy_from_sdf") {
    SdfGrid pos(GridDims(3, 3, 3));
    for (auto& v : pos.values) v = 0.5f;
    CHECK(occupancy_from_sdf(pos).count_occupied() == 0);

    pos.values[pos.dims.index(1, 1, 1)] = 0.0f;
    CHECK(occupancy_from_sdf(pos).at(1, 1, 1) == 1);

    // Analytic sphere of radius 3 centered in an 8^3 grid.
    SdfGrid sphere(GridDims(8, 8, 8));
    const double c = 3.5;
    for (int h = 0; h < 8; ++h)
        for (int w = 0; w < 8; ++w)
            for (int d = 0; d < 8; ++d) {
                const double r = std::sqrt((h - c) * (h - c) + (w - c) * (w - c) +
                                           (d - c) * (d - c));
                sphere.values[sphere.dims.index(h, w, d)] = float(r - 3.0);
            }
    const auto occ = occupancy_from_sdf(sphere);
    for (int h = 0; h < 8; ++h)
        for (int w = 0; w < 8; ++w)
            for (int d = 0; d < 8; ++d) {
                const double r = std::sqrt((h - c) * (h - c) + (w - c) * (w - c) +
                                           (d - c) * (d - c));
                CHECK(occ.at(h, w, d) == (r <= 3.0 ? 1 : 0));
            }
}

TEST_CASE("sdf sign round-trips occupancy") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        OccupancyGrid g(GridDims(6, 6, 6));
        for (auto& v : g.values) v = rng.bernoulli(0.4) ? 1 : 0;
        const auto filled = fill_interior(g);
        const std::int64_t occ = filled.count_occupied();
        if (occ == 0 || occ == filled.dims.count()) continue;
        const auto back = occupancy_from_sdf(signed_distance_transform(filled));
        CHECK(back.values == filled.values);
    }
}

TEST_CASE("free_space_weights") {
    GridDims dims(2, 2, 2);
    std::vector<OccupancyGrid> refs(4, OccupancyGrid(dims));
    for (auto& r : refs) r.set(0, 0, 0, 1);       // occupied in all
    refs[0].set(1, 1, 1, 1);                      // occupied in 1 of 4
    refs[0].set(0, 1, 0, 1);                      // occupied in 2 of 4
    refs[1].set(0, 1, 0, 1);

    const auto w = free_space_weights(refs);
    CHECK(w.values[dims.index(0, 0, 0)] == doctest::Approx(0.0));
    CHECK(w.values[dims.index(1, 0, 0)] == doctest::Approx(1.0));
    CHECK(w.values[dims.index(0, 1, 0)] == doctest::Approx(0.5));
    CHECK(w.values[dims.index(1, 1, 1)] == doctest::Approx(0.75));

    CHECK_THROWS_AS(free_space_weights({}), DegenerateInputError);

    // Single reference: complement of its occupancy.
    const auto w1 = free_space_weights({refs[0]});
    for (std::int64_t i = 0; i < dims.count(); ++i) {
        CHECK(w1.values[i] == doctest::Approx(refs[0].values[i] ? 0.0 : 1.0));
    }
}

TEST_CASE("supervision_fraction") {
    Observation all_unknown(GridDims(4, 4, 4));
    CHECK(supervision_fraction(all_unknown) == doctest::Approx(0.0));

    Observation all_seen(GridDims(4, 4, 4));
    for (auto& s : all_seen.states) s = std::uint8_t(VoxelState::kFree);
    CHECK(supervision_fraction(all_seen) == doctest::Approx(1.0));

    Observation sparse(GridDims(24, 54, 24));
    for (int i = 0; i < 41; ++i) sparse.states[i * 7] = std::uint8_t(VoxelState::kOccupied);
    CHECK(supervision_fraction(sparse) == doctest::Approx(41.0 / 31104.0));
}
