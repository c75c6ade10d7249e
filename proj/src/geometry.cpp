#include "voxshape/geometry.hpp"

#include <algorithm>

namespace voxshape {

// Region-based closest point on a triangle (Ericson, Real-Time Collision
// Detection, 5.1.5), then the distance to it.
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;

    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return (p - (a + ab * v + ac * w)).norm();
}

namespace {

bool axis_test(const Vec3& axis, const Vec3& v0, const Vec3& v1, const Vec3& v2,
               const Vec3& half) {
    const double p0 = axis.dot(v0);
    const double p1 = axis.dot(v1);
    const double p2 = axis.dot(v2);
    const double r = half.x * std::abs(axis.x) + half.y * std::abs(axis.y) +
                     half.z * std::abs(axis.z);
    const double mn = std::min({p0, p1, p2});
    const double mx = std::max({p0, p1, p2});
    return mn <= r && mx >= -r;
}

}  // namespace

// Akenine-Moller separating axis test: 3 box axes, the triangle normal and
// 9 edge cross products.
bool triangle_box_overlap(const Vec3& box_center, const Vec3& box_half, const Vec3& a,
                          const Vec3& b, const Vec3& c) {
    const Vec3 v0 = a - box_center;
    const Vec3 v1 = b - box_center;
    const Vec3 v2 = c - box_center;

    const Vec3 lo = min3(v0, min3(v1, v2));
    const Vec3 hi = max3(v0, max3(v1, v2));
    if (lo.x > box_half.x || hi.x < -box_half.x) return false;
    if (lo.y > box_half.y || hi.y < -box_half.y) return false;
    if (lo.z > box_half.z || hi.z < -box_half.z) return false;

    const Vec3 e0 = v1 - v0;
    const Vec3 e1 = v2 - v1;
    const Vec3 e2 = v0 - v2;

    const Vec3 normal = e0.cross(e1);
    const double d = normal.dot(v0);
    const double r = box_half.x * std::abs(normal.x) + box_half.y * std::abs(normal.y) +
                     box_half.z * std::abs(normal.z);
    if (d > r || d < -r) return false;

    const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const Vec3& ax : axes) {
        for (const Vec3& e : {e0, e1, e2}) {
            const Vec3 cr = ax.cross(e);
            if (cr.norm() < 1e-12) continue;
            if (!axis_test(cr, v0, v1, v2, box_half)) return false;
        }
    }
    return true;
}

}  // namespace voxshape
