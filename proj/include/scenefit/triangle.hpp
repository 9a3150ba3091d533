#pragma once

#include "scenefit/core.hpp"

#include <algorithm>
#include <cmath>

namespace scenefit {

/// Closest point on triangle (a,b,c) to p, with barycentric coords of the result.
/// Ericson, Real-Time Collision Detection, 5.1.5.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                                      Vec3* barycentric = nullptr) {
    auto result = [&](double u, double v, double w, const Vec3& q) {
        if (barycentric) *barycentric = Vec3(u, v, w);
        return q;
    };
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return result(1, 0, 0, a);

    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return result(0, 1, 0, b);

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        double v = d1 / (d1 - d3);
        return result(1 - v, v, 0, a + v * ab);
    }

    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return result(0, 0, 1, c);

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        double w = d2 / (d2 - d6);
        return result(1 - w, 0, w, a + w * ac);
    }

    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return result(0, 1 - w, w, b + w * (c - b));
    }

    double denom = 1.0 / (va + vb + vc);
    double v = vb * denom, w = vc * denom;
    return result(1 - v - w, v, w, a + ab * v + ac * w);
}

namespace detail {

// Signed distances of a triangle's vertices to the other triangle's plane,
// with the intersection interval on the shared line. Möller 1997.
inline bool tri_tri_interval(const Vec3& v0, const Vec3& v1, const Vec3& v2, double d0, double d1,
                             double d2, double p0, double p1, double p2, double* t0, double* t1) {
    // project onto the intersection line; compute the interval where the triangle crosses the plane
    auto edge_cross = [](double pa, double pb, double da, double db) {
        return pa + (pb - pa) * da / (da - db);
    };
    double a, b;
    if (d0 * d1 > 0) {  // v2 on the other side
        a = edge_cross(p0, p2, d0, d2);
        b = edge_cross(p1, p2, d1, d2);
    } else if (d0 * d2 > 0) {
        a = edge_cross(p0, p1, d0, d1);
        b = edge_cross(p2, p1, d2, d1);
    } else if (d1 * d2 > 0 || d0 != 0) {
        a = edge_cross(p1, p0, d1, d0);
        b = edge_cross(p2, p0, d2, d0);
    } else if (d1 != 0) {
        a = edge_cross(p1, p0, d1, d0);
        b = edge_cross(p1, p2, d1, d2);
    } else if (d2 != 0) {
        a = edge_cross(p2, p0, d2, d0);
        b = edge_cross(p2, p1, d2, d1);
    } else {
        return false;  // coplanar, handled separately
    }
    *t0 = std::min(a, b);
    *t1 = std::max(a, b);
    return true;
}

inline bool point_in_tri_2d(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
    auto cross2 = [](const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); };
    double d1 = cross2(b - a, p - a);
    double d2 = cross2(c - b, p - b);
    double d3 = cross2(a - c, p - c);
    bool has_neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
    bool has_pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
    return !(has_neg && has_pos);
}

inline bool segments_intersect_2d(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
    auto cross2 = [](const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); };
    double d1 = cross2(q2 - q1, p1 - q1);
    double d2 = cross2(q2 - q1, p2 - q1);
    double d3 = cross2(p2 - p1, q1 - p1);
    double d4 = cross2(p2 - p1, q2 - p1);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    auto on_segment = [&](const Vec2& a, const Vec2& b, const Vec2& p, double d) {
        return d == 0 && p.x() >= std::min(a.x(), b.x()) && p.x() <= std::max(a.x(), b.x()) &&
               p.y() >= std::min(a.y(), b.y()) && p.y() <= std::max(a.y(), b.y());
    };
    return on_segment(q1, q2, p1, d1) || on_segment(q1, q2, p2, d2) || on_segment(p1, p2, q1, d3) ||
           on_segment(p1, p2, q2, d4);
}

inline bool coplanar_tri_tri(const Vec3& n, const Vec3& a0, const Vec3& a1, const Vec3& a2,
                             const Vec3& b0, const Vec3& b1, const Vec3& b2) {
    // project to the dominant axis plane
    int axis;
    n.cwiseAbs().maxCoeff(&axis);
    int u = (axis + 1) % 3, v = (axis + 2) % 3;
    auto proj = [&](const Vec3& p) { return Vec2(p[u], p[v]); };
    Vec2 A0 = proj(a0), A1 = proj(a1), A2 = proj(a2);
    Vec2 B0 = proj(b0), B1 = proj(b1), B2 = proj(b2);
    const Vec2 ea[3][2] = {{A0, A1}, {A1, A2}, {A2, A0}};
    const Vec2 eb[3][2] = {{B0, B1}, {B1, B2}, {B2, B0}};
    for (auto& sa : ea)
        for (auto& sb : eb)
            if (segments_intersect_2d(sa[0], sa[1], sb[0], sb[1])) return true;
    return point_in_tri_2d(A0, B0, B1, B2) || point_in_tri_2d(B0, A0, A1, A2);
}

}  // namespace detail

/// Möller-style triangle-triangle intersection. Coplanar overlap counts as intersecting.
inline bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0,
                                const Vec3& b1, const Vec3& b2) {
    Vec3 nb = (b1 - b0).cross(b2 - b0);
    double da0 = nb.dot(a0 - b0), da1 = nb.dot(a1 - b0), da2 = nb.dot(a2 - b0);
    const double eps = 1e-14;
    if (std::abs(da0) < eps) da0 = 0;
    if (std::abs(da1) < eps) da1 = 0;
    if (std::abs(da2) < eps) da2 = 0;
    if ((da0 > 0 && da1 > 0 && da2 > 0) || (da0 < 0 && da1 < 0 && da2 < 0)) return false;

    Vec3 na = (a1 - a0).cross(a2 - a0);
    double db0 = na.dot(b0 - a0), db1 = na.dot(b1 - a0), db2 = na.dot(b2 - a0);
    if (std::abs(db0) < eps) db0 = 0;
    if (std::abs(db1) < eps) db1 = 0;
    if (std::abs(db2) < eps) db2 = 0;
    if ((db0 > 0 && db1 > 0 && db2 > 0) || (db0 < 0 && db1 < 0 && db2 < 0)) return false;

    if (da0 == 0 && da1 == 0 && da2 == 0)
        return detail::coplanar_tri_tri(nb, a0, a1, a2, b0, b1, b2);

    Vec3 dir = na.cross(nb);
    int axis;
    dir.cwiseAbs().maxCoeff(&axis);
    double pa0 = a0[axis], pa1 = a1[axis], pa2 = a2[axis];
    double pb0 = b0[axis], pb1 = b1[axis], pb2 = b2[axis];

    double s0, s1, t0, t1;
    if (!detail::tri_tri_interval(a0, a1, a2, da0, da1, da2, pa0, pa1, pa2, &s0, &s1)) return false;
    if (!detail::tri_tri_interval(b0, b1, b2, db0, db1, db2, pb0, pb1, pb2, &t0, &t1)) return false;
    return s1 >= t0 && t1 >= s0;
}

}  // namespace scenefit
