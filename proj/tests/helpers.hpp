#pragma once

// Shared helpers for the test suite: procedural meshes, brute-force geometry
// oracles, and finite-difference utilities.

#include <scenefit/bvh.hpp>
#include <scenefit/mesh.hpp>
#include <scenefit/triangle.hpp>

#include <cmath>
#include <functional>
#include <random>

namespace testutil {

using scenefit::Faces;
using scenefit::Points;
using scenefit::TriMesh;
using scenefit::Vec3;

/// Axis-aligned box mesh with outward-facing triangles.
inline TriMesh make_box(const Vec3& lo, const Vec3& hi) {
    TriMesh mesh;
    mesh.vertices.resize(8, 3);
    for (int i = 0; i < 8; ++i)
        mesh.vertices.row(i) << (i & 1 ? hi.x() : lo.x()), (i & 2 ? hi.y() : lo.y()),
            (i & 4 ? hi.z() : lo.z());
    const int quads[6][4] = {
        {0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6},
    };
    mesh.faces.resize(12, 3);
    for (int q = 0; q < 6; ++q) {
        mesh.faces.row(2 * q) << quads[q][0], quads[q][1], quads[q][2];
        mesh.faces.row(2 * q + 1) << quads[q][0], quads[q][2], quads[q][3];
    }
    return mesh;
}

/// Watertight UV sphere with a per-direction radius function.
inline TriMesh make_uv_sphere(int rings, int cols,
                              const std::function<double(double, double)>& radius =
                                  [](double, double) { return 1.0; }) {
    TriMesh mesh;
    // poles + interior rings
    const int n_ring = rings - 1;
    mesh.vertices.resize(2 + n_ring * cols, 3);
    auto pos = [&](double theta, double phi) {
        double r = radius(theta, phi);
        return Vec3(r * std::sin(theta) * std::cos(phi), r * std::cos(theta),
                    r * std::sin(theta) * std::sin(phi));
    };
    mesh.vertices.row(0) = pos(0, 0).transpose();
    mesh.vertices.row(1) = pos(M_PI, 0).transpose();
    auto vid = [&](int ring, int col) { return 2 + ring * cols + (col % cols); };
    for (int i = 0; i < n_ring; ++i) {
        double theta = M_PI * (i + 1) / rings;
        for (int c = 0; c < cols; ++c)
            mesh.vertices.row(vid(i, c)) = pos(theta, 2 * M_PI * c / cols).transpose();
    }
    std::vector<Eigen::Vector3i> faces;
    for (int c = 0; c < cols; ++c) {
        faces.emplace_back(0, vid(0, c + 1), vid(0, c));
        faces.emplace_back(1, vid(n_ring - 1, c), vid(n_ring - 1, c + 1));
    }
    for (int i = 0; i + 1 < n_ring; ++i)
        for (int c = 0; c < cols; ++c) {
            faces.emplace_back(vid(i, c), vid(i, c + 1), vid(i + 1, c));
            faces.emplace_back(vid(i, c + 1), vid(i + 1, c + 1), vid(i + 1, c));
        }
    mesh.faces.resize(static_cast<int>(faces.size()), 3);
    for (size_t f = 0; f < faces.size(); ++f) mesh.faces.row(static_cast<int>(f)) = faces[f].transpose();
    return mesh;
}

/// Random smooth closed "blob": a UV sphere with low-frequency radial bumps.
inline TriMesh make_blob(unsigned seed, int rings = 14, int cols = 20) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double a1 = 0.15 * uni(rng), a2 = 0.12 * uni(rng), a3 = 0.1 * uni(rng);
    double p1 = M_PI * uni(rng), p2 = M_PI * uni(rng);
    double scale = 0.5 + 0.3 * std::abs(uni(rng));
    auto radius = [=](double theta, double phi) {
        return scale * (1.0 + a1 * std::sin(2 * theta + p1) + a2 * std::cos(3 * phi + p2) +
                        a3 * std::sin(theta) * std::cos(2 * phi));
    };
    return make_uv_sphere(rings, cols, radius);
}

/// Unsigned distance by exhaustive scan over every triangle.
inline double brute_force_distance(const TriMesh& mesh, const Vec3& p, Vec3* closest = nullptr) {
    double best = std::numeric_limits<double>::max();
    for (int f = 0; f < mesh.num_faces(); ++f) {
        Vec3 q = scenefit::closest_point_on_triangle(p, mesh.face_vertex(f, 0), mesh.face_vertex(f, 1),
                                                     mesh.face_vertex(f, 2));
        double d = (q - p).norm();
        if (d < best) {
            best = d;
            if (closest) *closest = q;
        }
    }
    return best;
}

/// Ray-triangle intersection (Moller-Trumbore). Returns the ray parameter or
/// a negative value on miss; near-degenerate hits are flagged unreliable.
inline double ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c,
                           bool* reliable) {
    const double eps = 1e-10;
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 h = d.cross(e2);
    double det = e1.dot(h);
    if (std::abs(det) < eps) return -1.0;
    double inv = 1.0 / det;
    Vec3 s = o - a;
    double u = inv * s.dot(h);
    Vec3 q = s.cross(e1);
    double v = inv * d.dot(q);
    double t = inv * e2.dot(q);
    if (u < -eps || u > 1 + eps || v < -eps || u + v > 1 + eps || t < eps) return -1.0;
    // hits near an edge or the ray origin are ambiguous for parity counting
    if (u < eps || v < eps || u + v > 1 - eps) *reliable = false;
    return t;
}

/// Inside test by ray-casting parity, independent of pseudo-normal signing.
/// Retries with fresh random directions when a ray grazes an edge.
inline bool brute_force_inside(const TriMesh& mesh, const Vec3& p, std::mt19937& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int attempt = 0; attempt < 32; ++attempt) {
        Vec3 d(gauss(rng), gauss(rng), gauss(rng));
        if (d.norm() < 1e-6) continue;
        d.normalize();
        bool reliable = true;
        int crossings = 0;
        for (int f = 0; f < mesh.num_faces(); ++f) {
            double t = ray_triangle(p, d, mesh.face_vertex(f, 0), mesh.face_vertex(f, 1),
                                    mesh.face_vertex(f, 2), &reliable);
            if (t > 0) ++crossings;
        }
        if (reliable) return (crossings % 2) == 1;
    }
    // every direction grazed an edge: fall back to the last parity
    return false;
}

/// Signed distance oracle: brute-force nearest distance, ray-parity sign.
inline double brute_force_signed_distance(const TriMesh& mesh, const Vec3& p, std::mt19937& rng) {
    double d = brute_force_distance(mesh, p);
    return brute_force_inside(mesh, p, rng) ? -d : d;
}

}  // namespace testutil
