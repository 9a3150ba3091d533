#pragma once

#include "scenefit/bvh.hpp"
#include "scenefit/mesh.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/SVD>

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace scenefit {

/// Pinhole camera. Extrinsics map camera frame -> world frame:
///   p_world = R_c * p_cam + t_c.
struct CameraModel {
    double fx = 1000, fy = 1000;
    double cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat3 rotation = Mat3::Identity();   // R_c
    Vec3 translation = Vec3::Zero();    // t_c

    Vec3 world_to_camera(const Vec3& p_world) const {
        return rotation.transpose() * (p_world - translation);
    }
    Vec3 camera_to_world(const Vec3& p_cam) const { return rotation * p_cam + translation; }

    /// Camera position in world coordinates.
    Vec3 center() const { return translation; }

    /// Unit view direction in world coordinates toward p.
    Vec3 view_dir(const Vec3& p_world) const { return (p_world - center()).normalized(); }
};

struct PointCloud {
    Points points;
    VecX confidence;  // optional, empty = all 1

    int size() const { return static_cast<int>(points.rows()); }
    Vec3 point(int i) const { return points.row(i).transpose(); }
};

/// Pinhole projection. Returns nullopt for points at or behind the camera plane.
inline std::optional<Vec2> project(const CameraModel& cam, const Vec3& p_world) {
    Vec3 pc = cam.world_to_camera(p_world);
    if (pc.z() <= 1e-9) return std::nullopt;
    return Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
}

/// Jacobian of the projected pixel w.r.t. the world point (2x3).
inline Eigen::Matrix<double, 2, 3> project_jacobian(const CameraModel& cam, const Vec3& p_world) {
    Vec3 pc = cam.world_to_camera(p_world);
    double z = pc.z();
    Eigen::Matrix<double, 2, 3> d_pix_d_cam;
    d_pix_d_cam << cam.fx / z, 0, -cam.fx * pc.x() / (z * z),
                   0, cam.fy / z, -cam.fy * pc.y() / (z * z);
    return d_pix_d_cam * cam.rotation.transpose();
}

/// Back-project a pixel to the ray point at the given camera-frame depth.
inline Vec3 back_project(const CameraModel& cam, const Vec2& pixel, double depth) {
    Vec3 pc((pixel.x() - cam.cx) / cam.fx * depth, (pixel.y() - cam.cy) / cam.fy * depth, depth);
    return cam.camera_to_world(pc);
}

/// Least-squares rigid transform (R, t) with dst ~= R*src + t, rotation via SVD
/// of the cross-covariance with a reflection guard.
inline void rigid_from_correspondences(const Points& src, const Points& dst, Mat3* R, Vec3* t) {
    if (src.rows() != dst.rows() || src.rows() < 3)
        throw GeometryError("rigid_from_correspondences: need >= 3 paired points");
    Vec3 mean_src = src.colwise().mean().transpose();
    Vec3 mean_dst = dst.colwise().mean().transpose();
    Points cs = src.rowwise() - mean_src.transpose();
    Points cd = dst.rowwise() - mean_dst.transpose();
    Mat3 cov = cd.transpose() * cs;
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // collinear inputs leave the rotation about the line unconstrained
    if (svd.singularValues()(1) < 1e-12 * std::max(svd.singularValues()(0), 1e-300))
        throw GeometryError("rigid_from_correspondences: degenerate (collinear) correspondences");
    Mat3 S = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) S(2, 2) = -1;
    *R = svd.matrixU() * S * svd.matrixV().transpose();
    *t = mean_dst - *R * mean_src;
}

struct IcpOptions {
    int max_iterations = 50;
    double tolerance = 1e-8;        // stop when RMS improves by less than this
    double rejection_radius = 0.3;  // meters
};

struct IcpResult {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    std::vector<double> rms_history;
};

/// Point-to-surface ICP of a cloud onto a scene mesh, starting from init.
inline IcpResult icp_refine(const TriMesh& scene, const Bvh& bvh, const PointCloud& cloud,
                            const Mat3& init_R, const Vec3& init_t, const IcpOptions& opts = {}) {
    IcpResult res;
    res.rotation = init_R;
    res.translation = init_t;
    double prev_rms = std::numeric_limits<double>::max();
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        std::vector<Vec3> src, dst;
        double sq_sum = 0;
        for (int i = 0; i < cloud.size(); ++i) {
            Vec3 p = res.rotation * cloud.point(i) + res.translation;
            SurfaceHit hit = bvh.closest_point(p);
            if (hit.distance > opts.rejection_radius) continue;
            src.push_back(cloud.point(i));
            dst.push_back(hit.point);
            sq_sum += hit.distance * hit.distance;
        }
        if (src.size() < 3)
            throw GeometryError("icp_refine: no correspondences within the rejection radius");
        double rms = std::sqrt(sq_sum / static_cast<double>(src.size()));
        res.rms_history.push_back(rms);
        if (prev_rms - rms < opts.tolerance) break;
        prev_rms = rms;

        Points s(static_cast<int>(src.size()), 3), d(static_cast<int>(dst.size()), 3);
        for (size_t i = 0; i < src.size(); ++i) {
            s.row(static_cast<int>(i)) = src[i].transpose();
            d.row(static_cast<int>(i)) = dst[i].transpose();
        }
        Mat3 R;
        Vec3 t;
        rigid_from_correspondences(s, d, &R, &t);
        res.rotation = R;
        res.translation = t;
    }
    return res;
}

// ---------------------------------------------------------------------------
// JSON I/O
// ---------------------------------------------------------------------------

inline void save_camera(const CameraModel& cam, const std::string& path) {
    nlohmann::json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    std::vector<double> R;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) R.push_back(cam.rotation(r, c));
    j["R_c"] = R;
    j["t_c"] = {cam.translation.x(), cam.translation.y(), cam.translation.z()};
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

inline CameraModel load_camera(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open camera file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    CameraModel cam;
    cam.fx = j.at("fx");
    cam.fy = j.at("fy");
    cam.cx = j.at("cx");
    cam.cy = j.at("cy");
    cam.width = j.value("width", 0);
    cam.height = j.value("height", 0);
    auto R = j.at("R_c").get<std::vector<double>>();
    if (R.size() != 9) throw ParseError(path + ": R_c must have 9 entries");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.rotation(r, c) = R[3 * r + c];
    auto t = j.at("t_c").get<std::vector<double>>();
    if (t.size() != 3) throw ParseError(path + ": t_c must have 3 entries");
    cam.translation = Vec3(t[0], t[1], t[2]);
    if (cam.fx <= 0 || cam.fy <= 0) throw ParseError(path + ": focal lengths must be positive");
    if (std::abs(cam.rotation.determinant() - 1.0) > 1e-6)
        throw ParseError(path + ": R_c is not a proper rotation");
    return cam;
}

/// Correspondence file: JSON array of {"scene": [x,y,z], "cloud": [x,y,z]}.
inline void load_correspondences(const std::string& path, Points* scene_pts, Points* cloud_pts) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open correspondence file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (!j.is_array()) throw ParseError(path + ": expected a JSON array");
    scene_pts->resize(static_cast<int>(j.size()), 3);
    cloud_pts->resize(static_cast<int>(j.size()), 3);
    int i = 0;
    for (const auto& pair : j) {
        auto s = pair.at("scene").get<std::vector<double>>();
        auto c = pair.at("cloud").get<std::vector<double>>();
        if (s.size() != 3 || c.size() != 3) throw ParseError(path + ": points must have 3 coordinates");
        scene_pts->row(i) << s[0], s[1], s[2];
        cloud_pts->row(i) << c[0], c[1], c[2];
        ++i;
    }
}

/// Point cloud from ASCII PLY or whitespace-separated xyz lines.
inline PointCloud load_point_cloud(const std::string& path) {
    PointCloud cloud;
    std::string ext = detail::file_extension(path);
    if (ext == "ply") {
        TriMesh m = [&] {
            std::ifstream in(path);
            if (!in) throw ParseError("cannot open point cloud: " + path);
            return detail::load_ply(in, path);
        }();
        cloud.points = m.vertices;
        return cloud;
    }
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open point cloud: " + path);
    std::vector<Vec3> pts;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x >> y >> z))
            throw ParseError(path + ":" + std::to_string(lineno) + ": malformed xyz line");
        pts.emplace_back(x, y, z);
    }
    cloud.points.resize(static_cast<int>(pts.size()), 3);
    for (size_t i = 0; i < pts.size(); ++i) cloud.points.row(static_cast<int>(i)) = pts[i].transpose();
    return cloud;
}

inline void save_point_cloud(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out.precision(10);
    for (int i = 0; i < cloud.size(); ++i)
        out << cloud.points(i, 0) << " " << cloud.points(i, 1) << " " << cloud.points(i, 2) << "\n";
}

}  // namespace scenefit
