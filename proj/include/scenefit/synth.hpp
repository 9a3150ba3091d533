#pragma once

#include "scenefit/builtin_body.hpp"
#include "scenefit/energy.hpp"
#include "scenefit/fit.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace scenefit {

struct SynthCase {
    std::string scenario;
    unsigned int seed = 0;
    double keypoint_noise = 3.0;  // pixels
    BodyParams gt_params;
    PosedBody gt_posed;
    TriMesh scene;
    CameraModel camera;
    Keypoints2D keypoints;  // noisy detections
    std::vector<std::string> contact_set_names;  // sets expected to touch the scene
};

namespace detail {

/// Axis-aligned box with outward-facing triangles.
inline void append_box(TriMesh& mesh, const Vec3& lo, const Vec3& hi) {
    int base = mesh.num_vertices();
    Points verts(8, 3);
    for (int i = 0; i < 8; ++i)
        verts.row(i) << (i & 1 ? hi.x() : lo.x()), (i & 2 ? hi.y() : lo.y()),
            (i & 4 ? hi.z() : lo.z());
    // quads as (a,b,c,d) with CCW winding seen from outside
    const int quads[6][4] = {
        {0, 4, 6, 2},  // x = lo
        {1, 3, 7, 5},  // x = hi
        {0, 1, 5, 4},  // y = lo
        {2, 6, 7, 3},  // y = hi
        {0, 2, 3, 1},  // z = lo
        {4, 5, 7, 6},  // z = hi
    };
    Points all(mesh.num_vertices() + 8, 3);
    all << mesh.vertices, verts;
    mesh.vertices = all;
    Faces faces(mesh.num_faces() + 12, 3);
    faces.topRows(mesh.num_faces()) = mesh.faces;
    for (int q = 0; q < 6; ++q) {
        faces.row(mesh.num_faces() + 2 * q) << base + quads[q][0], base + quads[q][1], base + quads[q][2];
        faces.row(mesh.num_faces() + 2 * q + 1) << base + quads[q][0], base + quads[q][2], base + quads[q][3];
    }
    mesh.faces = faces;
}

inline double set_min_y(const BodyTemplate& t, const PosedBody& posed, const std::string& set_name) {
    double m = std::numeric_limits<double>::max();
    for (int v : t.contact_sets.at(set_name)) m = std::min(m, posed.vertices(v, 1));
    return m;
}

inline double set_max_z(const BodyTemplate& t, const PosedBody& posed, const std::string& set_name) {
    double m = std::numeric_limits<double>::lowest();
    for (int v : t.contact_sets.at(set_name)) m = std::max(m, posed.vertices(v, 2));
    return m;
}

/// Look-at camera: y-down image plane, +z looking toward the target.
inline CameraModel look_at_camera(const Vec3& position, const Vec3& target) {
    CameraModel cam;
    cam.fx = cam.fy = 1000;
    cam.width = 1920;
    cam.height = 1080;
    cam.cx = cam.width / 2.0;
    cam.cy = cam.height / 2.0;
    Vec3 up(0, 1, 0);
    Vec3 f = (target - position).normalized();
    if (std::abs(f.dot(up)) > 0.999) up = Vec3(1, 0, 0);
    Vec3 x = f.cross(up).normalized();
    Vec3 y = f.cross(x).normalized();
    cam.rotation.col(0) = x;
    cam.rotation.col(1) = y;
    cam.rotation.col(2) = f;
    cam.translation = position;
    return cam;
}

}  // namespace detail

inline const std::vector<std::string>& synth_scenarios() {
    static const std::vector<std::string> names = {"floor-stand", "chair-sit", "wall-touch", "bed-lie"};
    return names;
}

/// Generate one synthetic case: sample ground-truth shape and pose, build a
/// scene in exact contact with the posed body, render noisy 2D keypoints.
inline SynthCase make_synth_case(const BodyTemplate& t, const std::string& scenario,
                                 unsigned int seed, double keypoint_noise = 3.0) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    SynthCase c;
    c.scenario = scenario;
    c.seed = seed;
    c.keypoint_noise = keypoint_noise;
    c.gt_params = BodyParams::zero(t);
    for (int b = 0; b < t.n_beta(); ++b) c.gt_params.beta(b) = 0.3 * gauss(rng);

    auto set_theta = [&](const char* joint, const Vec3& v) {
        int j = t.joint_index(joint);
        if (j < 0) throw ConfigError(std::string("make_synth_case: template lacks joint ") + joint);
        c.gt_params.theta.segment<3>(3 * j) = v;
    };
    auto jitter = [&](const char* joint, double scale) {
        int j = t.joint_index(joint);
        c.gt_params.theta.segment<3>(3 * j) += scale * Vec3(uni(rng), uni(rng), uni(rng));
    };

    double yaw = 0.25 * uni(rng);
    set_theta("pelvis", Vec3(0, yaw, 0));
    // Lying poses keep the arms close to the torso plane: an arm swung below
    // the back would lower the bed surface and leave the back hovering.
    double arm_jitter = scenario == "bed-lie" ? 0.0 : 0.15;
    jitter("left_shoulder", arm_jitter);
    jitter("right_shoulder", arm_jitter);
    jitter("left_elbow", 0.66 * arm_jitter);
    jitter("right_elbow", 0.66 * arm_jitter);

    const double half_pi = M_PI / 2.0;
    if (scenario == "floor-stand") {
        jitter("left_hip", 0.05);
        jitter("right_hip", 0.05);
        c.contact_set_names = {"feet"};  // metric sets: the regions expected to touch
    } else if (scenario == "chair-sit") {
        set_theta("left_hip", Vec3(-half_pi, 0, 0));
        set_theta("right_hip", Vec3(-half_pi, 0, 0));
        set_theta("left_knee", Vec3(half_pi, 0, 0));
        set_theta("right_knee", Vec3(half_pi, 0, 0));
        c.contact_set_names = {"thighs", "feet"};
    } else if (scenario == "wall-touch") {
        set_theta("left_shoulder", Vec3(0, -half_pi, 0));
        set_theta("right_shoulder", Vec3(0, half_pi, 0));
        jitter("left_shoulder", 0.05);
        jitter("right_shoulder", 0.05);
        c.contact_set_names = {"feet"};  // the hand set spans the whole hand, not just the touching tips
    } else if (scenario == "bed-lie") {
        // compose yaw about the world vertical with the lie-down pitch; a raw
        // (pitch, yaw, 0) axis-angle vector would tilt the rotation axis and
        // roll the lying body onto one side
        Eigen::AngleAxisd lie(Eigen::AngleAxisd(yaw, Vec3::UnitY()) *
                              Eigen::AngleAxisd(-half_pi, Vec3::UnitX()));
        set_theta("pelvis", lie.angle() * lie.axis());
        // flexion-only hip jitter: a leg swung below the back plane would
        // lower the bed surface and leave the back hovering above it
        std::uniform_real_distribution<double> flex(-0.08, 0.0);
        set_theta("left_hip", Vec3(flex(rng), 0, 0));
        set_theta("right_hip", Vec3(flex(rng), 0, 0));
        c.contact_set_names = {"back"};
    } else {
        throw ConfigError("unknown scenario: " + scenario);
    }

    c.gt_posed = forward(t, c.gt_params, true);

    // scene geometry in contact with the posed body; a small clearance keeps
    // the ground truth strictly penetration-free under SDF interpolation
    const double floor_half = 2.0;
    const double clearance = 0.002;
    Vec3 centroid = c.gt_posed.vertices.colwise().mean().transpose();
    // Slabs are made thick so their interior midplane sits well away from the
    // body: with a thin slab, a foot poking through it is pushed half up and
    // half down by the signed-distance gradient and gets stuck straddling it.
    auto add_floor = [&](double top) {
        detail::append_box(c.scene, Vec3(centroid.x() - floor_half, top - 0.5, centroid.z() - floor_half),
                           Vec3(centroid.x() + floor_half, top, centroid.z() + floor_half));
        return top;
    };

    if (scenario == "floor-stand") {
        add_floor(detail::set_min_y(t, c.gt_posed, "feet") - clearance);
    } else if (scenario == "chair-sit") {
        double floor_top = add_floor(detail::set_min_y(t, c.gt_posed, "feet") - clearance);
        double seat_top = std::min(detail::set_min_y(t, c.gt_posed, "thighs"),
                                   detail::set_min_y(t, c.gt_posed, "gluteus")) -
                          clearance;
        int lk = t.joint_index("left_knee"), rk = t.joint_index("right_knee");
        double knee_z = 0.5 * (c.gt_posed.joints(lk, 2) + c.gt_posed.joints(rk, 2));
        int pelvis = t.joint_index("pelvis");
        double px = c.gt_posed.joints(pelvis, 0);
        // seat front edge stays behind the shins; the seat rests exactly on
        // the floor so the two boxes do not overlap (overlapping interiors
        // create a band where the signed distance points into the wrong box)
        detail::append_box(c.scene, Vec3(px - 0.35, floor_top, knee_z - 0.75),
                           Vec3(px + 0.35, seat_top, knee_z - 0.15));
    } else if (scenario == "wall-touch") {
        double floor_top = add_floor(detail::set_min_y(t, c.gt_posed, "feet") - clearance);
        double wall_z = detail::set_max_z(t, c.gt_posed, "hands") + clearance;
        detail::append_box(c.scene, Vec3(centroid.x() - 1.5, floor_top, wall_z),
                           Vec3(centroid.x() + 1.5, floor_top + 2.5, wall_z + 0.6));
    } else if (scenario == "bed-lie") {
        double bed_top = c.gt_posed.vertices.col(1).minCoeff() - clearance;
        detail::append_box(c.scene, Vec3(centroid.x() - 0.7, bed_top - 0.4, centroid.z() - 1.2),
                           Vec3(centroid.x() + 0.7, bed_top, centroid.z() + 1.2));
    }
    compute_vertex_normals(c.scene);

    // camera: elevated and oblique, looking slightly down at the body (a
    // wall-mounted room camera). Seated poses get a stronger side offset so
    // the thigh/knee flexion is not fully foreshortened.
    Vec3 cam_offset = scenario == "chair-sit" ? Vec3(2.2, 1.3, 2.9) : Vec3(0.4, 1.3, 3.6);
    Vec3 cam_pos = centroid + cam_offset;
    c.camera = detail::look_at_camera(cam_pos, centroid);

    // noisy keypoint detections for the body joints
    for (int j : t.group("body")) {
        auto pix = project(c.camera, c.gt_posed.joints.row(j).transpose());
        if (!pix) continue;
        Keypoint kp;
        kp.name = t.joint_names[j];
        kp.x = pix->x() + keypoint_noise * gauss(rng);
        kp.y = pix->y() + keypoint_noise * gauss(rng);
        kp.confidence = 1.0;
        c.keypoints.points.push_back(kp);
    }
    return c;
}

/// Synthetic body point cloud: camera-visible ground-truth vertices plus
/// Gaussian position noise.
inline PointCloud make_synth_cloud(const BodyTemplate& t, const SynthCase& c,
                                   double noise = 0.005) {
    std::mt19937 rng(c.seed + 99991u);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::set<int> viz = visible_vertices(c.gt_posed, t.mesh.faces, c.camera);
    PointCloud cloud;
    cloud.points.resize(static_cast<int>(viz.size()), 3);
    int row = 0;
    for (int v : viz) {
        Vec3 p = c.gt_posed.vertices.row(v).transpose();
        cloud.points.row(row++) = (p + noise * Vec3(gauss(rng), gauss(rng), gauss(rng))).transpose();
    }
    return cloud;
}

/// Write a case directory: scene.obj, camera.json, keypoints.json,
/// gt_params.json, gt_mesh.obj, case.json.
inline void save_synth_case(const SynthCase& c, const BodyTemplate& t, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_mesh(c.scene, dir + "/scene.obj");
    save_camera(c.camera, dir + "/camera.json");
    save_keypoints(c.keypoints, dir + "/keypoints.json");
    save_params(c.gt_params, dir + "/gt_params.json");
    save_mesh(c.gt_posed.as_mesh(t.mesh.faces), dir + "/gt_mesh.obj");
    save_point_cloud(make_synth_cloud(t, c), dir + "/point_cloud.xyz");
    nlohmann::json meta;
    meta["scenario"] = c.scenario;
    meta["seed"] = c.seed;
    meta["keypoint_noise"] = c.keypoint_noise;
    meta["contact_sets"] = c.contact_set_names;
    std::ofstream out(dir + "/case.json");
    if (!out) throw ParseError("cannot open for writing: " + dir + "/case.json");
    out << meta.dump(2) << "\n";
}

inline SynthCase load_synth_case(const BodyTemplate& t, const std::string& dir) {
    SynthCase c;
    std::ifstream in(dir + "/case.json");
    if (!in) throw ParseError("cannot open case file: " + dir + "/case.json");
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(dir + "/case.json: " + e.what());
    }
    c.scenario = meta.at("scenario").get<std::string>();
    c.seed = meta.value("seed", 0u);
    c.keypoint_noise = meta.value("keypoint_noise", 3.0);
    c.contact_set_names = meta.at("contact_sets").get<std::vector<std::string>>();
    c.scene = load_mesh(dir + "/scene.obj");
    c.camera = load_camera(dir + "/camera.json");
    c.keypoints = load_keypoints(dir + "/keypoints.json");
    c.gt_params = load_params(t, dir + "/gt_params.json");
    c.gt_posed = forward(t, c.gt_params, true);
    return c;
}

}  // namespace scenefit
