#pragma once

#include "scenefit/body.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace scenefit {

struct BuiltinBodySpec {
    int n_beta = 10;
    int n_psi = 5;
    int torso_segments = 16;   // around-axis resolution of the large capsules
    int limb_segments = 10;
    int finger_segments = 4;
};

namespace detail {

struct CapsuleDef {
    Vec3 a, b;          // axis endpoints (already shortened)
    double radius;
    int n_seg, n_rings;
    std::string tag;
    // vertex position -> convex joint weights
    std::function<std::vector<std::pair<int, double>>(const Vec3&)> skin;
};

/// Closed capsule: two hemispherical caps joined by a cylinder.
inline void append_capsule(TriMesh& mesh, std::vector<std::pair<int, int>>& vertex_ranges,
                           const CapsuleDef& def) {
    Vec3 dir = (def.b - def.a);
    double axis_len = dir.norm();
    dir = axis_len > 1e-12 ? (dir / axis_len).eval() : Vec3(0, 1, 0);
    Vec3 u = dir.unitOrthogonal();
    Vec3 v = dir.cross(u);

    std::vector<Vec3> verts;
    std::vector<Eigen::Vector3i> faces;
    const int S = def.n_seg, R = def.n_rings;
    const double r = def.radius;

    verts.push_back(def.a - dir * r);  // bottom pole
    // bottom hemisphere rings (ending at the equator through a), then top
    for (int half = 0; half < 2; ++half) {
        for (int t = 1; t <= R; ++t) {
            double lat = half == 0 ? (-M_PI / 2 + t * (M_PI / 2) / R)
                                   : (t - 1) * (M_PI / 2) / R;
            Vec3 center = (half == 0 ? def.a : def.b) + dir * (r * std::sin(lat));
            double ring_r = r * std::cos(lat);
            for (int s = 0; s < S; ++s) {
                double ang = 2 * M_PI * s / S;
                verts.push_back(center + ring_r * (std::cos(ang) * u + std::sin(ang) * v));
            }
        }
    }
    verts.push_back(def.b + dir * r);  // top pole

    auto ring_vertex = [&](int ring, int s) { return 1 + ring * S + (s % S); };
    const int n_rings_total = 2 * R;
    const int top_pole = 1 + n_rings_total * S;
    for (int s = 0; s < S; ++s) faces.emplace_back(0, ring_vertex(0, s + 1), ring_vertex(0, s));
    for (int ring = 0; ring + 1 < n_rings_total; ++ring)
        for (int s = 0; s < S; ++s) {
            int a0 = ring_vertex(ring, s), a1 = ring_vertex(ring, s + 1);
            int b0 = ring_vertex(ring + 1, s), b1 = ring_vertex(ring + 1, s + 1);
            faces.emplace_back(a0, a1, b1);
            faces.emplace_back(a0, b1, b0);
        }
    for (int s = 0; s < S; ++s)
        faces.emplace_back(top_pole, ring_vertex(n_rings_total - 1, s), ring_vertex(n_rings_total - 1, s + 1));

    int base = mesh.num_vertices();
    int old_faces = mesh.num_faces();
    mesh.vertices.conservativeResize(base + static_cast<int>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i)
        mesh.vertices.row(base + static_cast<int>(i)) = verts[i].transpose();
    mesh.faces.conservativeResize(old_faces + static_cast<int>(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i)
        mesh.faces.row(old_faces + static_cast<int>(i)) =
            (faces[i] + Eigen::Vector3i::Constant(base)).transpose();
    vertex_ranges.emplace_back(base, base + static_cast<int>(verts.size()));
}

/// Affine least-squares regressor row: k-nearest vertices with weights summing
/// to 1 that reproduce the joint position.
inline void regressor_row(const Points& verts, const Vec3& joint, int k,
                          std::vector<Eigen::Triplet<double>>& triplets, int row) {
    const int N = static_cast<int>(verts.rows());
    k = std::min(k, N);
    std::vector<std::pair<double, int>> dist(N);
    for (int i = 0; i < N; ++i)
        dist[i] = {(verts.row(i).transpose() - joint).squaredNorm(), i};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    MatX A(3, k);
    for (int c = 0; c < k; ++c) A.col(c) = verts.row(dist[c].second).transpose();
    Vec3 centroid = A.rowwise().mean();
    double scale_sq = 0;
    for (int c = 0; c < k; ++c) scale_sq += (A.col(c) - centroid).squaredNorm();
    scale_sq /= k;

    MatX kkt = MatX::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = A.transpose() * A + 1e-6 * scale_sq * MatX::Identity(k, k);
    kkt.block(0, k, k, 1).setOnes();
    kkt.block(k, 0, 1, k).setOnes();
    VecX rhs(k + 1);
    rhs.head(k) = A.transpose() * joint;
    rhs(k) = 1.0;
    VecX sol = kkt.fullPivLu().solve(rhs);
    for (int c = 0; c < k; ++c) triplets.emplace_back(row, dist[c].second, sol(c));
}

}  // namespace detail

/// Procedural capsule-limb humanoid with the default 55-joint layout:
/// 22 body joints, 3 face joints, 15 per hand. Watertight by construction
/// (disjoint closed capsules), roughly 1.8 m tall, desk scale in meters.
inline BodyTemplate builtin_template(const BuiltinBodySpec& spec = {}) {
    if (spec.n_beta < 0 || spec.n_psi < 0 || spec.torso_segments < 6 || spec.limb_segments < 6 ||
        spec.finger_segments < 3)
        throw ConfigError("builtin_template: invalid spec");

    BodyTemplate t;

    // --- skeleton ---
    struct J {
        std::string name;
        int parent;
        Vec3 pos;
    };
    std::vector<J> joints = {
        {"pelvis", -1, {0, 0.95, 0}},
        {"left_hip", 0, {0.13, 0.90, 0}},
        {"right_hip", 0, {-0.13, 0.90, 0}},
        {"spine1", 0, {0, 1.05, 0}},
        {"left_knee", 1, {0.13, 0.50, 0}},
        {"right_knee", 2, {-0.13, 0.50, 0}},
        {"spine2", 3, {0, 1.15, 0}},
        {"left_ankle", 4, {0.13, 0.10, 0}},
        {"right_ankle", 5, {-0.13, 0.10, 0}},
        {"spine3", 6, {0, 1.25, 0}},
        {"left_foot", 7, {0.13, 0.03, 0.13}},
        {"right_foot", 8, {-0.13, 0.03, 0.13}},
        {"neck", 9, {0, 1.40, 0}},
        {"left_collar", 9, {0.06, 1.32, 0}},
        {"right_collar", 9, {-0.06, 1.32, 0}},
        {"head", 12, {0, 1.55, 0}},
        {"left_shoulder", 13, {0.20, 1.35, 0}},
        {"right_shoulder", 14, {-0.20, 1.35, 0}},
        {"left_elbow", 16, {0.45, 1.35, 0}},
        {"right_elbow", 17, {-0.45, 1.35, 0}},
        {"left_wrist", 18, {0.70, 1.35, 0}},
        {"right_wrist", 19, {-0.70, 1.35, 0}},
        {"jaw", 15, {0, 1.53, 0.06}},
        {"left_eye", 15, {0.03, 1.60, 0.08}},
        {"right_eye", 15, {-0.03, 1.60, 0.08}},
    };
    const char* finger_names[5] = {"thumb", "index", "middle", "ring", "pinky"};
    const double finger_z[5] = {0.032, 0.016, 0.0, -0.016, -0.032};
    for (int side = 0; side < 2; ++side) {
        double sx = side == 0 ? 1.0 : -1.0;
        std::string prefix = side == 0 ? "left_" : "right_";
        int wrist = side == 0 ? 20 : 21;
        for (int f = 0; f < 5; ++f) {
            int base = static_cast<int>(joints.size());
            for (int seg = 0; seg < 3; ++seg) {
                double x = sx * (seg == 0 ? 0.80 : seg == 1 ? 0.835 : 0.865);
                joints.push_back({prefix + finger_names[f] + std::to_string(seg + 1),
                                  seg == 0 ? wrist : base + seg - 1, {x, 1.35, finger_z[f]}});
            }
        }
    }
    const int NJ = static_cast<int>(joints.size());  // 55
    t.parent.resize(NJ);
    t.joint_names.resize(NJ);
    Points joint_pos(NJ, 3);
    for (int j = 0; j < NJ; ++j) {
        t.parent[j] = joints[j].parent;
        t.joint_names[j] = joints[j].name;
        joint_pos.row(j) = joints[j].pos.transpose();
    }
    auto jp = [&](int j) { return joint_pos.row(j).transpose().eval(); };

    // --- capsules ---
    const double gap = 0.01;
    std::vector<detail::CapsuleDef> caps;
    auto chain_capsule = [&](int ja, int jb, double r, int n_seg, int n_rings, const std::string& tag,
                             std::function<std::vector<std::pair<int, double>>(const Vec3&)> skin) {
        Vec3 a = jp(ja), b = jp(jb);
        Vec3 dir = (b - a).normalized();
        detail::CapsuleDef def{a + dir * (r + gap), b - dir * (r + gap), r, n_seg, n_rings, tag, skin};
        caps.push_back(def);
    };
    auto ramp_skin = [](int prox, int dist, const Vec3& a, const Vec3& b) {
        Vec3 axis = (b - a);
        double len2 = axis.squaredNorm();
        return [=](const Vec3& p) -> std::vector<std::pair<int, double>> {
            double s = std::clamp((p - a).dot(axis) / len2, 0.0, 1.0);
            double wd = s <= 0.8 ? 0.0 : 0.5 * (s - 0.8) / 0.2;
            return {{prox, 1.0 - wd}, {dist, wd}};
        };
    };

    // torso: spine-chain blend by height
    {
        Vec3 a = jp(0), b(0, 1.35, 0);
        double r = 0.11;
        Vec3 dir(0, 1, 0);
        detail::CapsuleDef def{a + dir * (r + gap), b - dir * (r + gap), r, spec.torso_segments, 5,
                               "torso",
                               [](const Vec3& p) -> std::vector<std::pair<int, double>> {
                                   const int chain[4] = {0, 3, 6, 9};  // pelvis, spine1..3
                                   const double y[4] = {0.95, 1.05, 1.15, 1.25};
                                   if (p.y() <= y[0]) return {{chain[0], 1.0}};
                                   if (p.y() >= y[3]) return {{chain[3], 1.0}};
                                   for (int s = 0; s < 3; ++s)
                                       if (p.y() <= y[s + 1]) {
                                           double w = (p.y() - y[s]) / (y[s + 1] - y[s]);
                                           return {{chain[s], 1.0 - w}, {chain[s + 1], w}};
                                       }
                                   return {{chain[3], 1.0}};
                               }};
        caps.push_back(def);
    }
    // head: free-floating capsule, fully on the head joint
    {
        detail::CapsuleDef def{{0, 1.50, 0}, {0, 1.66, 0}, 0.095, spec.torso_segments - 4, 5, "head",
                               [](const Vec3&) -> std::vector<std::pair<int, double>> {
                                   return {{15, 1.0}};
                               }};
        caps.push_back(def);
    }
    const int LS = spec.limb_segments;
    chain_capsule(1, 4, 0.05, LS, 3, "thigh_l", ramp_skin(1, 4, jp(1), jp(4)));
    chain_capsule(2, 5, 0.05, LS, 3, "thigh_r", ramp_skin(2, 5, jp(2), jp(5)));
    chain_capsule(4, 7, 0.045, LS, 3, "shin_l", ramp_skin(4, 7, jp(4), jp(7)));
    chain_capsule(5, 8, 0.045, LS, 3, "shin_r", ramp_skin(5, 8, jp(5), jp(8)));
    chain_capsule(7, 10, 0.035, LS, 3, "foot_l", ramp_skin(7, 10, jp(7), jp(10)));
    chain_capsule(8, 11, 0.035, LS, 3, "foot_r", ramp_skin(8, 11, jp(8), jp(11)));
    chain_capsule(16, 18, 0.042, LS, 3, "upper_arm_l", ramp_skin(16, 18, jp(16), jp(18)));
    chain_capsule(17, 19, 0.042, LS, 3, "upper_arm_r", ramp_skin(17, 19, jp(17), jp(19)));
    chain_capsule(18, 20, 0.038, LS, 3, "forearm_l", ramp_skin(18, 20, jp(18), jp(20)));
    chain_capsule(19, 21, 0.038, LS, 3, "forearm_r", ramp_skin(19, 21, jp(19), jp(21)));
    for (int side = 0; side < 2; ++side) {
        double sx = side == 0 ? 1.0 : -1.0;
        int wrist = side == 0 ? 20 : 21;
        Vec3 a = jp(wrist), b = jp(wrist) + Vec3(sx * 0.10, 0, 0);
        double r = 0.035;
        Vec3 dir(sx, 0, 0);
        detail::CapsuleDef palm{a + dir * (r + gap), b - dir * (r + gap), r, LS, 3,
                                side == 0 ? "palm_l" : "palm_r",
                                [wrist](const Vec3&) -> std::vector<std::pair<int, double>> {
                                    return {{wrist, 1.0}};
                                }};
        caps.push_back(palm);
        for (int f = 0; f < 5; ++f) {
            int base_joint = (side == 0 ? 25 : 40) + 3 * f;
            Vec3 fa(sx * 0.80, 1.35, finger_z[f]);
            Vec3 fb(sx * 0.89, 1.35, finger_z[f]);
            double fr = 0.007;
            Vec3 fdir(sx, 0, 0);
            double fgap = 0.004;
            detail::CapsuleDef fc{
                fa + fdir * (fr + fgap), fb - fdir * (fr + fgap), fr, spec.finger_segments, 1,
                (side == 0 ? std::string("finger_l") : std::string("finger_r")) + std::to_string(f),
                [base_joint, sx](const Vec3& p) -> std::vector<std::pair<int, double>> {
                    const double x[3] = {0.80, 0.835, 0.865};
                    double px = sx * p.x();
                    if (px <= x[0]) return {{base_joint, 1.0}};
                    if (px >= x[2]) return {{base_joint + 2, 1.0}};
                    for (int s = 0; s < 2; ++s)
                        if (px <= x[s + 1]) {
                            double w = (px - x[s]) / (x[s + 1] - x[s]);
                            return {{base_joint + s, 1.0 - w}, {base_joint + s + 1, w}};
                        }
                    return {{base_joint + 2, 1.0}};
                }};
            caps.push_back(fc);
        }
    }

    // --- mesh + skinning ---
    std::vector<std::pair<int, int>> ranges;
    std::map<std::string, std::pair<int, int>> range_by_tag;
    for (const auto& def : caps) {
        detail::append_capsule(t.mesh, ranges, def);
        range_by_tag[def.tag] = ranges.back();
    }
    const int N = t.mesh.num_vertices();
    t.skin_weights = MatX::Zero(N, NJ);
    for (size_t c = 0; c < caps.size(); ++c) {
        auto [lo, hi] = ranges[c];
        for (int i = lo; i < hi; ++i) {
            auto weights = caps[c].skin(t.mesh.vertex(i));
            double sum = 0;
            for (auto& [j, w] : weights) sum += w;
            for (auto& [j, w] : weights) t.skin_weights(i, j) = w / sum;
        }
    }

    // --- joint regressor ---
    {
        std::vector<Eigen::Triplet<double>> triplets;
        for (int j = 0; j < NJ; ++j) detail::regressor_row(t.mesh.vertices, jp(j), 16, triplets, j);
        t.joint_regressor.resize(NJ, N);
        t.joint_regressor.setFromTriplets(triplets.begin(), triplets.end());
    }

    // --- procedural shape blendshapes ---
    t.shape_basis = MatX::Zero(3 * N, spec.n_beta);
    const Vec3 pelvis_origin(0, 0.95, 0);
    for (int i = 0; i < N; ++i) {
        Vec3 v = t.mesh.vertex(i);
        auto set = [&](int b, const Vec3& d) {
            if (b < spec.n_beta) t.shape_basis.block<3, 1>(3 * i, b) = d;
        };
        set(0, 0.06 * (v - pelvis_origin));                                   // overall scale
        set(1, Vec3(0, 0.08 * (v.y() - pelvis_origin.y()), 0));               // height
        set(2, 0.04 * Vec3(v.x(), 0, v.z()));                                 // girth
        if (std::abs(v.x()) > 0.17 && v.y() > 1.15)                           // arm length
            set(3, Vec3(0.10 * (v.x() > 0 ? v.x() - 0.17 : v.x() + 0.17), 0, 0));
        if (v.y() < 0.92 && std::abs(v.x()) < 0.30)                           // leg length
            set(4, Vec3(0, 0.12 * (v.y() - 0.92), 0));
        if (v.y() > 0.95 && std::abs(v.x()) < 0.17)                           // torso length
            set(5, Vec3(0, 0.06 * std::min(v.y() - 0.95, 0.4), 0));
        if ((v - Vec3(0, 1.58, 0)).norm() < 0.25)                             // head size
            set(6, 0.05 * (v - Vec3(0, 1.58, 0)));
        if (std::abs(v.x()) > 0.15 && v.y() > 1.15)                           // shoulder width
            set(7, Vec3(0.05 * (v.x() > 0 ? 1 : -1), 0, 0));
        if (std::abs(v.x()) > 0.05 && v.y() < 0.93)                           // hip width
            set(8, Vec3(0.03 * (v.x() > 0 ? 1 : -1), 0, 0));
        if (std::abs(v.x()) < 0.15 && v.y() > 0.95 && v.y() < 1.25 && v.z() > 0.02)  // belly
            set(9, Vec3(0, 0, 0.04));
    }

    // --- generic expression blendshapes on the head ---
    t.expression_basis = MatX::Zero(3 * N, spec.n_psi);
    for (int i = 0; i < N; ++i) {
        Vec3 v = t.mesh.vertex(i);
        Vec3 d = v - Vec3(0, 1.58, 0);
        if (d.norm() >= 0.25) continue;
        for (int m = 0; m < spec.n_psi; ++m) {
            Vec3 dir = Vec3::Zero();
            dir[m % 3] = 1.0;
            double w = 0.01 * std::sin(30.0 * d[(m + 1) % 3] + m);
            t.expression_basis.block<3, 1>(3 * i, m) = w * dir;
        }
    }

    // --- groups ---
    t.joint_groups["body"] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21};
    t.joint_groups["face"] = {22, 23, 24};
    std::vector<int> lh, rh;
    for (int j = 25; j < 40; ++j) lh.push_back(j);
    for (int j = 40; j < 55; ++j) rh.push_back(j);
    t.joint_groups["left_hand"] = lh;
    t.joint_groups["right_hand"] = rh;
    t.joint_groups["elbows"] = {18, 19};
    t.joint_groups["knees"] = {4, 5};
    t.joint_groups["torso"] = {0, 1, 2, 16, 17};

    t.bend_dofs = {{18, 1, +1.0}, {19, 1, -1.0}, {4, 0, -1.0}, {5, 0, -1.0}};

    // --- contact sets by region geometry ---
    auto collect = [&](const std::string& tag, auto pred, std::vector<int>& out) {
        auto it = range_by_tag.find(tag);
        if (it == range_by_tag.end()) return;
        for (int i = it->second.first; i < it->second.second; ++i)
            if (pred(t.mesh.vertex(i))) out.push_back(i);
    };
    auto always = [](const Vec3&) { return true; };
    std::vector<int> feet, hands, thighs, gluteus, back;
    // soles only: the lowest band of the foot capsules. The band is kept
    // tight so the set does not reach up the curved side of the foot;
    // contact vertices well above the support plane would make the contact
    // term squeeze the foot into the ground instead of resting it on top.
    collect("foot_l", [](const Vec3& v) { return v.y() < 0.03; }, feet);
    collect("foot_r", [](const Vec3& v) { return v.y() < 0.03; }, feet);
    collect("palm_l", always, hands);
    collect("palm_r", always, hands);
    for (int side = 0; side < 2; ++side)
        for (int f = 0; f < 5; ++f)
            collect((side == 0 ? std::string("finger_l") : std::string("finger_r")) + std::to_string(f),
                    always, hands);
    // underside of the cylindrical thigh section (ends up facing down when seated)
    auto thigh_pred = [](const Vec3& v) { return v.z() < -0.03 && v.y() > 0.7 && v.y() < 0.845; };
    collect("thigh_l", thigh_pred, thighs);
    collect("thigh_r", thigh_pred, thighs);
    collect("torso", [](const Vec3& v) { return v.y() < 1.02 && v.z() < 0.02; }, gluteus);
    collect("torso", [](const Vec3& v) { return v.y() >= 1.02 && v.y() < 1.34 && v.z() < -0.08; }, back);
    t.contact_sets["feet"] = feet;
    t.contact_sets["hands"] = hands;
    t.contact_sets["thighs"] = thighs;
    t.contact_sets["gluteus"] = gluteus;
    t.contact_sets["back"] = back;

    t.validate();
    return t;
}

// ---------------------------------------------------------------------------
// Template JSON I/O
// ---------------------------------------------------------------------------

inline void save_template(const BodyTemplate& t, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    auto points_to_json = [](const Points& p) {
        std::vector<std::vector<double>> out;
        for (int i = 0; i < p.rows(); ++i) out.push_back({p(i, 0), p(i, 1), p(i, 2)});
        return out;
    };
    j["vertices"] = points_to_json(t.mesh.vertices);
    std::vector<std::vector<int>> faces;
    for (int f = 0; f < t.mesh.num_faces(); ++f)
        faces.push_back({t.mesh.faces(f, 0), t.mesh.faces(f, 1), t.mesh.faces(f, 2)});
    j["faces"] = faces;
    auto dense_to_json = [](const MatX& m) {
        std::vector<std::vector<double>> out;
        for (int r = 0; r < m.rows(); ++r) {
            std::vector<double> row(m.cols());
            for (int c = 0; c < m.cols(); ++c) row[c] = m(r, c);
            out.push_back(std::move(row));
        }
        return out;
    };
    j["shape_basis"] = dense_to_json(t.shape_basis);
    j["expression_basis"] = dense_to_json(t.expression_basis);
    std::vector<std::vector<double>> reg_triplets;
    for (int k = 0; k < t.joint_regressor.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(t.joint_regressor, k); it; ++it)
            reg_triplets.push_back({static_cast<double>(it.row()), static_cast<double>(it.col()), it.value()});
    j["joint_regressor"] = {{"rows", t.num_joints()},
                            {"cols", t.num_vertices()},
                            {"triplets", reg_triplets}};
    j["parent"] = t.parent;
    j["joint_names"] = t.joint_names;
    j["skin_weights"] = dense_to_json(t.skin_weights);
    j["joint_groups"] = t.joint_groups;
    j["contact_sets"] = t.contact_sets;
    std::vector<std::vector<double>> bends;
    for (const auto& b : t.bend_dofs)
        bends.push_back({static_cast<double>(b.joint), static_cast<double>(b.axis), b.sign});
    j["bend_dofs"] = bends;
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << j.dump() << "\n";
}

inline BodyTemplate load_template(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open template file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (j.value("version", 0) != 1)
        throw ParseError(path + ": unsupported template version");
    BodyTemplate t;
    auto verts = j.at("vertices").get<std::vector<std::vector<double>>>();
    t.mesh.vertices.resize(static_cast<int>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i)
        t.mesh.vertices.row(static_cast<int>(i)) << verts[i].at(0), verts[i].at(1), verts[i].at(2);
    auto faces = j.at("faces").get<std::vector<std::vector<int>>>();
    t.mesh.faces.resize(static_cast<int>(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i)
        t.mesh.faces.row(static_cast<int>(i)) << faces[i].at(0), faces[i].at(1), faces[i].at(2);
    auto json_to_dense = [](const nlohmann::json& arr) {
        MatX m;
        if (arr.empty()) return m;
        m.resize(static_cast<int>(arr.size()), static_cast<int>(arr[0].size()));
        int r = 0;
        for (const auto& row : arr) {
            int c = 0;
            for (const auto& val : row) m(r, c++) = val.get<double>();
            ++r;
        }
        return m;
    };
    t.shape_basis = json_to_dense(j.at("shape_basis"));
    t.expression_basis = json_to_dense(j.at("expression_basis"));
    const auto& reg = j.at("joint_regressor");
    std::vector<Eigen::Triplet<double>> triplets;
    for (const auto& tr : reg.at("triplets"))
        triplets.emplace_back(tr.at(0).get<int>(), tr.at(1).get<int>(), tr.at(2).get<double>());
    t.joint_regressor.resize(reg.at("rows").get<int>(), reg.at("cols").get<int>());
    t.joint_regressor.setFromTriplets(triplets.begin(), triplets.end());
    t.parent = j.at("parent").get<std::vector<int>>();
    t.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    t.skin_weights = json_to_dense(j.at("skin_weights"));
    t.joint_groups = j.at("joint_groups").get<std::map<std::string, std::vector<int>>>();
    t.contact_sets = j.at("contact_sets").get<std::map<std::string, std::vector<int>>>();
    for (const auto& b : j.at("bend_dofs"))
        t.bend_dofs.push_back({b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<double>()});
    t.validate();
    return t;
}

}  // namespace scenefit
