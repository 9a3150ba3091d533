#pragma once

#include "scenefit/camera.hpp"
#include "scenefit/mesh.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace scenefit {

/// Axis-angle to rotation matrix (Rodrigues), continuous at the zero vector.
inline Mat3 rodrigues(const Vec3& axis_angle) {
    double angle = axis_angle.norm();
    if (angle < 1e-12) return Mat3::Identity() + skew(axis_angle);
    Mat3 K = skew(axis_angle / angle);
    return Mat3::Identity() + std::sin(angle) * K + (1 - std::cos(angle)) * K * K;
}

/// dR/d(axis_angle_a), Gallego & Yezzi closed form with small-angle limit.
inline Mat3 rodrigues_derivative(const Vec3& axis_angle, int a) {
    Vec3 e = Vec3::Zero();
    e[a] = 1.0;
    double sq = axis_angle.squaredNorm();
    if (sq < 1e-16) return skew(e);
    Mat3 R = rodrigues(axis_angle);
    Vec3 w = axis_angle.cross((Mat3::Identity() - R) * e);
    return (axis_angle[a] * skew(axis_angle) + skew(w)) * R / sq;
}

struct BendDof {
    int joint = -1;
    int axis = 0;
    double sign = 1.0;  // exp(sign * theta) penalizes bending past the natural direction
};

struct BodyTemplate {
    TriMesh mesh;                       // rest pose
    MatX shape_basis;                   // (3N) x n_beta, xyz stacked per vertex
    MatX expression_basis;              // (3N) x n_psi
    Eigen::SparseMatrix<double> joint_regressor;  // J x N
    std::vector<int> parent;            // -1 for the root (joint 0)
    MatX skin_weights;                  // N x J, convex rows
    std::vector<std::string> joint_names;
    std::map<std::string, std::vector<int>> joint_groups;  // body / face / left_hand / right_hand
    std::map<std::string, std::vector<int>> contact_sets;  // hands / thighs / gluteus / back / feet
    std::vector<BendDof> bend_dofs;     // elbows and knees

    int num_vertices() const { return mesh.num_vertices(); }
    int num_joints() const { return static_cast<int>(parent.size()); }
    int n_beta() const { return static_cast<int>(shape_basis.cols()); }
    int n_psi() const { return static_cast<int>(expression_basis.cols()); }

    int joint_index(const std::string& name) const {
        for (int j = 0; j < num_joints(); ++j)
            if (joint_names[j] == name) return j;
        return -1;
    }

    const std::vector<int>& group(const std::string& name) const {
        auto it = joint_groups.find(name);
        if (it == joint_groups.end()) throw ConfigError("unknown joint group: " + name);
        return it->second;
    }

    void validate() const {
        const int J = num_joints();
        if (J == 0) throw ConfigError("body template has no joints");
        if (parent[0] != -1) throw ConfigError("joint 0 must be the root");
        for (int j = 1; j < J; ++j) {
            if (parent[j] < 0 || parent[j] >= j)
                throw ConfigError("kinematic tree must be topologically ordered with a single root");
        }
        if (skin_weights.rows() != num_vertices() || skin_weights.cols() != J)
            throw ConfigError("skin weight dimensions do not match");
        for (int i = 0; i < num_vertices(); ++i) {
            if (skin_weights.row(i).minCoeff() < -1e-9 ||
                std::abs(skin_weights.row(i).sum() - 1.0) > 1e-6)
                throw ConfigError("skin weights must be convex per vertex");
        }
        if (shape_basis.rows() != 3 * num_vertices() && shape_basis.size() != 0)
            throw ConfigError("shape basis dimensions do not match");
        if (expression_basis.rows() != 3 * num_vertices() && expression_basis.size() != 0)
            throw ConfigError("expression basis dimensions do not match");
        if (joint_regressor.rows() != J || joint_regressor.cols() != num_vertices())
            throw ConfigError("joint regressor dimensions do not match");
        for (const auto& [name, set] : contact_sets)
            for (int idx : set)
                if (idx < 0 || idx >= num_vertices())
                    throw ConfigError("contact set '" + name + "' references invalid vertex");
    }
};

/// Flat parameter vector layout: [beta | theta(3 per joint) | psi | gamma].
struct ParamLayout {
    int n_beta = 0, n_theta = 0, n_psi = 0;

    explicit ParamLayout(const BodyTemplate& t)
        : n_beta(t.n_beta()), n_theta(3 * t.num_joints()), n_psi(t.n_psi()) {}

    int beta_offset() const { return 0; }
    int theta_offset() const { return n_beta; }
    int psi_offset() const { return n_beta + n_theta; }
    int gamma_offset() const { return n_beta + n_theta + n_psi; }
    int size() const { return n_beta + n_theta + n_psi + 3; }
};

struct BodyParams {
    VecX beta;
    VecX theta;  // 3 per joint, axis-angle, template joint order
    VecX psi;
    Vec3 gamma = Vec3::Zero();

    static BodyParams zero(const BodyTemplate& t) {
        BodyParams p;
        p.beta = VecX::Zero(t.n_beta());
        p.theta = VecX::Zero(3 * t.num_joints());
        p.psi = VecX::Zero(t.n_psi());
        return p;
    }

    Vec3 joint_rotation(int j) const { return theta.segment<3>(3 * j); }

    VecX to_vector() const {
        VecX x(beta.size() + theta.size() + psi.size() + 3);
        x << beta, theta, psi, gamma;
        return x;
    }

    static BodyParams from_vector(const BodyTemplate& t, const VecX& x) {
        ParamLayout lay(t);
        if (x.size() != lay.size()) throw ConfigError("parameter vector size mismatch");
        BodyParams p;
        p.beta = x.segment(lay.beta_offset(), lay.n_beta);
        p.theta = x.segment(lay.theta_offset(), lay.n_theta);
        p.psi = x.segment(lay.psi_offset(), lay.n_psi);
        p.gamma = x.segment<3>(lay.gamma_offset());
        return p;
    }

    bool all_finite() const {
        return beta.allFinite() && theta.allFinite() && psi.allFinite() && gamma.allFinite();
    }

    /// Concatenated axis-angle sub-vector for a joint group (theta_b / theta_f / theta_h views).
    VecX theta_group(const BodyTemplate& t, const std::string& group_name) const {
        const auto& g = t.group(group_name);
        VecX out(3 * g.size());
        for (size_t k = 0; k < g.size(); ++k) out.segment<3>(3 * static_cast<int>(k)) = joint_rotation(g[k]);
        return out;
    }
};

struct PosedBody {
    Points vertices;       // world frame
    Points joints;         // posed joints, world frame
    Points vertex_normals;

    TriMesh as_mesh(const Faces& faces) const {
        TriMesh m;
        m.vertices = vertices;
        m.faces = faces;
        m.vertex_normals = vertex_normals;
        return m;
    }
};

/// Shape-corrected rest vertices: template + shape_basis*beta + expression_basis*psi.
inline Points shaped_vertices(const BodyTemplate& t, const VecX& beta, const VecX& psi) {
    Points out = t.mesh.vertices;
    VecX disp = VecX::Zero(3 * t.num_vertices());
    if (t.n_beta() > 0) disp += t.shape_basis * beta;
    if (t.n_psi() > 0) disp += t.expression_basis * psi;
    for (int i = 0; i < t.num_vertices(); ++i) out.row(i) += disp.segment<3>(3 * i).transpose();
    return out;
}

/// Rest-pose joints J(beta) regressed from the shaped vertices.
inline Points regress_joints(const BodyTemplate& t, const VecX& beta, const VecX& psi) {
    if (beta.size() != t.n_beta() || psi.size() != t.n_psi())
        throw ConfigError("regress_joints: coefficient dimension mismatch");
    return t.joint_regressor * shaped_vertices(t, beta, psi);
}

namespace detail {

struct KinematicState {
    Points shaped;                 // N x 3
    Points rest_joints;            // J x 3
    std::vector<Mat3> global_rot;  // world-from-joint rotation
    std::vector<Vec3> global_pos;  // joint position before gamma
};

inline KinematicState forward_kinematics(const BodyTemplate& t, const BodyParams& params) {
    KinematicState st;
    st.shaped = shaped_vertices(t, params.beta, params.psi);
    st.rest_joints = t.joint_regressor * st.shaped;
    const int J = t.num_joints();
    st.global_rot.resize(J);
    st.global_pos.resize(J);
    for (int j = 0; j < J; ++j) {
        Mat3 R = rodrigues(params.joint_rotation(j));
        Vec3 rest_j = st.rest_joints.row(j).transpose();
        if (t.parent[j] < 0) {
            st.global_rot[j] = R;
            st.global_pos[j] = rest_j;
        } else {
            int p = t.parent[j];
            Vec3 offset = rest_j - st.rest_joints.row(p).transpose();
            st.global_rot[j] = st.global_rot[p] * R;
            st.global_pos[j] = st.global_rot[p] * offset + st.global_pos[p];
        }
    }
    return st;
}

}  // namespace detail

/// Linear blend skinning over global joint transforms, then translated by gamma.
inline PosedBody forward(const BodyTemplate& t, const BodyParams& params,
                         bool with_normals = false) {
    if (!params.all_finite()) throw NumericError("forward: non-finite body parameters");
    auto st = detail::forward_kinematics(t, params);
    const int N = t.num_vertices();
    const int J = t.num_joints();

    PosedBody out;
    out.joints.resize(J, 3);
    for (int j = 0; j < J; ++j)
        out.joints.row(j) = (st.global_pos[j] + params.gamma).transpose();

    out.vertices.resize(N, 3);
    for (int i = 0; i < N; ++i) {
        Vec3 rest = st.shaped.row(i).transpose();
        Vec3 v = Vec3::Zero();
        for (int j = 0; j < J; ++j) {
            double w = t.skin_weights(i, j);
            if (w == 0.0) continue;
            Vec3 rest_j = st.rest_joints.row(j).transpose();
            v += w * (st.global_rot[j] * (rest - rest_j) + st.global_pos[j]);
        }
        out.vertices.row(i) = (v + params.gamma).transpose();
    }
    if (with_normals) {
        TriMesh m = out.as_mesh(t.mesh.faces);
        compute_vertex_normals(m);
        out.vertex_normals = m.vertex_normals;
    }
    return out;
}

/// Which parameter blocks a Jacobian is needed for. Inactive columns stay zero.
struct ParamMask {
    std::vector<char> active;  // size = ParamLayout::size()

    static ParamMask all(const BodyTemplate& t) {
        ParamMask m;
        m.active.assign(ParamLayout(t).size(), 1);
        return m;
    }
    bool is_active(int col) const { return active[col] != 0; }
};

struct ForwardDiff {
    PosedBody posed;
    ParamLayout layout;
    MatX vertex_jacobian;  // (3N) x P, empty if not requested
    MatX joint_jacobian;   // (3J) x P

    explicit ForwardDiff(const BodyTemplate& t) : layout(t) {}
};

/// Analytic partials of posed vertices and joints w.r.t. all parameters.
/// Forward-mode accumulation down the kinematic tree.
inline ForwardDiff forward_jacobian(const BodyTemplate& t, const BodyParams& params,
                                    bool want_vertices = true,
                                    const ParamMask* mask = nullptr) {
    if (!params.all_finite()) throw NumericError("forward_jacobian: non-finite body parameters");
    auto st = detail::forward_kinematics(t, params);
    const int N = t.num_vertices();
    const int J = t.num_joints();
    ForwardDiff fd(t);
    const ParamLayout& lay = fd.layout;
    const int P = lay.size();

    fd.posed.joints.resize(J, 3);
    for (int j = 0; j < J; ++j) fd.posed.joints.row(j) = (st.global_pos[j] + params.gamma).transpose();
    fd.posed.vertices.resize(N, 3);

    fd.joint_jacobian = MatX::Zero(3 * J, P);
    if (want_vertices) fd.vertex_jacobian = MatX::Zero(3 * N, P);

    auto active = [&](int col) { return mask == nullptr || mask->is_active(col); };

    // children lists for subtree propagation
    std::vector<std::vector<int>> children(J);
    for (int j = 1; j < J; ++j) children[t.parent[j]].push_back(j);

    // per-vertex influence lists
    std::vector<std::vector<std::pair<int, double>>> influences(N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < J; ++j)
            if (t.skin_weights(i, j) != 0.0) influences[i].emplace_back(j, t.skin_weights(i, j));

    // posed vertices (same accumulation as forward(), reusing the influence lists)
    for (int i = 0; i < N; ++i) {
        Vec3 rest = st.shaped.row(i).transpose();
        Vec3 v = Vec3::Zero();
        for (auto [j, w] : influences[i])
            v += w * (st.global_rot[j] * (rest - st.rest_joints.row(j).transpose()) + st.global_pos[j]);
        fd.posed.vertices.row(i) = (v + params.gamma).transpose();
    }

    std::vector<Mat3> dGR(J);
    std::vector<Vec3> dGt(J);
    std::vector<char> touched(J);

    auto scatter = [&](int col) {
        for (int j = 0; j < J; ++j)
            if (touched[j]) fd.joint_jacobian.block<3, 1>(3 * j, col) = dGt[j];
        if (!want_vertices) return;
        for (int i = 0; i < N; ++i) {
            Vec3 dv = Vec3::Zero();
            bool any = false;
            for (auto [j, w] : influences[i]) {
                if (!touched[j]) continue;
                any = true;
                Vec3 rest = st.shaped.row(i).transpose();
                dv += w * (dGR[j] * (rest - st.rest_joints.row(j).transpose()) + dGt[j]);
            }
            if (any) fd.vertex_jacobian.block<3, 1>(3 * i, col) = dv;
        }
    };

    // --- theta columns ---
    for (int k = 0; k < J; ++k) {
        for (int a = 0; a < 3; ++a) {
            int col = lay.theta_offset() + 3 * k + a;
            if (!active(col)) continue;
            std::fill(touched.begin(), touched.end(), 0);
            Mat3 dR = rodrigues_derivative(params.joint_rotation(k), a);
            dGR[k] = (t.parent[k] < 0) ? dR : (st.global_rot[t.parent[k]] * dR).eval();
            dGt[k] = Vec3::Zero();
            touched[k] = 1;
            // propagate through the subtree in topological order
            for (int j = k + 1; j < J; ++j) {
                int p = t.parent[j];
                if (p < 0 || !touched[p]) continue;
                Mat3 Rj = rodrigues(params.joint_rotation(j));
                Vec3 offset = (st.rest_joints.row(j) - st.rest_joints.row(p)).transpose();
                dGR[j] = dGR[p] * Rj;
                dGt[j] = dGR[p] * offset + dGt[p];
                touched[j] = 1;
            }
            scatter(col);
        }
    }

    // --- beta / psi columns ---
    auto shape_column = [&](const MatX& basis, int b, int col) {
        if (!active(col)) return;
        Points dshaped(N, 3);
        for (int i = 0; i < N; ++i) dshaped.row(i) = basis.block<3, 1>(3 * i, b).transpose();
        Points drest = t.joint_regressor * dshaped;
        std::fill(touched.begin(), touched.end(), 1);
        for (int j = 0; j < J; ++j) {
            dGR[j].setZero();  // rotations are unaffected by shape
            if (t.parent[j] < 0) {
                dGt[j] = drest.row(j).transpose();
            } else {
                int p = t.parent[j];
                Vec3 doffset = (drest.row(j) - drest.row(p)).transpose();
                dGt[j] = st.global_rot[p] * doffset + dGt[p];
            }
        }
        for (int j = 0; j < J; ++j) fd.joint_jacobian.block<3, 1>(3 * j, col) = dGt[j];
        if (!want_vertices) return;
        for (int i = 0; i < N; ++i) {
            Vec3 dv = Vec3::Zero();
            for (auto [j, w] : influences[i]) {
                Vec3 dlocal = (dshaped.row(i) - drest.row(j)).transpose();
                dv += w * (st.global_rot[j] * dlocal + dGt[j]);
            }
            fd.vertex_jacobian.block<3, 1>(3 * i, col) = dv;
        }
    };
    for (int b = 0; b < lay.n_beta; ++b) shape_column(t.shape_basis, b, lay.beta_offset() + b);
    for (int b = 0; b < lay.n_psi; ++b) shape_column(t.expression_basis, b, lay.psi_offset() + b);

    // --- gamma columns: identity per point ---
    for (int a = 0; a < 3; ++a) {
        int col = lay.gamma_offset() + a;
        if (!active(col)) continue;
        for (int j = 0; j < J; ++j) fd.joint_jacobian(3 * j + a, col) = 1.0;
        if (want_vertices)
            for (int i = 0; i < N; ++i) fd.vertex_jacobian(3 * i + a, col) = 1.0;
    }

    return fd;
}

/// Vertices that face the camera and survive a software depth-buffer occlusion
/// test against the body itself (buffer resolution 256x256).
inline std::set<int> visible_vertices(const PosedBody& body, const Faces& faces,
                                      const CameraModel& camera, int buffer_size = 256) {
    const int N = static_cast<int>(body.vertices.rows());
    Points normals = body.vertex_normals;
    if (normals.rows() != N) {
        TriMesh m;
        m.vertices = body.vertices;
        m.faces = faces;
        compute_vertex_normals(m);
        normals = m.vertex_normals;
    }

    double su = camera.width > 0 ? static_cast<double>(buffer_size) / camera.width : 1.0;
    double sv = camera.height > 0 ? static_cast<double>(buffer_size) / camera.height : 1.0;

    std::vector<double> zbuf(static_cast<size_t>(buffer_size) * buffer_size,
                             std::numeric_limits<double>::max());
    // rasterize all faces
    const int nf = static_cast<int>(faces.rows());
    std::vector<Vec3> pix(N);  // (u, v, depth), depth <= 0 marks behind-camera
    for (int i = 0; i < N; ++i) {
        Vec3 pc = camera.world_to_camera(body.vertices.row(i).transpose());
        if (pc.z() <= 1e-9) {
            pix[i] = Vec3(0, 0, -1);
            continue;
        }
        pix[i] = Vec3((camera.fx * pc.x() / pc.z() + camera.cx) * su,
                      (camera.fy * pc.y() / pc.z() + camera.cy) * sv, pc.z());
    }
    for (int f = 0; f < nf; ++f) {
        const Vec3& p0 = pix[faces(f, 0)];
        const Vec3& p1 = pix[faces(f, 1)];
        const Vec3& p2 = pix[faces(f, 2)];
        if (p0.z() <= 0 || p1.z() <= 0 || p2.z() <= 0) continue;
        int umin = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}))));
        int umax = std::min(buffer_size - 1, static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}))));
        int vmin = std::max(0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}))));
        int vmax = std::min(buffer_size - 1, static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}))));
        double denom = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
        if (std::abs(denom) < 1e-12) continue;
        for (int v = vmin; v <= vmax; ++v)
            for (int u = umin; u <= umax; ++u) {
                double cx = u + 0.5, cy = v + 0.5;
                double w1 = ((cx - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (cy - p0.y())) / denom;
                double w2 = ((p1.x() - p0.x()) * (cy - p0.y()) - (cx - p0.x()) * (p1.y() - p0.y())) / denom;
                double w0 = 1 - w1 - w2;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                double depth = w0 * p0.z() + w1 * p1.z() + w2 * p2.z();
                double& zb = zbuf[static_cast<size_t>(v) * buffer_size + u];
                if (depth < zb) zb = depth;
            }
    }

    std::set<int> visible;
    for (int i = 0; i < N; ++i) {
        if (pix[i].z() <= 0) continue;  // behind the camera
        Vec3 view = camera.view_dir(body.vertices.row(i).transpose());
        if (normals.row(i).dot(view) >= 0) continue;  // back-facing
        int u = static_cast<int>(pix[i].x());
        int v = static_cast<int>(pix[i].y());
        if (u < 0 || u >= buffer_size || v < 0 || v >= buffer_size) continue;  // outside frustum
        double zb = zbuf[static_cast<size_t>(v) * buffer_size + u];
        if (pix[i].z() <= zb + 1e-3 * pix[i].z() + 1e-6) visible.insert(i);
    }
    return visible;
}

}  // namespace scenefit
