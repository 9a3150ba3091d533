#pragma once

#include "scenefit/body.hpp"
#include "scenefit/bvh.hpp"
#include "scenefit/sdf.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace scenefit {

/// Bounded robust kernel: rho(e) = sigma^2 e^2 / (sigma^2 + e^2).
inline double geman_mcclure(double e, double sigma) {
    double s2 = sigma * sigma, e2 = e * e;
    return s2 * e2 / (s2 + e2);
}

/// d rho / d(e^2), convenient for chaining through squared residuals.
inline double geman_mcclure_deriv_sq(double e_sq, double sigma) {
    double s2 = sigma * sigma;
    double denom = s2 + e_sq;
    return s2 * s2 / (denom * denom);
}

struct Keypoint {
    std::string name;
    double x = 0, y = 0;
    double confidence = 1.0;
};

struct Keypoints2D {
    std::vector<Keypoint> points;

    Vec2 pixel(int i) const { return Vec2(points[i].x, points[i].y); }

    /// Joint index per keypoint (-1 when the template has no such joint).
    std::vector<int> resolve(const BodyTemplate& t) const {
        std::vector<int> idx(points.size());
        for (size_t i = 0; i < points.size(); ++i) idx[i] = t.joint_index(points[i].name);
        return idx;
    }
};

inline Keypoints2D load_keypoints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open keypoint file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (!j.is_array()) throw ParseError(path + ": expected a JSON array of keypoints");
    Keypoints2D kps;
    for (const auto& item : j) {
        Keypoint kp;
        kp.name = item.at("name").get<std::string>();
        kp.x = item.at("x").get<double>();
        kp.y = item.at("y").get<double>();
        kp.confidence = item.value("confidence", 1.0);
        if (kp.confidence < 0 || kp.confidence > 1)
            throw ParseError(path + ": confidence must be in [0,1] for joint " + kp.name);
        kps.points.push_back(kp);
    }
    return kps;
}

inline void save_keypoints(const Keypoints2D& kps, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& kp : kps.points)
        j.push_back({{"name", kp.name}, {"x", kp.x}, {"y", kp.y}, {"confidence", kp.confidence}});
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

enum class ContactMode { Surface, VertexOnly };
enum class ContactSetChoice { Annotated, AllVertices };

struct EnergyConfig {
    // steering weights (E_J carries implicit weight 1)
    double lambda_depth = 1.0;
    double lambda_theta_b = 20.0;
    double lambda_theta_f = 10.0;
    double lambda_theta_h = 10.0;
    double lambda_alpha = 10.0;
    double lambda_beta = 2.0;
    double lambda_expression = 10.0;
    double lambda_penetration = 1e4;  // lambda_C (self + scene)
    // Kept an order of magnitude below lambda_penetration: the contact term
    // wants every contact vertex at distance zero, which is geometrically
    // impossible for a curved surface patch, so a contact weight that rivals
    // the penetration weight presses the body into the scene.
    double lambda_contact = 1e3;      // lambda_P

    // robust kernel scales
    double sigma_joint = 100.0;   // pixels
    double sigma_depth = 0.05;    // meters
    double sigma_contact = 0.05;  // meters

    // skin clearance: the contact term stops pulling once a vertex is this
    // close to the surface. A vertex dragged to exactly zero distance ends up
    // marked as penetrating about half the time, because the interpolated
    // signed-distance grid and the exact closest-point query disagree at the
    // millimeter scale; a small standoff keeps satisfied contacts out of that
    // ambiguity band. The Geman-McClure derivative vanishes at zero residual,
    // so the clamped term stays C1 at the offset.
    double contact_offset = 0.008;  // meters

    // per-joint annealing weights kappa (by joint name; missing = 1)
    std::map<std::string, double> kappa;

    ContactMode contact_mode = ContactMode::Surface;
    ContactSetChoice contact_set = ContactSetChoice::Annotated;

    bool enable_joint = true;
    bool enable_depth = false;
    bool enable_contact = true;
    bool enable_penetration_scene = true;
    bool enable_penetration_self = true;
    bool enable_priors = true;

    // diagonal inverse variances for the Gaussian body-pose prior, ordered as
    // 3 entries per joint of the "body" group; empty = 1 everywhere except the
    // root joint, which is unconstrained
    VecX theta_b_inv_variance;

    // self-penetration cone field
    double cone_half_angle = M_PI / 6.0;

    double kappa_for(const std::string& joint_name) const {
        auto it = kappa.find(joint_name);
        return it == kappa.end() ? 1.0 : it->second;
    }
};

struct EnergyDiagnostics {
    int penetrating_vertices = 0;
    int outside_sdf_domain = 0;
    double max_penetration_depth = 0;  // meters, positive
    double mean_contact_distance = 0;  // meters, over the active contact set
};

struct EnergyReport {
    std::map<std::string, double> terms;     // unweighted term values
    std::map<std::string, double> weights;   // the lambda applied to each term
    std::map<std::string, double> timings;   // seconds per term
    double total = 0;
    EnergyDiagnostics diagnostics;
};

struct TermResult {
    double value = 0;
    VecX grad;  // full parameter layout
};

/// Carrier for one posed evaluation shared by all terms.
struct BodyEval {
    const BodyTemplate* tmpl = nullptr;
    BodyParams params;
    ForwardDiff fd;

    BodyEval(const BodyTemplate& t, const BodyParams& p, bool want_vertices,
             const ParamMask* mask = nullptr)
        : tmpl(&t), params(p), fd(forward_jacobian(t, p, want_vertices, mask)) {}

    int param_size() const { return fd.layout.size(); }
};

namespace detail {

/// grad += J_vertices^T * dE/dV for a sparse set of per-vertex gradients.
inline void chain_vertex_gradient(const ForwardDiff& fd,
                                  const std::vector<std::pair<int, Vec3>>& vertex_grads, VecX& grad) {
    for (const auto& [i, g] : vertex_grads)
        grad.noalias() += fd.vertex_jacobian.middleRows<3>(3 * i).transpose() * g;
}

}  // namespace detail

/// Reprojection data term: sum_i kappa_i omega_i rho_J(|proj(joint_i) - detection_i|).
inline TermResult e_joint(const BodyEval& eval, const CameraModel& camera, const Keypoints2D& keypoints,
                          const EnergyConfig& config) {
    TermResult res;
    res.grad = VecX::Zero(eval.param_size());
    auto joint_idx = keypoints.resolve(*eval.tmpl);
    for (size_t k = 0; k < keypoints.points.size(); ++k) {
        int j = joint_idx[k];
        if (j < 0) continue;
        double omega = keypoints.points[k].confidence;
        if (omega <= 0) continue;
        double kap = config.kappa_for(keypoints.points[k].name);
        if (kap <= 0) continue;
        Vec3 pj = eval.fd.posed.joints.row(j).transpose();
        auto pix = project(camera, pj);
        if (!pix) {
            // behind the camera: the robust kernel's supremum (so retreating
            // behind the camera never pays) plus a pull back toward the plane
            double z = camera.world_to_camera(pj).z();
            double s2 = config.sigma_joint * config.sigma_joint;
            res.value += kap * omega * s2 * (1.0 + z * z);
            Vec3 dz = camera.rotation.col(2);  // d z_cam / d p_world
            Eigen::RowVector3d dw = (kap * omega * s2 * 2.0 * z) * dz.transpose();
            res.grad.noalias() += eval.fd.joint_jacobian.middleRows<3>(3 * j).transpose() * dw.transpose();
            continue;
        }
        Vec2 r = *pix - keypoints.pixel(static_cast<int>(k));
        double e_sq = r.squaredNorm();
        res.value += kap * omega * geman_mcclure(std::sqrt(e_sq), config.sigma_joint);
        double drho = geman_mcclure_deriv_sq(e_sq, config.sigma_joint);
        // d(e^2)/d(params) = 2 r^T * dPix/dWorld * dJoint/dParams
        Eigen::Matrix<double, 2, 3> Jp = project_jacobian(camera, pj);
        Eigen::RowVector3d dw = 2.0 * kap * omega * drho * (r.transpose() * Jp);
        res.grad.noalias() += eval.fd.joint_jacobian.middleRows<3>(3 * j).transpose() * dw.transpose();
    }
    return res;
}

/// Depth data term: sum over cloud points of rho_D(distance to the nearest
/// visible body vertex). The visible set and correspondences are recomputed
/// here and held fixed within the evaluation.
inline TermResult e_depth(const BodyEval& eval, const CameraModel& camera, const PointCloud& cloud,
                          const EnergyConfig& config, bool* empty_warning = nullptr) {
    TermResult res;
    res.grad = VecX::Zero(eval.param_size());
    if (cloud.size() == 0) {
        if (empty_warning) *empty_warning = true;
        return res;
    }
    std::set<int> viz = visible_vertices(eval.fd.posed, eval.tmpl->mesh.faces, camera);
    if (viz.empty()) {
        if (empty_warning) *empty_warning = true;
        return res;
    }
    std::vector<int> viz_list(viz.begin(), viz.end());
    std::vector<std::pair<int, Vec3>> vgrads;
    for (int p = 0; p < cloud.size(); ++p) {
        Vec3 q = cloud.point(p);
        double best = std::numeric_limits<double>::max();
        int best_v = -1;
        for (int v : viz_list) {
            double d = (eval.fd.posed.vertices.row(v).transpose() - q).squaredNorm();
            if (d < best) {
                best = d;
                best_v = v;
            }
        }
        Vec3 diff = eval.fd.posed.vertices.row(best_v).transpose() - q;
        res.value += geman_mcclure(std::sqrt(best), config.sigma_depth);
        double drho = geman_mcclure_deriv_sq(best, config.sigma_depth);
        vgrads.emplace_back(best_v, (2.0 * drho * diff).eval());
    }
    detail::chain_vertex_gradient(eval.fd, vgrads, res.grad);
    return res;
}

/// Contact term over the configured contact-vertex set: rho_P of the distance
/// to the scene (surface mode) or to the nearest scene vertex (vertex mode).
inline TermResult e_contact(const BodyEval& eval, const TriMesh& scene, const Bvh& scene_bvh,
                            const EnergyConfig& config, double* mean_distance = nullptr) {
    TermResult res;
    res.grad = VecX::Zero(eval.param_size());
    std::vector<int> contact_verts;
    if (config.contact_set == ContactSetChoice::AllVertices) {
        contact_verts.resize(eval.tmpl->num_vertices());
        std::iota(contact_verts.begin(), contact_verts.end(), 0);
    } else {
        for (const auto& [name, set] : eval.tmpl->contact_sets)
            contact_verts.insert(contact_verts.end(), set.begin(), set.end());
    }
    std::vector<std::pair<int, Vec3>> vgrads;
    double dist_sum = 0;
    for (int v : contact_verts) {
        Vec3 p = eval.fd.posed.vertices.row(v).transpose();
        Vec3 target;
        if (config.contact_mode == ContactMode::Surface) {
            target = scene_bvh.closest_point(p).point;
        } else {
            double best = std::numeric_limits<double>::max();
            int best_i = 0;
            for (int i = 0; i < scene.num_vertices(); ++i) {
                double d = (scene.vertex(i) - p).squaredNorm();
                if (d < best) {
                    best = d;
                    best_i = i;
                }
            }
            target = scene.vertex(best_i);
        }
        Vec3 diff = p - target;
        double dist = diff.norm();
        dist_sum += dist;
        double e = dist - config.contact_offset;
        if (e <= 0) continue;  // within the skin clearance: contact satisfied
        res.value += geman_mcclure(e, config.sigma_contact);
        double drho = geman_mcclure_deriv_sq(e * e, config.sigma_contact);
        vgrads.emplace_back(v, (2.0 * drho * e / dist * diff).eval());
    }
    if (mean_distance)
        *mean_distance = contact_verts.empty() ? 0.0 : dist_sum / static_cast<double>(contact_verts.size());
    detail::chain_vertex_gradient(eval.fd, vgrads, res.grad);
    return res;
}

/// Scene inter-penetration: sum of d_i^2 over body vertices sampling a
/// negative signed distance (interpolated normals are unit, so |d n|^2 = d^2).
inline TermResult e_penetration_scene(const BodyEval& eval, const SdfGrid& sdf,
                                      EnergyDiagnostics* diag = nullptr) {
    TermResult res;
    res.grad = VecX::Zero(eval.param_size());
    std::vector<std::pair<int, Vec3>> vgrads;
    for (int v = 0; v < eval.tmpl->num_vertices(); ++v) {
        Vec3 p = eval.fd.posed.vertices.row(v).transpose();
        SdfSample s = sdf.sample(p);
        if (!s.inside_domain) {
            if (diag) diag->outside_sdf_domain++;
            continue;  // treated as non-penetrating
        }
        if (s.distance >= 0) continue;
        if (diag) {
            diag->penetrating_vertices++;
            diag->max_penetration_depth = std::max(diag->max_penetration_depth, -s.distance);
        }
        res.value += s.distance * s.distance;
        Vec3 g = sdf.sample_gradient(p);
        vgrads.emplace_back(v, (2.0 * s.distance * g).eval());
    }
    detail::chain_vertex_gradient(eval.fd, vgrads, res.grad);
    return res;
}

namespace detail {

/// Rest-pose mean edge length per face (constant cone height per face).
inline VecX rest_cone_heights(const BodyTemplate& t) {
    VecX h(t.mesh.num_faces());
    for (int f = 0; f < t.mesh.num_faces(); ++f) {
        Vec3 a = t.mesh.face_vertex(f, 0), b = t.mesh.face_vertex(f, 1), c = t.mesh.face_vertex(f, 2);
        h(f) = ((a - b).norm() + (b - c).norm() + (c - a).norm()) / 3.0;
    }
    return h;
}

}  // namespace detail

/// Self-penetration via local cone fields: for each colliding face pair, the
/// partner triangle's vertices are penalized by their depth inside a cone
/// anchored at the colliding triangle (apex at the centroid, axis along the
/// inward normal, fixed rest-pose height, radial falloff). Symmetric in the pair.
inline TermResult e_penetration_self(const BodyEval& eval, const EnergyConfig& config,
                                     const std::set<std::pair<int, int>>* frozen_pairs = nullptr) {
    TermResult res;
    res.grad = VecX::Zero(eval.param_size());
    const Faces& faces = eval.tmpl->mesh.faces;
    TriMesh posed = eval.fd.posed.as_mesh(faces);
    if (posed.num_faces() == 0) return res;
    std::set<std::pair<int, int>> computed;
    if (frozen_pairs == nullptr) {
        Bvh bvh(posed);
        computed = intersecting_face_pairs(posed, bvh, posed, bvh);
    }
    const std::set<std::pair<int, int>>& pairs = frozen_pairs ? *frozen_pairs : computed;
    if (pairs.empty()) return res;

    static thread_local std::map<const BodyTemplate*, VecX> height_cache;
    auto it = height_cache.find(eval.tmpl);
    if (it == height_cache.end())
        it = height_cache.emplace(eval.tmpl, detail::rest_cone_heights(*eval.tmpl)).first;
    const VecX& cone_heights = it->second;

    const double tan_phi = std::tan(config.cone_half_angle);
    std::vector<std::pair<int, Vec3>> vgrads;

    auto penalize = [&](int f_cone, int f_partner) {
        Vec3 p0 = posed.face_vertex(f_cone, 0), p1 = posed.face_vertex(f_cone, 1),
             p2 = posed.face_vertex(f_cone, 2);
        Vec3 m = (p1 - p0).cross(p2 - p0);
        double mlen = m.norm();
        if (mlen < 1e-14) return;
        Vec3 n = m / mlen;
        Vec3 axis = -n;  // inward
        Vec3 c = (p0 + p1 + p2) / 3.0;
        double h = cone_heights(f_cone);

        for (int corner = 0; corner < 3; ++corner) {
            int vi = faces(f_partner, corner);
            Vec3 v = posed.vertex(vi);
            Vec3 u = v - c;
            double t = u.dot(axis);
            if (t <= 1e-12 || t >= h) continue;
            Vec3 rvec = u - t * axis;
            double r_sq = rvec.squaredNorm();
            double cone_sq = t * t * tan_phi * tan_phi;
            double q = 1.0 - r_sq / cone_sq;
            if (q <= 0) continue;
            double g = t * (1.0 - t / h);
            double psi = g * q;
            res.value += psi * psi;

            // partials of psi w.r.t. t, r_sq
            double dg_dt = 1.0 - 2.0 * t / h;
            double dq_dt = 2.0 * r_sq / (cone_sq * t);
            double dpsi_dt = dg_dt * q + g * dq_dt;
            double dpsi_drsq = -g / cone_sq;
            double w = 2.0 * psi;

            // w.r.t. the partner vertex: dt = axis, drsq = 2 rvec
            Vec3 grad_v = w * (dpsi_dt * axis + dpsi_drsq * 2.0 * rvec);
            vgrads.emplace_back(vi, grad_v);

            // w.r.t. the cone triangle through centroid c and axis a = -n:
            //   dt/dc = -axis, drsq/dc = -2 rvec
            //   dt/da = u,     drsq/da = -2 t rvec
            Vec3 grad_c = w * (-dpsi_dt * axis - dpsi_drsq * 2.0 * rvec);
            Vec3 grad_a = w * (dpsi_dt * u + dpsi_drsq * (-2.0 * t) * rvec);
            Vec3 grad_n = -grad_a;

            Mat3 dn_proj = (Mat3::Identity() - n * n.transpose()) / mlen;
            Vec3 e1 = p1 - p0, e2 = p2 - p0;
            // dm/dp0 = skew(e2 - e1), dm/dp1 = -skew(e2), dm/dp2 = skew(e1)
            Vec3 gm = dn_proj.transpose() * grad_n;
            Vec3 grad_p0 = skew(e2 - e1).transpose() * gm + grad_c / 3.0;
            Vec3 grad_p1 = (-skew(e2)).transpose() * gm + grad_c / 3.0;
            Vec3 grad_p2 = skew(e1).transpose() * gm + grad_c / 3.0;
            vgrads.emplace_back(faces(f_cone, 0), grad_p0);
            vgrads.emplace_back(faces(f_cone, 1), grad_p1);
            vgrads.emplace_back(faces(f_cone, 2), grad_p2);
        }
    };

    for (const auto& [fa, fb] : pairs) {
        penalize(fa, fb);
        penalize(fb, fa);
    }
    detail::chain_vertex_gradient(eval.fd, vgrads, res.grad);
    return res;
}

/// L2 priors, the elbow/knee bending prior, and the Gaussian body-pose prior.
/// Individual components are reported through the named map.
inline TermResult e_priors(const BodyEval& eval, const EnergyConfig& config,
                           std::map<std::string, double>* components = nullptr,
                           std::map<std::string, VecX>* component_grads = nullptr) {
    const BodyTemplate& t = *eval.tmpl;
    const ParamLayout& lay = eval.fd.layout;
    const int P = lay.size();
    TermResult res;
    res.grad = VecX::Zero(P);

    auto record = [&](const std::string& name, double value, const VecX& grad, double lambda) {
        if (components) (*components)[name] = value;
        if (component_grads) (*component_grads)[name] = grad;
        res.value += lambda * value;
        res.grad += lambda * grad;
    };

    // shape prior |beta|^2
    {
        VecX g = VecX::Zero(P);
        g.segment(lay.beta_offset(), lay.n_beta) = 2.0 * eval.params.beta;
        record("E_beta", eval.params.beta.squaredNorm(), g, config.lambda_beta);
    }
    // expression prior |psi|^2
    {
        VecX g = VecX::Zero(P);
        g.segment(lay.psi_offset(), lay.n_psi) = 2.0 * eval.params.psi;
        record("E_expression", eval.params.psi.squaredNorm(), g, config.lambda_expression);
    }
    // hand and face pose L2 priors
    auto group_l2 = [&](const std::vector<std::string>& groups, const std::string& name, double lambda) {
        double value = 0;
        VecX g = VecX::Zero(P);
        for (const auto& gname : groups) {
            for (int j : t.group(gname)) {
                Vec3 th = eval.params.joint_rotation(j);
                value += th.squaredNorm();
                g.segment<3>(lay.theta_offset() + 3 * j) += 2.0 * th;
            }
        }
        record(name, value, g, lambda);
    };
    group_l2({"left_hand", "right_hand"}, "E_theta_h", config.lambda_theta_h);
    group_l2({"face"}, "E_theta_f", config.lambda_theta_f);

    // bending prior: sum exp(sign * theta) over elbow/knee bend DOFs
    {
        double value = 0;
        VecX g = VecX::Zero(P);
        for (const auto& dof : t.bend_dofs) {
            double th = eval.params.theta(3 * dof.joint + dof.axis);
            double e = std::exp(dof.sign * th);
            value += e;
            g(lay.theta_offset() + 3 * dof.joint + dof.axis) += dof.sign * e;
        }
        record("E_alpha", value, g, config.lambda_alpha);
    }

    // Gaussian body pose prior theta_b^T Sigma^-1 theta_b; the root joint is
    // unconstrained by default
    {
        const auto& body = t.group("body");
        VecX inv_var = config.theta_b_inv_variance;
        if (inv_var.size() == 0) {
            inv_var = VecX::Ones(3 * body.size());
            for (size_t k = 0; k < body.size(); ++k)
                if (t.parent[body[k]] < 0) inv_var.segment<3>(3 * static_cast<int>(k)).setZero();
        }
        if (inv_var.size() != static_cast<int>(3 * body.size()))
            throw ConfigError("theta_b_inv_variance size must be 3 * |body group|");
        double value = 0;
        VecX g = VecX::Zero(P);
        for (size_t k = 0; k < body.size(); ++k) {
            int j = body[k];
            for (int a = 0; a < 3; ++a) {
                double th = eval.params.theta(3 * j + a);
                double iv = inv_var(3 * static_cast<int>(k) + a);
                value += iv * th * th;
                g(lay.theta_offset() + 3 * j + a) += 2.0 * iv * th;
            }
        }
        record("E_theta_b", value, g, config.lambda_theta_b);
    }
    return res;
}

/// Everything the total objective needs besides the parameters.
struct FitInputs {
    const BodyTemplate* tmpl = nullptr;
    const CameraModel* camera = nullptr;
    const Keypoints2D* keypoints = nullptr;
    const PointCloud* cloud = nullptr;   // optional
    const TriMesh* scene = nullptr;      // with BVH, for the contact term
    const Bvh* scene_bvh = nullptr;
    const SdfGrid* sdf = nullptr;
};

/// Weighted sum of all enabled terms with gradient and per-term timings.
inline EnergyReport total_energy(const FitInputs& in, const BodyParams& params,
                                 const EnergyConfig& config, VecX* grad_out = nullptr,
                                 const ParamMask* mask = nullptr) {
    if (in.tmpl == nullptr) throw ConfigError("total_energy: missing body template");
    const bool want_vertices = config.enable_depth || config.enable_contact ||
                               config.enable_penetration_scene || config.enable_penetration_self;
    BodyEval eval(*in.tmpl, params, want_vertices, mask);

    EnergyReport report;
    VecX grad = VecX::Zero(eval.param_size());
    using clock = std::chrono::steady_clock;
    auto timed = [&](const std::string& name, double lambda, auto&& fn) {
        auto t0 = clock::now();
        TermResult term = fn();
        report.timings[name] = std::chrono::duration<double>(clock::now() - t0).count();
        report.terms[name] = term.value;
        report.weights[name] = lambda;
        report.total += lambda * term.value;
        grad.noalias() += lambda * term.grad;
    };

    if (config.enable_joint) {
        if (!in.camera || !in.keypoints) throw ConfigError("total_energy: E_J requires camera and keypoints");
        timed("E_J", 1.0, [&] { return e_joint(eval, *in.camera, *in.keypoints, config); });
    }
    if (config.enable_depth) {
        if (!in.camera || !in.cloud) throw ConfigError("total_energy: E_D requires camera and point cloud");
        timed("E_D", config.lambda_depth, [&] { return e_depth(eval, *in.camera, *in.cloud, config); });
    }
    if (config.enable_contact) {
        if (!in.scene || !in.scene_bvh) throw ConfigError("total_energy: E_P requires the scene mesh");
        timed("E_P", config.lambda_contact, [&] {
            return e_contact(eval, *in.scene, *in.scene_bvh, config,
                             &report.diagnostics.mean_contact_distance);
        });
    }
    if (config.enable_penetration_scene) {
        if (!in.sdf) throw ConfigError("total_energy: E_C_inter requires the scene SDF");
        timed("E_C_inter", config.lambda_penetration,
              [&] { return e_penetration_scene(eval, *in.sdf, &report.diagnostics); });
    }
    if (config.enable_penetration_self) {
        timed("E_C_self", config.lambda_penetration,
              [&] { return e_penetration_self(eval, config); });
    }
    if (config.enable_priors) {
        timed("E_priors", 1.0, [&] { return e_priors(eval, config); });
    }
    if (grad_out) *grad_out = grad;
    return report;
}

}  // namespace scenefit
