#pragma once

#include "scenefit/energy.hpp"
#include "scenefit/lbfgs.hpp"

#include <chrono>
#include <fstream>
#include <string>
#include <vector>

namespace scenefit {

/// One optimization stage: which parameter blocks move and any config overrides.
struct FitStage {
    std::string name;
    std::vector<std::string> blocks;  // gamma | theta_root | theta_b | theta_h | theta_f | beta | psi
    LbfgsOptions lbfgs;
    // overrides applied on top of the base energy config for this stage
    std::map<std::string, double> weight_overrides;  // by config field name, e.g. "lambda_contact"
    std::map<std::string, double> sigma_overrides;   // "sigma_joint" / "sigma_depth" / "sigma_contact"
    std::map<std::string, double> kappa_overrides;   // by joint name
    std::map<std::string, bool> term_overrides;      // "joint" / "depth" / "contact" / ...
};

struct FitSchedule {
    std::vector<FitStage> stages;
};

namespace detail {

inline const std::vector<std::string> kKnownBlocks = {
    "gamma", "theta_root", "theta_b", "theta_h", "theta_f", "beta", "psi"};

inline void apply_weight_override(EnergyConfig& cfg, const std::string& key, double value) {
    if (key == "lambda_depth") cfg.lambda_depth = value;
    else if (key == "lambda_theta_b") cfg.lambda_theta_b = value;
    else if (key == "lambda_theta_f") cfg.lambda_theta_f = value;
    else if (key == "lambda_theta_h") cfg.lambda_theta_h = value;
    else if (key == "lambda_alpha") cfg.lambda_alpha = value;
    else if (key == "lambda_beta") cfg.lambda_beta = value;
    else if (key == "lambda_expression") cfg.lambda_expression = value;
    else if (key == "lambda_penetration") cfg.lambda_penetration = value;
    else if (key == "lambda_contact") cfg.lambda_contact = value;
    else throw ConfigError("unknown weight override: " + key);
}

inline void apply_sigma_override(EnergyConfig& cfg, const std::string& key, double value) {
    if (key == "sigma_joint") cfg.sigma_joint = value;
    else if (key == "sigma_depth") cfg.sigma_depth = value;
    else if (key == "sigma_contact") cfg.sigma_contact = value;
    else if (key == "contact_offset") cfg.contact_offset = value;
    else throw ConfigError("unknown sigma override: " + key);
}

inline void apply_term_override(EnergyConfig& cfg, const std::string& key, bool value) {
    if (key == "joint") cfg.enable_joint = value;
    else if (key == "depth") cfg.enable_depth = value;
    else if (key == "contact") cfg.enable_contact = value;
    else if (key == "penetration_scene") cfg.enable_penetration_scene = value;
    else if (key == "penetration_self") cfg.enable_penetration_self = value;
    else if (key == "priors") cfg.enable_priors = value;
    else throw ConfigError("unknown term override: " + key);
}

}  // namespace detail

inline EnergyConfig stage_config(const EnergyConfig& base, const FitStage& stage) {
    EnergyConfig cfg = base;
    for (const auto& [k, v] : stage.weight_overrides) detail::apply_weight_override(cfg, k, v);
    for (const auto& [k, v] : stage.sigma_overrides) detail::apply_sigma_override(cfg, k, v);
    for (const auto& [k, v] : stage.term_overrides) detail::apply_term_override(cfg, k, v);
    for (const auto& [k, v] : stage.kappa_overrides) cfg.kappa[k] = v;
    return cfg;
}

inline ParamMask stage_mask(const BodyTemplate& t, const FitStage& stage) {
    ParamLayout lay(t);
    ParamMask mask;
    mask.active.assign(lay.size(), 0);
    auto enable_joint = [&](int j) {
        for (int a = 0; a < 3; ++a) mask.active[lay.theta_offset() + 3 * j + a] = 1;
    };
    for (const auto& block : stage.blocks) {
        if (block == "gamma") {
            for (int a = 0; a < 3; ++a) mask.active[lay.gamma_offset() + a] = 1;
        } else if (block == "beta") {
            for (int b = 0; b < lay.n_beta; ++b) mask.active[lay.beta_offset() + b] = 1;
        } else if (block == "psi") {
            for (int b = 0; b < lay.n_psi; ++b) mask.active[lay.psi_offset() + b] = 1;
        } else if (block == "theta_root") {
            for (int j = 0; j < t.num_joints(); ++j)
                if (t.parent[j] < 0) enable_joint(j);
        } else if (block == "theta_b") {
            for (int j : t.group("body")) enable_joint(j);
        } else if (block == "theta_h") {
            for (int j : t.group("left_hand")) enable_joint(j);
            for (int j : t.group("right_hand")) enable_joint(j);
        } else if (block == "theta_f") {
            for (int j : t.group("face")) enable_joint(j);
        } else {
            throw ConfigError("unknown parameter block: " + block);
        }
    }
    return mask;
}

inline std::vector<int> active_indices(const ParamMask& mask) {
    std::vector<int> idx;
    for (size_t i = 0; i < mask.active.size(); ++i)
        if (mask.active[i]) idx.push_back(static_cast<int>(i));
    return idx;
}

/// Staged defaults: translation/orientation from sparse joints first, then
/// body pose, then all parameters, then the scene terms with the contact
/// kernel annealed from wide to tight.
inline FitSchedule default_schedule() {
    FitSchedule sched;
    auto scene_off = std::map<std::string, bool>{
        {"contact", false}, {"penetration_scene", false}, {"penetration_self", false}, {"depth", false}};

    FitStage s1;
    s1.name = "translation";
    s1.blocks = {"gamma", "theta_root"};
    s1.lbfgs.max_iterations = 60;
    s1.term_overrides = scene_off;
    s1.term_overrides["priors"] = false;
    s1.kappa_overrides = {{"pelvis", 5}, {"spine1", 5}, {"spine2", 5}, {"spine3", 5},
                          {"left_hip", 3},  {"right_hip", 3},  {"left_shoulder", 3}, {"right_shoulder", 3}};
    sched.stages.push_back(s1);

    // The pose stages keep a gentle penetration term active: the joint term
    // alone is free to drift along the depth-ambiguous viewing direction to
    // overfit keypoint noise, and once it has drifted half a metre the
    // saturating kernels cannot pull it back. Contact stays off here — it
    // attracts the body toward whichever surface happens to be nearest and
    // can drag an already-good pose sideways before the pose has settled.
    auto scene_gentle = std::map<std::string, double>{{"lambda_penetration", 1e3}};

    FitStage s2;
    s2.name = "body_pose";
    s2.blocks = {"gamma", "theta_b"};
    s2.lbfgs.max_iterations = 80;
    s2.term_overrides = {{"depth", false}, {"penetration_self", false}, {"contact", false}};
    s2.weight_overrides = scene_gentle;
    sched.stages.push_back(s2);

    FitStage s3;
    s3.name = "all_params";
    s3.blocks = {"gamma", "theta_b", "theta_h", "theta_f", "beta", "psi"};
    s3.lbfgs.max_iterations = 80;
    s3.term_overrides = s2.term_overrides;
    s3.weight_overrides = scene_gentle;
    sched.stages.push_back(s3);

    // Scene terms are introduced gently: full-strength contact/penetration
    // gradients at an infeasible start produce line-search steps large enough
    // to leave the basin of the (saturating) joint kernel.
    //
    // The first scene stage is rigid (translation + root orientation only):
    // monocular depth error is resolved by sliding the whole body along the
    // joint-term-flat viewing direction until the scene terms are satisfied,
    // without letting individual limbs absorb the scene gradients.
    FitStage s35;
    s35.name = "scene_align";
    s35.blocks = {"gamma", "theta_root"};
    s35.lbfgs.max_iterations = 60;
    s35.lbfgs.max_step = 0.2;
    s35.sigma_overrides = {{"sigma_contact", 0.3}};
    s35.weight_overrides = {{"lambda_penetration", 1e3}};
    sched.stages.push_back(s35);

    // The scene stages down-weight the ankle detections. The ankles are the
    // keypoints that monocular depth ambiguity hurts the most: a foot can sit
    // a decimetre above the floor while reprojecting onto its detection
    // pixel-perfectly, and at full weight the data term pins it there against
    // the contact pull. With the knees still held at full weight, releasing
    // the ankles lets the contact term resolve the shank direction while the
    // rest of the pose stays anchored to the detections.
    auto ankle_release = std::map<std::string, double>{{"left_ankle", 0.1}, {"right_ankle", 0.1}};

    FitStage s4;
    s4.name = "scene_coarse";
    s4.blocks = s3.blocks;
    s4.lbfgs.max_iterations = 80;
    s4.lbfgs.max_step = 0.2;
    s4.sigma_overrides = {{"sigma_contact", 0.2}};
    s4.weight_overrides = {{"lambda_penetration", 1e3}, {"lambda_contact", 300}};
    s4.kappa_overrides = ankle_release;
    sched.stages.push_back(s4);

    // The fine stages drop the contact weight well below the penetration
    // weight: contact keeps pulling every contact vertex toward distance
    // zero, so at equal weights the equilibrium presses part of the body
    // surface through the scene. A 100:1 penetration:contact ratio leaves
    // the body resting on, rather than inside, the surface.
    FitStage s5;
    s5.name = "scene_fine";
    s5.blocks = s3.blocks;
    s5.lbfgs.max_iterations = 120;
    s5.lbfgs.max_step = 0.2;
    s5.weight_overrides = {{"lambda_contact", 1e3}};
    s5.sigma_overrides = {{"sigma_contact", 0.1}};
    s5.kappa_overrides = ankle_release;
    sched.stages.push_back(s5);

    // The polish stage restarts L-BFGS with fresh curvature memory and a much
    // stiffer penetration weight: residual penetrations left at a slow saddle
    // by the previous stage are tiny in energy but large against the accuracy
    // target, so the final stage reweights them until they dominate.
    FitStage s6;
    s6.name = "polish";
    s6.blocks = s3.blocks;
    s6.lbfgs.max_iterations = 240;
    s6.lbfgs.max_step = 0.2;
    s6.weight_overrides = {{"lambda_contact", 2e3}, {"lambda_penetration", 4e5}};
    s6.kappa_overrides = ankle_release;
    // A wider skin clearance in the final stiff stage: the strong contact
    // weight would otherwise pull resting surfaces through the millimetre
    // band where the grid distance and the exact surface distance disagree.
    s6.sigma_overrides = {{"contact_offset", 0.012}};
    sched.stages.push_back(s6);
    return sched;
}

// ---------------------------------------------------------------------------
// Schedule JSON I/O
// ---------------------------------------------------------------------------

inline nlohmann::json schedule_to_json(const FitSchedule& sched) {
    nlohmann::json j;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : sched.stages) {
        nlohmann::json js;
        js["name"] = s.name;
        js["blocks"] = s.blocks;
        js["max_iterations"] = s.lbfgs.max_iterations;
        js["grad_tolerance"] = s.lbfgs.grad_tolerance;
        if (s.lbfgs.max_step > 0) js["max_step"] = s.lbfgs.max_step;
        if (!s.weight_overrides.empty()) js["weights"] = s.weight_overrides;
        if (!s.sigma_overrides.empty()) js["sigma"] = s.sigma_overrides;
        if (!s.kappa_overrides.empty()) js["kappa"] = s.kappa_overrides;
        if (!s.term_overrides.empty()) js["terms"] = s.term_overrides;
        j["stages"].push_back(js);
    }
    return j;
}

inline FitSchedule schedule_from_json(const nlohmann::json& j) {
    FitSchedule sched;
    if (!j.contains("stages") || !j["stages"].is_array())
        throw ConfigError("schedule: expected a \"stages\" array");
    for (const auto& js : j["stages"]) {
        FitStage s;
        s.name = js.value("name", "stage" + std::to_string(sched.stages.size() + 1));
        s.blocks = js.at("blocks").get<std::vector<std::string>>();
        for (const auto& b : s.blocks)
            if (std::find(detail::kKnownBlocks.begin(), detail::kKnownBlocks.end(), b) ==
                detail::kKnownBlocks.end())
                throw ConfigError("schedule: unknown block \"" + b + "\" in stage " + s.name);
        s.lbfgs.max_iterations = js.value("max_iterations", 80);
        s.lbfgs.grad_tolerance = js.value("grad_tolerance", 1e-6);
        s.lbfgs.max_step = js.value("max_step", 0.0);
        if (js.contains("weights")) s.weight_overrides = js["weights"].get<std::map<std::string, double>>();
        if (js.contains("sigma")) s.sigma_overrides = js["sigma"].get<std::map<std::string, double>>();
        if (js.contains("kappa")) s.kappa_overrides = js["kappa"].get<std::map<std::string, double>>();
        if (js.contains("terms")) s.term_overrides = js["terms"].get<std::map<std::string, bool>>();
        sched.stages.push_back(s);
    }
    if (sched.stages.empty()) throw ConfigError("schedule: needs at least one stage");
    return sched;
}

inline FitSchedule load_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schedule file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return schedule_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<Vec2> find_keypoint(const Keypoints2D& kps, const std::string& name) {
    for (const auto& kp : kps.points)
        if (kp.name == name && kp.confidence > 0) return Vec2(kp.x, kp.y);
    return std::nullopt;
}

}  // namespace detail

/// Initial root translation from the ratio of the template torso size to the
/// detected torso size in pixels, placed along the ray through the torso
/// center; root yaw chosen so the projected shoulders match the detections.
/// Returns up to `max_candidates` hypotheses ordered by reprojection error;
/// the first is the best single initialization.
inline std::vector<BodyParams> initialize_candidates(const BodyTemplate& t,
                                                     const CameraModel& camera,
                                                     const Keypoints2D& keypoints,
                                                     int max_candidates = 1) {

    auto l_sh = detail::find_keypoint(keypoints, "left_shoulder");
    auto r_sh = detail::find_keypoint(keypoints, "right_shoulder");
    auto l_hip = detail::find_keypoint(keypoints, "left_hip");
    auto r_hip = detail::find_keypoint(keypoints, "right_hip");
    if (!l_sh || !r_sh || !l_hip || !r_hip)
        throw ConfigError("initialize_params: needs shoulder and hip keypoints");
    Vec2 mid_sh = 0.5 * (*l_sh + *r_sh);
    Vec2 mid_hip = 0.5 * (*l_hip + *r_hip);
    if ((mid_sh - mid_hip).norm() < 1e-6)
        throw ConfigError("initialize_params: degenerate torso keypoints");

    BodyParams rest_params = BodyParams::zero(t);
    Points rest_joints = regress_joints(t, rest_params.beta, rest_params.psi);
    auto jidx = [&](const char* n) {
        int i = t.joint_index(n);
        if (i < 0) throw ConfigError(std::string("initialize_params: template lacks joint ") + n);
        return i;
    };

    double torso_px = (mid_sh - mid_hip).norm();
    double shoulder_px = (*l_sh - *r_sh).norm();
    Vec3 rest_mid_sh =
        0.5 * (rest_joints.row(jidx("left_shoulder")) + rest_joints.row(jidx("right_shoulder"))).transpose();
    Vec3 rest_mid_hip = 0.5 * (rest_joints.row(jidx("left_hip")) + rest_joints.row(jidx("right_hip"))).transpose();
    Vec3 rest_torso = rest_mid_sh - rest_mid_hip;
    Vec3 rest_shoulder =
        (rest_joints.row(jidx("left_shoulder")) - rest_joints.row(jidx("right_shoulder"))).transpose();

    double f = 0.5 * (camera.fx + camera.fy);
    Vec2 mid_torso = 0.5 * (mid_sh + mid_hip);

    // Candidate root orientations: four yaws around the vertical, each also
    // tried pitched forward/backward by 90 degrees so that lying poses start
    // near the right orientation basin, and each combined with a rest or a
    // canonical seated body pose (hips and knees at right angles) so that
    // seated bodies are not forced to compete through a standing hypothesis.
    //
    // Depth is estimated per candidate: under that orientation the torso and
    // shoulder segments have known components perpendicular to the viewing
    // axis, so their observed pixel lengths give a least-squares estimate of
    // f/z without the foreshortening bias that a naive single-segment ratio
    // suffers for non-upright bodies. The candidate with the lowest torso
    // reprojection error wins.
    Vec3 to_cam = camera.center() - back_project(camera, mid_torso, 1.0);
    to_cam.y() = 0;
    double yaw0 = (to_cam.norm() < 1e-9) ? 0.0 : std::atan2(to_cam.x(), to_cam.z());
    std::vector<std::pair<double, BodyParams>> scored;
    std::vector<Vec3> root_candidates;
    for (double yaw : {yaw0, yaw0 + 0.5 * M_PI, yaw0 + M_PI, yaw0 + 1.5 * M_PI})
        for (double pitch : {0.0, -0.5 * M_PI, 0.5 * M_PI}) {
            Eigen::AngleAxisd aa(Eigen::AngleAxisd(yaw, Vec3::UnitY()) * Eigen::AngleAxisd(pitch, Vec3::UnitX()));
            root_candidates.push_back(aa.angle() * aa.axis());
        }
    std::vector<std::vector<std::pair<int, Vec3>>> pose_presets;
    pose_presets.push_back({});  // rest pose
    {
        int lh = t.joint_index("left_hip"), rh = t.joint_index("right_hip");
        int lk = t.joint_index("left_knee"), rk = t.joint_index("right_knee");
        if (lh >= 0 && rh >= 0 && lk >= 0 && rk >= 0) {
            Vec3 flex(-0.5 * M_PI, 0, 0), extend(0.5 * M_PI, 0, 0);
            pose_presets.push_back({{lh, flex}, {rh, flex}, {lk, extend}, {rk, extend}});
        }
    }
    Vec3 view_axis = camera.rotation.col(2);
    for (const Vec3& root : root_candidates) {
        Mat3 R = Eigen::AngleAxisd(root.norm() < 1e-12 ? 0.0 : root.norm(),
                                   root.norm() < 1e-12 ? Vec3::UnitY() : Vec3(root.normalized()))
                     .toRotationMatrix();
        auto perp_len = [&](const Vec3& seg) {
            Vec3 w = R * seg;
            return (w - view_axis * view_axis.dot(w)).norm();
        };
        double lp = perp_len(rest_torso), wp = perp_len(rest_shoulder);
        double denom = lp * lp + wp * wp;
        if (denom < 1e-12) continue;
        double inv_depth_f = (lp * torso_px + wp * shoulder_px) / denom;  // f / z
        if (inv_depth_f < 1e-9) continue;
        double depth = f / inv_depth_f;
        Vec3 torso_world = back_project(camera, mid_torso, depth);

        for (const auto& preset : pose_presets) {
            BodyParams cand = BodyParams::zero(t);
            cand.theta.segment<3>(0) = root;
            for (const auto& [joint, angles] : preset) cand.theta.segment<3>(3 * joint) = angles;
            // translation so the posed torso center lands on the back-projected point
            PosedBody posed = forward(t, cand, false);
            Vec3 posed_mid =
                0.25 * (posed.joints.row(jidx("left_shoulder")) + posed.joints.row(jidx("right_shoulder")) +
                        posed.joints.row(jidx("left_hip")) + posed.joints.row(jidx("right_hip")))
                           .transpose();
            cand.gamma = torso_world - posed_mid;
            posed = forward(t, cand, false);
            // Score against every named keypoint, robustly capped so one limb
            // posed differently from the hypothesis cannot dominate: the limbs,
            // not the near-symmetric torso quad, are what distinguish e.g.
            // lying face-up from lying face-down.
            double err = 0;
            for (const auto& kp : keypoints.points) {
                if (kp.confidence <= 0) continue;
                int ji = t.joint_index(kp.name);
                if (ji < 0) continue;
                auto pix = project(camera, posed.joints.row(ji).transpose());
                double sq = pix ? (*pix - Vec2(kp.x, kp.y)).squaredNorm() : 4e4;
                err += std::min(sq, 4e4);
            }
            scored.emplace_back(err, cand);
        }
    }
    if (scored.empty()) throw ConfigError("initialize_candidates: no feasible hypothesis");
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<BodyParams> out;
    for (const auto& [err, cand] : scored) {
        out.push_back(cand);
        if (static_cast<int>(out.size()) >= max_candidates) break;
    }
    return out;
}

inline BodyParams initialize_params(const BodyTemplate& t, const CameraModel& camera,
                                    const Keypoints2D& keypoints) {
    return initialize_candidates(t, camera, keypoints, 1).front();
}

// ---------------------------------------------------------------------------
// Staged fit
// ---------------------------------------------------------------------------

struct StageRecord {
    std::string name;
    int iterations = 0;
    double initial_energy = 0;
    double final_energy = 0;
    bool line_search_failed = false;
    EnergyReport report;  // at the stage end
};

struct FitResult {
    BodyParams params;
    PosedBody posed;
    EnergyReport final_report;
    std::vector<StageRecord> stages;
    double seconds = 0;
};

/// Run the staged schedule from the given initialization. Each stage optimizes
/// only its active blocks with L-BFGS over the masked subspace.
inline FitResult fit(const FitInputs& in, const BodyParams& init, const EnergyConfig& base_config,
                     const FitSchedule& schedule) {
    if (!in.tmpl) throw ConfigError("fit: missing body template");
    auto t0 = std::chrono::steady_clock::now();
    const BodyTemplate& t = *in.tmpl;

    FitResult result;
    result.params = init;

    for (const auto& stage : schedule.stages) {
        EnergyConfig cfg = stage_config(base_config, stage);
        ParamMask mask = stage_mask(t, stage);
        std::vector<int> active = active_indices(mask);
        if (active.empty()) throw ConfigError("fit: stage " + stage.name + " has no active parameters");

        VecX x_full = result.params.to_vector();
        VecX x_sub(active.size());
        for (size_t i = 0; i < active.size(); ++i) x_sub(static_cast<int>(i)) = x_full(active[i]);

        Objective obj = [&](const VecX& xs, VecX* grad) -> double {
            VecX xf = x_full;
            for (size_t i = 0; i < active.size(); ++i) xf(active[i]) = xs(static_cast<int>(i));
            BodyParams p = BodyParams::from_vector(t, xf);
            VecX g_full;
            EnergyReport rep = total_energy(in, p, cfg, grad ? &g_full : nullptr, &mask);
            if (grad) {
                grad->resize(xs.size());
                for (size_t i = 0; i < active.size(); ++i)
                    (*grad)(static_cast<int>(i)) = g_full(active[i]);
            }
            return rep.total;
        };

        LbfgsResult opt = lbfgs_minimize(obj, x_sub, stage.lbfgs);
        for (size_t i = 0; i < active.size(); ++i) x_full(active[i]) = opt.x(static_cast<int>(i));
        result.params = BodyParams::from_vector(t, x_full);

        StageRecord rec;
        rec.name = stage.name;
        rec.iterations = opt.iterations;
        rec.initial_energy = opt.f_history.front();
        rec.final_energy = opt.f;
        rec.line_search_failed = opt.line_search_failed;
        rec.report = total_energy(in, result.params, cfg, nullptr, nullptr);
        result.stages.push_back(std::move(rec));
    }

    result.posed = forward(t, result.params, true);
    EnergyConfig final_cfg =
        schedule.stages.empty() ? base_config : stage_config(base_config, schedule.stages.back());
    result.final_report = total_energy(in, result.params, final_cfg, nullptr, nullptr);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

// ---------------------------------------------------------------------------
// Parameter JSON I/O
// ---------------------------------------------------------------------------

inline void save_params(const BodyParams& p, const std::string& path) {
    nlohmann::json j;
    j["beta"] = std::vector<double>(p.beta.data(), p.beta.data() + p.beta.size());
    j["theta"] = std::vector<double>(p.theta.data(), p.theta.data() + p.theta.size());
    j["psi"] = std::vector<double>(p.psi.data(), p.psi.data() + p.psi.size());
    j["gamma"] = {p.gamma.x(), p.gamma.y(), p.gamma.z()};
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

inline BodyParams load_params(const BodyTemplate& t, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open parameter file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    BodyParams p = BodyParams::zero(t);
    auto load_vec = [&](const char* key, VecX& dst) {
        auto v = j.at(key).get<std::vector<double>>();
        if (static_cast<int>(v.size()) != dst.size())
            throw ParseError(path + ": " + key + " has wrong length");
        dst = Eigen::Map<const VecX>(v.data(), static_cast<int>(v.size()));
    };
    load_vec("beta", p.beta);
    load_vec("theta", p.theta);
    load_vec("psi", p.psi);
    auto g = j.at("gamma").get<std::vector<double>>();
    if (g.size() != 3) throw ParseError(path + ": gamma must have 3 entries");
    p.gamma = Vec3(g[0], g[1], g[2]);
    return p;
}

}  // namespace scenefit
