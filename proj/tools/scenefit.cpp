#include "scenefit/builtin_body.hpp"
#include "scenefit/fit.hpp"
#include "scenefit/metrics.hpp"
#include "scenefit/sdf.hpp"
#include "scenefit/synth.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace scenefit;

namespace {

int thread_cap(int jobs) {
    int cap = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SCENEFIT_THREADS")) {
        int env_cap = std::atoi(env);
        if (env_cap > 0) cap = std::min(cap, env_cap);
    }
    return std::max(cap, 1);
}

BodyTemplate load_template_or_builtin(const std::string& path) {
    if (path.empty()) return builtin_template();
    return load_template(path);
}

void apply_config_file(EnergyConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    auto num = [&](const char* key, double& dst) {
        if (j.contains(key)) dst = j.at(key).get<double>();
    };
    auto flag = [&](const char* key, bool& dst) {
        if (j.contains(key)) dst = j.at(key).get<bool>();
    };
    num("lambda_depth", cfg.lambda_depth);
    num("lambda_theta_b", cfg.lambda_theta_b);
    num("lambda_theta_f", cfg.lambda_theta_f);
    num("lambda_theta_h", cfg.lambda_theta_h);
    num("lambda_alpha", cfg.lambda_alpha);
    num("lambda_beta", cfg.lambda_beta);
    num("lambda_expression", cfg.lambda_expression);
    num("lambda_penetration", cfg.lambda_penetration);
    num("lambda_contact", cfg.lambda_contact);
    num("sigma_joint", cfg.sigma_joint);
    num("sigma_depth", cfg.sigma_depth);
    num("sigma_contact", cfg.sigma_contact);
    flag("enable_joint", cfg.enable_joint);
    flag("enable_depth", cfg.enable_depth);
    flag("enable_contact", cfg.enable_contact);
    flag("enable_penetration_scene", cfg.enable_penetration_scene);
    flag("enable_penetration_self", cfg.enable_penetration_self);
    flag("enable_priors", cfg.enable_priors);
    if (j.contains("kappa"))
        for (auto& [k, v] : j.at("kappa").items()) cfg.kappa[k] = v.get<double>();
    if (j.contains("contact_mode"))
        cfg.contact_mode = j.at("contact_mode").get<std::string>() == "vertex" ? ContactMode::VertexOnly
                                                                               : ContactMode::Surface;
    if (j.contains("contact_set"))
        cfg.contact_set = j.at("contact_set").get<std::string>() == "all" ? ContactSetChoice::AllVertices
                                                                          : ContactSetChoice::Annotated;
}

nlohmann::json report_to_json(const EnergyReport& rep) {
    nlohmann::json j;
    j["total"] = rep.total;
    j["terms"] = rep.terms;
    j["weights"] = rep.weights;
    j["timings_s"] = rep.timings;
    j["diagnostics"] = {{"penetrating_vertices", rep.diagnostics.penetrating_vertices},
                        {"outside_sdf_domain", rep.diagnostics.outside_sdf_domain},
                        {"max_penetration_depth_m", rep.diagnostics.max_penetration_depth},
                        {"mean_contact_distance_m", rep.diagnostics.mean_contact_distance}};
    return j;
}

int cmd_sdf(const std::string& scene_path, int resolution, double padding, int jobs,
            const std::string& out) {
    TriMesh scene = load_mesh(scene_path);
    SdfBuildOptions opts;
    opts.resolution = resolution;
    opts.padding = padding;
    opts.threads = thread_cap(jobs);
    auto t0 = std::chrono::steady_clock::now();
    SdfGrid grid = build_sdf(scene, opts);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_grid(grid, out);
    std::cout << "sdf: " << grid.resolution.x() << "x" << grid.resolution.y() << "x"
              << grid.resolution.z() << " cells, cell size " << grid.cell_size << " m, extent "
              << (grid.resolution.cast<double>() * grid.cell_size).transpose() << " m, built in "
              << secs << " s -> " << out << "\n";
    return 0;
}

int cmd_register(const std::string& scene_path, const std::string& cloud_path,
                 const std::string& corr_path, const std::string& out) {
    TriMesh scene = load_mesh(scene_path);
    Bvh bvh(scene);
    PointCloud cloud = load_point_cloud(cloud_path);
    Points scene_pts, cloud_pts;
    load_correspondences(corr_path, &scene_pts, &cloud_pts);
    Mat3 R;
    Vec3 t;
    rigid_from_correspondences(cloud_pts, scene_pts, &R, &t);
    IcpResult icp = icp_refine(scene, bvh, cloud, R, t);
    std::cout << "register: initial RMS " << icp.rms_history.front() << " m, final RMS "
              << icp.rms_history.back() << " m after " << icp.rms_history.size() << " iterations\n";
    CameraModel cam;
    cam.rotation = icp.rotation;
    cam.translation = icp.translation;
    save_camera(cam, out);
    return 0;
}

int cmd_fit(const std::string& scene_path, const std::string& sdf_path, const std::string& camera_path,
            const std::string& keypoints_path, const std::string& cloud_path,
            const std::string& template_path, const std::string& schedule_path,
            const std::string& config_path, bool disable_contact, bool disable_penetration,
            const std::string& out_dir) {
    BodyTemplate tmpl = load_template_or_builtin(template_path);
    TriMesh scene = load_mesh(scene_path);
    Bvh scene_bvh(scene);
    SdfGrid sdf;
    if (!sdf_path.empty() && fs::exists(sdf_path)) {
        sdf = load_grid(sdf_path);
    } else {
        SdfBuildOptions opts;
        opts.resolution = 128;
        sdf = build_sdf(scene, opts);
        if (!sdf_path.empty()) save_grid(sdf, sdf_path);
    }
    CameraModel camera = load_camera(camera_path);
    Keypoints2D keypoints = load_keypoints(keypoints_path);
    PointCloud cloud;
    if (!cloud_path.empty()) cloud = load_point_cloud(cloud_path);

    EnergyConfig config;
    if (!cloud_path.empty()) config.enable_depth = true;
    if (!config_path.empty()) apply_config_file(config, config_path);
    if (disable_contact) config.enable_contact = false;
    if (disable_penetration) {
        config.enable_penetration_scene = false;
        config.enable_penetration_self = false;
    }
    FitSchedule schedule = schedule_path.empty() ? default_schedule() : load_schedule(schedule_path);

    FitInputs in;
    in.tmpl = &tmpl;
    in.camera = &camera;
    in.keypoints = &keypoints;
    in.cloud = cloud_path.empty() ? nullptr : &cloud;
    in.scene = &scene;
    in.scene_bvh = &scene_bvh;
    in.sdf = &sdf;

    BodyParams init = initialize_params(tmpl, camera, keypoints);
    FitResult res = fit(in, init, config, schedule);

    fs::create_directories(out_dir);
    save_mesh(res.posed.as_mesh(tmpl.mesh.faces), out_dir + "/mesh.obj");
    save_params(res.params, out_dir + "/params.json");
    nlohmann::json j = report_to_json(res.final_report);
    j["seconds"] = res.seconds;
    j["stages"] = nlohmann::json::array();
    bool any_line_search_failure = false;
    for (const auto& s : res.stages) {
        j["stages"].push_back({{"name", s.name},
                               {"iterations", s.iterations},
                               {"initial_energy", s.initial_energy},
                               {"final_energy", s.final_energy},
                               {"line_search_failed", s.line_search_failed}});
        any_line_search_failure |= s.line_search_failed;
    }
    std::ofstream rep(out_dir + "/report.json");
    rep << j.dump(2) << "\n";
    std::cout << "fit: total energy " << res.final_report.total << " in " << res.seconds << " s -> "
              << out_dir << "\n";
    if (any_line_search_failure) {
        std::cerr << "fit: warning: a stage ended on line-search failure (best-effort result)\n";
        return 1;
    }
    return 0;
}

int cmd_synth(const std::string& scenario, unsigned int seed, double noise,
              const std::string& template_path, const std::string& out_dir) {
    BodyTemplate tmpl = load_template_or_builtin(template_path);
    SynthCase c = make_synth_case(tmpl, scenario, seed, noise);
    save_synth_case(c, tmpl, out_dir);
    std::cout << "synth: " << scenario << " seed " << seed << " -> " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& case_dir, const std::string& params_path,
             const std::string& template_path, const std::string& out) {
    BodyTemplate tmpl = load_template_or_builtin(template_path);
    SynthCase c = load_synth_case(tmpl, case_dir);
    BodyParams params = load_params(tmpl, params_path);
    PosedBody posed = forward(tmpl, params, false);
    Bvh scene_bvh(c.scene);
    SdfBuildOptions opts;
    opts.resolution = 128;
    SdfGrid sdf = build_sdf(c.scene, opts);
    MetricsReport m = compute_metrics(tmpl, posed, c.gt_posed, sdf, scene_bvh, c.contact_set_names);
    nlohmann::json j;
    j["PJE_mm"] = m.pje;
    j["V2V_mm"] = m.v2v;
    j["p.PJE_mm"] = m.p_pje;
    j["p.V2V_mm"] = m.p_v2v;
    j["V2V_rms_mm"] = m.v2v_rms;
    j["p.V2V_rms_mm"] = m.p_v2v_rms;
    j["penetrating_vertices"] = m.physical.penetrating_vertices;
    j["penetration_fraction"] = m.physical.penetration_fraction;
    j["max_penetration_m"] = m.physical.max_penetration_depth;
    j["mean_contact_distance_m"] = m.physical.mean_contact_distance;
    std::cout << j.dump(2) << "\n";
    if (!out.empty()) {
        std::ofstream f(out);
        f << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_ablate(const std::vector<std::string>& case_dirs, int count, unsigned int seed, double noise,
               const std::string& template_path, int jobs, const std::string& out_dir) {
    BodyTemplate tmpl = load_template_or_builtin(template_path);
    std::vector<SynthCase> cases;
    if (!case_dirs.empty()) {
        for (const auto& dir : case_dirs) cases.push_back(load_synth_case(tmpl, dir));
    } else {
        const auto& scenarios = synth_scenarios();
        for (int i = 0; i < count; ++i)
            cases.push_back(make_synth_case(tmpl, scenarios[i % scenarios.size()],
                                            seed + static_cast<unsigned int>(i), noise));
    }
    auto configs = default_ablation_configs();
    FitSchedule schedule = default_schedule();

    // parallel across cases only; cell order stays deterministic
    int workers = std::min<int>(thread_cap(jobs), static_cast<int>(cases.size()));
    std::vector<AblationTable> partial(cases.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < cases.size(); i = next.fetch_add(1))
            partial[i] = run_ablation(tmpl, {cases[i]}, configs, schedule);
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    AblationTable table;
    for (const auto& cfg : configs) table.config_names.push_back(cfg.name);
    for (const auto& p : partial)
        table.cells.insert(table.cells.end(), p.cells.begin(), p.cells.end());

    fs::create_directories(out_dir);
    std::ofstream(out_dir + "/ablation.csv") << ablation_csv(table);
    std::string text = ablation_text(table);
    std::ofstream(out_dir + "/ablation.txt") << text;
    std::ofstream(out_dir + "/ablation.json") << ablation_json(table).dump(2) << "\n";
    std::cout << text;
    for (const auto& cell : table.cells)
        if (!cell.error.empty()) return 1;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"monocular body fitting with 3D scene constraints"};
    app.require_subcommand(1);

    // sdf
    auto* sdf = app.add_subcommand("sdf", "precompute a signed distance grid for a scene mesh");
    std::string sdf_scene, sdf_out = "scene.sdf";
    int sdf_resolution = 256, sdf_jobs = 0;
    double sdf_padding = -1.0;
    sdf->add_option("--scene", sdf_scene, "scene mesh (OBJ/PLY)")->required();
    sdf->add_option("--resolution", sdf_resolution, "cells along the longest extent");
    sdf->add_option("--padding", sdf_padding, "domain padding in meters (default: 10% of diagonal)");
    sdf->add_option("--jobs", sdf_jobs, "build threads");
    sdf->add_option("--out", sdf_out, "output grid file");

    // register
    auto* reg = app.add_subcommand("register", "register a point cloud to the scene (3-point + ICP)");
    std::string reg_scene, reg_cloud, reg_corr, reg_out = "camera.json";
    reg->add_option("--scene", reg_scene, "scene mesh")->required();
    reg->add_option("--cloud", reg_cloud, "point cloud (PLY or xyz)")->required();
    reg->add_option("--correspondences", reg_corr, "JSON correspondences")->required();
    reg->add_option("--out", reg_out, "output extrinsics file");

    // fit
    auto* fitc = app.add_subcommand("fit", "fit the body model to keypoints and scene");
    std::string fit_scene, fit_sdf, fit_camera, fit_keypoints, fit_cloud, fit_template, fit_schedule,
        fit_config, fit_out = "fit_out";
    bool fit_no_contact = false, fit_no_penetration = false;
    fitc->add_option("--scene", fit_scene, "scene mesh")->required();
    fitc->add_option("--sdf", fit_sdf, "SDF cache file (built at resolution 128 if missing)");
    fitc->add_option("--camera", fit_camera, "camera JSON")->required();
    fitc->add_option("--keypoints", fit_keypoints, "2D keypoints JSON")->required();
    fitc->add_option("--cloud", fit_cloud, "optional body point cloud (enables the depth term)");
    fitc->add_option("--template", fit_template, "body template JSON (default: builtin)");
    fitc->add_option("--schedule", fit_schedule, "stage schedule JSON (default: builtin)");
    fitc->add_option("--config", fit_config, "energy config JSON (overrides flags)");
    fitc->add_flag("--disable-contact", fit_no_contact, "turn off the contact term");
    fitc->add_flag("--disable-penetration", fit_no_penetration, "turn off the penetration terms");
    fitc->add_option("--out-dir", fit_out, "output directory");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic ground-truth case");
    std::string synth_scenario, synth_template, synth_out = "case_out";
    unsigned int synth_seed = 0;
    double synth_noise = 3.0;
    synth->add_option("--scenario", synth_scenario, "floor-stand | chair-sit | wall-touch | bed-lie")
        ->required();
    synth->add_option("--seed", synth_seed, "random seed");
    synth->add_option("--noise", synth_noise, "keypoint noise sigma in pixels");
    synth->add_option("--template", synth_template, "body template JSON (default: builtin)");
    synth->add_option("--out", synth_out, "output case directory");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate fitted parameters against a synthetic case");
    std::string eval_case, eval_params, eval_template, eval_out;
    eval->add_option("--case", eval_case, "synthetic case directory")->required();
    eval->add_option("--params", eval_params, "fitted params JSON")->required();
    eval->add_option("--template", eval_template, "body template JSON (default: builtin)");
    eval->add_option("--out", eval_out, "optional metrics JSON output path");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "run the term-ablation harness");
    std::vector<std::string> ablate_cases;
    int ablate_count = 10, ablate_jobs = 0;
    unsigned int ablate_seed = 0;
    double ablate_noise = 3.0;
    std::string ablate_template, ablate_out = "ablation_out";
    ablate->add_option("--case", ablate_cases, "synthetic case directories (repeatable)");
    ablate->add_option("--count", ablate_count, "number of generated cases when none given");
    ablate->add_option("--seed", ablate_seed, "base seed for generated cases");
    ablate->add_option("--noise", ablate_noise, "keypoint noise sigma in pixels");
    ablate->add_option("--template", ablate_template, "body template JSON (default: builtin)");
    ablate->add_option("--jobs", ablate_jobs, "parallel cases");
    ablate->add_option("--out-dir", ablate_out, "output directory");

    // dump-default-schedule
    auto* dump = app.add_subcommand("dump-default-schedule", "print the builtin stage schedule");
    std::string dump_out;
    dump->add_option("--out", dump_out, "optional output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (sdf->parsed()) return cmd_sdf(sdf_scene, sdf_resolution, sdf_padding, sdf_jobs, sdf_out);
        if (reg->parsed()) return cmd_register(reg_scene, reg_cloud, reg_corr, reg_out);
        if (fitc->parsed())
            return cmd_fit(fit_scene, fit_sdf, fit_camera, fit_keypoints, fit_cloud, fit_template,
                           fit_schedule, fit_config, fit_no_contact, fit_no_penetration, fit_out);
        if (synth->parsed()) return cmd_synth(synth_scenario, synth_seed, synth_noise, synth_template, synth_out);
        if (eval->parsed()) return cmd_eval(eval_case, eval_params, eval_template, eval_out);
        if (ablate->parsed())
            return cmd_ablate(ablate_cases, ablate_count, ablate_seed, ablate_noise, ablate_template,
                              ablate_jobs, ablate_out);
        if (dump->parsed()) {
            std::string text = schedule_to_json(default_schedule()).dump(2);
            std::cout << text << "\n";
            if (!dump_out.empty()) std::ofstream(dump_out) << text << "\n";
            return 0;
        }
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
