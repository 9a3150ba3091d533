#pragma once

#include "scenefit/energy.hpp"
#include "scenefit/fit.hpp"
#include "scenefit/synth.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace scenefit {

/// Mean Euclidean joint position error in millimeters.
inline double pje_mm(const Points& joints_a, const Points& joints_b) {
    if (joints_a.rows() != joints_b.rows())
        throw GeometryError("pje_mm: joint count mismatch");
    if (joints_a.rows() == 0) return 0;
    return 1000.0 * (joints_a - joints_b).rowwise().norm().mean();
}

/// Mean per-vertex Euclidean error in millimeters; meshes must share topology.
inline double v2v_mm(const Points& verts_a, const Points& verts_b) {
    if (verts_a.rows() != verts_b.rows())
        throw GeometryError("v2v_mm: vertex count mismatch (different topologies?)");
    if (verts_a.rows() == 0) return 0;
    return 1000.0 * (verts_a - verts_b).rowwise().norm().mean();
}

/// Root-mean-square per-vertex error in millimeters.
inline double v2v_rms_mm(const Points& verts_a, const Points& verts_b) {
    if (verts_a.rows() != verts_b.rows())
        throw GeometryError("v2v_rms_mm: vertex count mismatch");
    if (verts_a.rows() == 0) return 0;
    return 1000.0 * std::sqrt((verts_a - verts_b).rowwise().squaredNorm().mean());
}

struct ProcrustesResult {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double scale = 1.0;
    Points aligned;  // src mapped onto dst
};

/// Least-squares similarity (or rigid) alignment of src onto dst.
inline ProcrustesResult procrustes_align(const Points& src, const Points& dst, bool with_scale = true) {
    if (src.rows() != dst.rows() || src.rows() < 3)
        throw GeometryError("procrustes_align: need >= 3 paired points");
    Vec3 mean_src = src.colwise().mean().transpose();
    Vec3 mean_dst = dst.colwise().mean().transpose();
    Points cs = src.rowwise() - mean_src.transpose();
    Points cd = dst.rowwise() - mean_dst.transpose();
    Mat3 cov = cd.transpose() * cs / static_cast<double>(src.rows());
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 S = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) S(2, 2) = -1;

    ProcrustesResult res;
    res.rotation = svd.matrixU() * S * svd.matrixV().transpose();
    if (with_scale) {
        double var_src = cs.rowwise().squaredNorm().mean();
        if (var_src < 1e-300) throw GeometryError("procrustes_align: degenerate source points");
        res.scale = (svd.singularValues().asDiagonal() * S).trace() / var_src;
    }
    res.translation = mean_dst - res.scale * res.rotation * mean_src;
    res.aligned = (res.scale * (res.rotation * src.transpose())).transpose();
    res.aligned.rowwise() += res.translation.transpose();
    return res;
}

struct PhysicalDiagnostics {
    int total_vertices = 0;
    int penetrating_vertices = 0;
    double penetration_fraction = 0;
    double max_penetration_depth = 0;   // meters
    double mean_contact_distance = 0;   // meters, over the requested contact sets
    int contact_vertices = 0;
};

/// Penetration and contact statistics of a posed body against a scene.
inline PhysicalDiagnostics physical_diagnostics(const BodyTemplate& t, const PosedBody& body,
                                                const SdfGrid& sdf, const Bvh& scene_bvh,
                                                const std::vector<std::string>& contact_set_names) {
    PhysicalDiagnostics d;
    d.total_vertices = static_cast<int>(body.vertices.rows());
    for (int v = 0; v < d.total_vertices; ++v) {
        SdfSample s = sdf.sample(body.vertices.row(v).transpose());
        if (s.inside_domain && s.distance < 0) {
            d.penetrating_vertices++;
            d.max_penetration_depth = std::max(d.max_penetration_depth, static_cast<double>(-s.distance));
        }
    }
    d.penetration_fraction =
        d.total_vertices == 0 ? 0.0 : static_cast<double>(d.penetrating_vertices) / d.total_vertices;

    double dist_sum = 0;
    for (const auto& name : contact_set_names) {
        auto it = t.contact_sets.find(name);
        if (it == t.contact_sets.end()) throw ConfigError("unknown contact set: " + name);
        for (int v : it->second) {
            dist_sum += scene_bvh.closest_point(body.vertices.row(v).transpose()).distance;
            d.contact_vertices++;
        }
    }
    d.mean_contact_distance = d.contact_vertices == 0 ? 0.0 : dist_sum / d.contact_vertices;
    return d;
}

struct MetricsReport {
    double pje = 0, v2v = 0;      // millimeters, mean Euclidean
    double p_pje = 0, p_v2v = 0;  // after similarity Procrustes alignment
    double v2v_rms = 0, p_v2v_rms = 0;
    PhysicalDiagnostics physical;
    std::map<std::string, double> term_runtimes;  // seconds
};

/// Full metric set of an estimate against ground truth (same template).
inline MetricsReport compute_metrics(const BodyTemplate& t, const PosedBody& estimated,
                                     const PosedBody& ground_truth, const SdfGrid& sdf,
                                     const Bvh& scene_bvh,
                                     const std::vector<std::string>& contact_set_names) {
    MetricsReport m;
    m.pje = pje_mm(estimated.joints, ground_truth.joints);
    m.v2v = v2v_mm(estimated.vertices, ground_truth.vertices);
    m.v2v_rms = v2v_rms_mm(estimated.vertices, ground_truth.vertices);
    ProcrustesResult pj = procrustes_align(estimated.joints, ground_truth.joints);
    m.p_pje = pje_mm(pj.aligned, ground_truth.joints);
    ProcrustesResult pv = procrustes_align(estimated.vertices, ground_truth.vertices);
    m.p_v2v = v2v_mm(pv.aligned, ground_truth.vertices);
    m.p_v2v_rms = v2v_rms_mm(pv.aligned, ground_truth.vertices);
    m.physical = physical_diagnostics(t, estimated, sdf, scene_bvh, contact_set_names);
    return m;
}

// ---------------------------------------------------------------------------
// Ablation harness
// ---------------------------------------------------------------------------

struct AblationConfig {
    std::string name;
    EnergyConfig config;
};

/// Table 1(a) RGB rows: data term alone, plus contact, plus penetration, both.
inline std::vector<AblationConfig> default_ablation_configs(const EnergyConfig& base = {}) {
    auto with = [&](const std::string& name, bool contact, bool penetration) {
        AblationConfig c{name, base};
        c.config.enable_contact = contact;
        c.config.enable_penetration_scene = penetration;
        c.config.enable_penetration_self = penetration;
        return c;
    };
    return {with("EJ", false, false), with("EJ+EP", true, false), with("EJ+EC", false, true),
            with("EJ+EP+EC", true, true)};
}

struct AblationCell {
    std::string config_name;
    std::string case_name;
    MetricsReport metrics;
    double fit_seconds = 0;
    std::string error;  // empty on success
};

struct AblationTable {
    std::vector<AblationCell> cells;
    std::vector<std::string> config_names;
};

/// Run every configuration over every case with the given schedule. Fit
/// failures are recorded in the cell, not thrown.
inline AblationTable run_ablation(const BodyTemplate& t, const std::vector<SynthCase>& cases,
                                  const std::vector<AblationConfig>& configs,
                                  const FitSchedule& schedule, int sdf_resolution = 128) {
    AblationTable table;
    for (const auto& cfg : configs) table.config_names.push_back(cfg.name);
    for (size_t ci = 0; ci < cases.size(); ++ci) {
        const SynthCase& c = cases[ci];
        std::string case_name = c.scenario + "#" + std::to_string(c.seed);
        Bvh scene_bvh(c.scene);
        SdfBuildOptions sdf_opts;
        sdf_opts.resolution = sdf_resolution;
        SdfGrid sdf = build_sdf(c.scene, sdf_opts);
        FitInputs in;
        in.tmpl = &t;
        in.camera = &c.camera;
        in.keypoints = &c.keypoints;
        in.scene = &c.scene;
        in.scene_bvh = &scene_bvh;
        in.sdf = &sdf;
        for (const auto& cfg : configs) {
            AblationCell cell;
            cell.config_name = cfg.name;
            cell.case_name = case_name;
            try {
                BodyParams init = initialize_params(t, c.camera, c.keypoints);
                FitResult res = fit(in, init, cfg.config, schedule);
                cell.fit_seconds = res.seconds;
                cell.metrics = compute_metrics(t, res.posed, c.gt_posed, sdf, scene_bvh,
                                               c.contact_set_names);
                cell.metrics.term_runtimes = res.final_report.timings;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            table.cells.push_back(std::move(cell));
        }
    }
    return table;
}

namespace detail {

struct MeanStd {
    double mean = 0, std = 0;
    int n = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
    MeanStd ms;
    ms.n = static_cast<int>(v.size());
    if (v.empty()) return ms;
    for (double x : v) ms.mean += x;
    ms.mean /= ms.n;
    for (double x : v) ms.std += (x - ms.mean) * (x - ms.mean);
    ms.std = ms.n > 1 ? std::sqrt(ms.std / (ms.n - 1)) : 0.0;
    return ms;
}

inline std::vector<double> collect_metric(const AblationTable& t, const std::string& config,
                                          const std::function<double(const MetricsReport&)>& get) {
    std::vector<double> v;
    for (const auto& cell : t.cells)
        if (cell.config_name == config && cell.error.empty()) v.push_back(get(cell.metrics));
    return v;
}

}  // namespace detail

inline const std::vector<std::pair<std::string, std::function<double(const MetricsReport&)>>>&
ablation_metric_columns() {
    static const std::vector<std::pair<std::string, std::function<double(const MetricsReport&)>>> cols = {
        {"PJE_mm", [](const MetricsReport& m) { return m.pje; }},
        {"V2V_mm", [](const MetricsReport& m) { return m.v2v; }},
        {"p.PJE_mm", [](const MetricsReport& m) { return m.p_pje; }},
        {"p.V2V_mm", [](const MetricsReport& m) { return m.p_v2v; }},
        {"pen_frac", [](const MetricsReport& m) { return m.physical.penetration_fraction; }},
        {"contact_m", [](const MetricsReport& m) { return m.physical.mean_contact_distance; }},
    };
    return cols;
}

/// One row per case x configuration, with per-term runtime columns.
inline std::string ablation_csv(const AblationTable& table) {
    // union of term names across cells keeps the column set stable
    std::set<std::string> term_names;
    for (const auto& cell : table.cells)
        for (const auto& [k, v] : cell.metrics.term_runtimes) term_names.insert(k);
    std::ostringstream out;
    out << "case,config";
    for (const auto& [name, get] : ablation_metric_columns()) out << "," << name;
    out << ",fit_s";
    for (const auto& t : term_names) out << ",t_" << t << "_s";
    out << ",error\n";
    out << std::setprecision(10);
    for (const auto& cell : table.cells) {
        out << cell.case_name << "," << cell.config_name;
        for (const auto& [name, get] : ablation_metric_columns())
            out << "," << (cell.error.empty() ? get(cell.metrics) : 0.0);
        out << "," << cell.fit_seconds;
        for (const auto& t : term_names) {
            auto it = cell.metrics.term_runtimes.find(t);
            out << "," << (it == cell.metrics.term_runtimes.end() ? 0.0 : it->second);
        }
        std::string err = cell.error;
        for (auto& ch : err)
            if (ch == ',' || ch == '\n') ch = ';';
        out << "," << err << "\n";
    }
    return out.str();
}

/// Aligned text table: one row per configuration, mean +/- std per metric,
/// plus mean per-term runtimes.
inline std::string ablation_text(const AblationTable& table) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "config";
    for (const auto& [name, get] : ablation_metric_columns()) out << std::setw(22) << name;
    out << std::setw(12) << "fit_s" << "\n";
    for (const auto& cfg : table.config_names) {
        out << std::setw(12) << cfg;
        for (const auto& [name, get] : ablation_metric_columns()) {
            auto ms = detail::mean_std(detail::collect_metric(table, cfg, get));
            std::ostringstream cellstr;
            cellstr << std::fixed << std::setprecision(3) << ms.mean << " +/- " << ms.std;
            out << std::setw(22) << cellstr.str();
        }
        std::vector<double> fit_secs;
        for (const auto& cell : table.cells)
            if (cell.config_name == cfg && cell.error.empty()) fit_secs.push_back(cell.fit_seconds);
        std::ostringstream cellstr;
        cellstr << std::fixed << std::setprecision(2) << detail::mean_std(fit_secs).mean;
        out << std::setw(12) << cellstr.str() << "\n";
    }
    // mean per-term runtimes across all successful cells
    std::map<std::string, std::vector<double>> term_times;
    for (const auto& cell : table.cells)
        if (cell.error.empty())
            for (const auto& [k, v] : cell.metrics.term_runtimes) term_times[k].push_back(v);
    out << "\nmean per-term runtime (s):\n";
    for (const auto& [k, v] : term_times)
        out << "  " << std::left << std::setw(12) << k << std::fixed << std::setprecision(6)
            << detail::mean_std(v).mean << "\n";
    int failures = 0;
    for (const auto& cell : table.cells)
        if (!cell.error.empty()) ++failures;
    if (failures > 0) out << "\nfailed cells: " << failures << "\n";
    return out.str();
}

/// JSON summary: per-configuration mean/std per metric plus raw cells.
inline nlohmann::json ablation_json(const AblationTable& table) {
    nlohmann::json j;
    j["configs"] = nlohmann::json::array();
    for (const auto& cfg : table.config_names) {
        nlohmann::json jc;
        jc["name"] = cfg;
        for (const auto& [name, get] : ablation_metric_columns()) {
            auto ms = detail::mean_std(detail::collect_metric(table, cfg, get));
            jc["metrics"][name] = {{"mean", ms.mean}, {"std", ms.std}, {"n", ms.n}};
        }
        j["configs"].push_back(jc);
    }
    j["cells"] = nlohmann::json::array();
    for (const auto& cell : table.cells) {
        nlohmann::json jc;
        jc["case"] = cell.case_name;
        jc["config"] = cell.config_name;
        jc["fit_seconds"] = cell.fit_seconds;
        if (!cell.error.empty()) {
            jc["error"] = cell.error;
        } else {
            for (const auto& [name, get] : ablation_metric_columns()) jc[name] = get(cell.metrics);
            jc["penetrating_vertices"] = cell.metrics.physical.penetrating_vertices;
            jc["max_penetration_m"] = cell.metrics.physical.max_penetration_depth;
            jc["term_runtimes_s"] = cell.metrics.term_runtimes;
        }
        j["cells"].push_back(jc);
    }
    return j;
}

}  // namespace scenefit
