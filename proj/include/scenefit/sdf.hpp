#pragma once

#include "scenefit/bvh.hpp"
#include "scenefit/mesh.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <thread>
#include <vector>

namespace scenefit {

/// Angle-weighted pseudo-normals for vertex/edge/face features, which make the
/// dot-product sign rule exact on watertight meshes.
struct PseudoNormals {
    Points face_normals;   // unit
    Points vertex_normals; // angle-weighted, unit
    std::map<std::pair<int, int>, Vec3> edge_normals;  // unit, keyed by sorted vertex pair

    PseudoNormals() = default;

    explicit PseudoNormals(const TriMesh& mesh) {
        const int nf = mesh.num_faces();
        face_normals.resize(nf, 3);
        Points vacc = Points::Zero(mesh.num_vertices(), 3);
        for (int f = 0; f < nf; ++f) {
            Vec3 n = mesh.face_normal_unnormalized(f).normalized();
            face_normals.row(f) = n.transpose();
            for (int c = 0; c < 3; ++c) {
                int i = mesh.faces(f, c);
                Vec3 e1 = (mesh.face_vertex(f, (c + 1) % 3) - mesh.face_vertex(f, c)).normalized();
                Vec3 e2 = (mesh.face_vertex(f, (c + 2) % 3) - mesh.face_vertex(f, c)).normalized();
                double angle = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
                vacc.row(i) += (angle * n).transpose();

                int a = mesh.faces(f, c), b = mesh.faces(f, (c + 1) % 3);
                auto key = std::make_pair(std::min(a, b), std::max(a, b));
                auto it = edge_normals.find(key);
                if (it == edge_normals.end())
                    edge_normals[key] = n;
                else
                    it->second += n;
            }
        }
        vertex_normals.resize(mesh.num_vertices(), 3);
        for (int i = 0; i < mesh.num_vertices(); ++i) {
            double len = vacc.row(i).norm();
            vertex_normals.row(i) = len > 0 ? (vacc.row(i) / len).eval() : vacc.row(i).eval();
        }
        for (auto& [k, n] : edge_normals) n.normalize();
    }

    /// Pseudo-normal at a closest-point hit, selected by its barycentric feature.
    Vec3 at(const TriMesh& mesh, const SurfaceHit& hit, double eps = 1e-9) const {
        const Vec3& b = hit.barycentric;
        int zero_count = 0, zero_idx[3], nonzero_idx[3], nz = 0;
        for (int c = 0; c < 3; ++c) {
            if (b[c] <= eps)
                zero_idx[zero_count++] = c;
            else
                nonzero_idx[nz++] = c;
        }
        if (zero_count == 0) return face_normals.row(hit.face_index).transpose();
        if (zero_count >= 2) {
            int corner = nz > 0 ? nonzero_idx[0] : 0;
            return vertex_normals.row(mesh.faces(hit.face_index, corner)).transpose();
        }
        int va = mesh.faces(hit.face_index, nonzero_idx[0]);
        int vb = mesh.faces(hit.face_index, nonzero_idx[1]);
        auto it = edge_normals.find({std::min(va, vb), std::max(va, vb)});
        if (it != edge_normals.end()) return it->second;
        return face_normals.row(hit.face_index).transpose();
    }
};

struct SdfSample {
    double distance = 0.0;
    Vec3 normal = Vec3::Zero();
    bool inside_domain = true;
};

/// Uniform voxel grid of signed distances with stored nearest-surface normals.
/// Cell centers sit at origin + cell_size * (i, j, k).
struct SdfGrid {
    Vec3 origin = Vec3::Zero();
    double cell_size = 0.0;
    Eigen::Vector3i resolution = Eigen::Vector3i::Zero();
    std::vector<float> distances;         // nx*ny*nz
    std::vector<float> normals;           // 3 per cell

    std::size_t cell_count() const {
        return static_cast<std::size_t>(resolution.x()) * resolution.y() * resolution.z();
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(resolution.x()) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(resolution.y()) * k);
    }
    Vec3 cell_center(int i, int j, int k) const { return origin + cell_size * Vec3(i, j, k); }
    double voxel_diagonal() const { return cell_size * std::sqrt(3.0); }

    Aabb bounds() const {
        Aabb box;
        box.expand(origin - Vec3::Constant(0.5 * cell_size));
        box.expand(origin + cell_size * (resolution.cast<double>() - Vec3::Ones() * 0.5).eval());
        return box;
    }

    Vec3 stored_normal(std::size_t c) const {
        return Vec3(normals[3 * c], normals[3 * c + 1], normals[3 * c + 2]);
    }

    /// Trilinear sample. Points outside the cell-center lattice clamp to the
    /// boundary layer and come back flagged outside-domain.
    SdfSample sample(const Vec3& p) const {
        Vec3 g = (p - origin) / cell_size;
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
            if (g[a] < 0.0) {
                g[a] = 0.0;
                inside = false;
            }
            if (g[a] > resolution[a] - 1.0) {
                g[a] = resolution[a] - 1.0;
                inside = false;
            }
        }
        int i0 = std::min(static_cast<int>(g.x()), resolution.x() - 2);
        int j0 = std::min(static_cast<int>(g.y()), resolution.y() - 2);
        int k0 = std::min(static_cast<int>(g.z()), resolution.z() - 2);
        i0 = std::max(i0, 0);
        j0 = std::max(j0, 0);
        k0 = std::max(k0, 0);
        double fx = g.x() - i0, fy = g.y() - j0, fz = g.z() - k0;

        SdfSample out;
        out.inside_domain = inside;
        double d = 0;
        Vec3 n = Vec3::Zero();
        for (int dk = 0; dk < 2; ++dk)
            for (int dj = 0; dj < 2; ++dj)
                for (int di = 0; di < 2; ++di) {
                    double w = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
                    std::size_t c = index(i0 + di, j0 + dj, k0 + dk);
                    d += w * distances[c];
                    n += w * stored_normal(c);
                }
        out.distance = d;
        double len = n.norm();
        if (len > 1e-12)
            out.normal = n / len;
        else
            out.normal = stored_normal(index(i0 + (fx > 0.5), j0 + (fy > 0.5), k0 + (fz > 0.5)));
        return out;
    }

    /// Analytic gradient of the trilinear interpolant. Valid strictly inside
    /// the lattice; outside points come back flagged with a clamped gradient.
    Vec3 sample_gradient(const Vec3& p, bool* inside_domain = nullptr) const {
        Vec3 g = (p - origin) / cell_size;
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
            if (g[a] < 0.0) {
                g[a] = 0.0;
                inside = false;
            }
            if (g[a] > resolution[a] - 1.0) {
                g[a] = resolution[a] - 1.0;
                inside = false;
            }
        }
        if (inside_domain) *inside_domain = inside;
        int i0 = std::max(0, std::min(static_cast<int>(g.x()), resolution.x() - 2));
        int j0 = std::max(0, std::min(static_cast<int>(g.y()), resolution.y() - 2));
        int k0 = std::max(0, std::min(static_cast<int>(g.z()), resolution.z() - 2));
        double fx = g.x() - i0, fy = g.y() - j0, fz = g.z() - k0;

        auto v = [&](int di, int dj, int dk) {
            return static_cast<double>(distances[index(i0 + di, j0 + dj, k0 + dk)]);
        };
        double gx = (1 - fy) * (1 - fz) * (v(1, 0, 0) - v(0, 0, 0)) +
                    fy * (1 - fz) * (v(1, 1, 0) - v(0, 1, 0)) +
                    (1 - fy) * fz * (v(1, 0, 1) - v(0, 0, 1)) + fy * fz * (v(1, 1, 1) - v(0, 1, 1));
        double gy = (1 - fx) * (1 - fz) * (v(0, 1, 0) - v(0, 0, 0)) +
                    fx * (1 - fz) * (v(1, 1, 0) - v(1, 0, 0)) +
                    (1 - fx) * fz * (v(0, 1, 1) - v(0, 0, 1)) + fx * fz * (v(1, 1, 1) - v(1, 0, 1));
        double gz = (1 - fx) * (1 - fy) * (v(0, 0, 1) - v(0, 0, 0)) +
                    fx * (1 - fy) * (v(1, 0, 1) - v(1, 0, 0)) +
                    (1 - fx) * fy * (v(0, 1, 1) - v(0, 1, 0)) + fx * fy * (v(1, 1, 1) - v(1, 1, 0));
        return Vec3(gx, gy, gz) / cell_size;
    }
};

struct SdfBuildOptions {
    int resolution = 256;          // cells along the longest padded extent
    double padding = -1.0;         // meters; negative = 10% of scene AABB diagonal
    std::size_t max_cells = 1'100'000'000;
    int threads = 0;               // 0 = hardware concurrency
};

inline SdfGrid build_sdf(const TriMesh& scene, const SdfBuildOptions& opts = {}) {
    if (scene.num_faces() == 0) throw GeometryError("build_sdf: empty scene mesh");
    if (opts.resolution < 8) throw ConfigError("build_sdf: resolution must be >= 8");

    Aabb box = scene.bounds();
    double pad = opts.padding >= 0 ? opts.padding : 0.1 * box.diagonal();
    box = box.padded(pad);

    SdfGrid grid;
    grid.cell_size = box.extent().maxCoeff() / opts.resolution;
    for (int a = 0; a < 3; ++a)
        grid.resolution[a] =
            std::max(2, static_cast<int>(std::ceil(box.extent()[a] / grid.cell_size)) + 1);
    grid.origin = box.center() - 0.5 * grid.cell_size * (grid.resolution.cast<double>() - Vec3::Ones());

    if (grid.cell_count() > opts.max_cells)
        throw ConfigError("build_sdf: cell count " + std::to_string(grid.cell_count()) +
                          " exceeds the cap of " + std::to_string(opts.max_cells));

    grid.distances.resize(grid.cell_count());
    grid.normals.resize(3 * grid.cell_count());

    Bvh bvh(scene);
    PseudoNormals pn(scene);

    const int nz = grid.resolution.z();
    int n_threads = opts.threads > 0 ? opts.threads
                                     : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min(n_threads, nz);

    auto worker = [&](int k_begin, int k_end) {
        for (int k = k_begin; k < k_end; ++k)
            for (int j = 0; j < grid.resolution.y(); ++j)
                for (int i = 0; i < grid.resolution.x(); ++i) {
                    Vec3 p = grid.cell_center(i, j, k);
                    SurfaceHit hit = bvh.closest_point(p);
                    Vec3 n = pn.at(scene, hit);
                    double sign = (p - hit.point).dot(n) >= 0 ? 1.0 : -1.0;
                    std::size_t c = grid.index(i, j, k);
                    grid.distances[c] = static_cast<float>(sign * hit.distance);
                    grid.normals[3 * c] = static_cast<float>(n.x());
                    grid.normals[3 * c + 1] = static_cast<float>(n.y());
                    grid.normals[3 * c + 2] = static_cast<float>(n.z());
                }
    };

    if (n_threads <= 1) {
        worker(0, nz);
    } else {
        std::vector<std::thread> pool;
        int chunk = (nz + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            int b = t * chunk, e = std::min(nz, b + chunk);
            if (b < e) pool.emplace_back(worker, b, e);
        }
        for (auto& th : pool) th.join();
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Binary grid file: magic "SDFG", version, header, little-endian f32 payload.
// ---------------------------------------------------------------------------

inline void save_grid(const SdfGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out.write("SDFG", 4);
    std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    double hdr[4] = {grid.origin.x(), grid.origin.y(), grid.origin.z(), grid.cell_size};
    out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    std::uint32_t res[3] = {static_cast<std::uint32_t>(grid.resolution.x()),
                            static_cast<std::uint32_t>(grid.resolution.y()),
                            static_cast<std::uint32_t>(grid.resolution.z())};
    out.write(reinterpret_cast<const char*>(res), sizeof(res));
    out.write(reinterpret_cast<const char*>(grid.distances.data()),
              static_cast<std::streamsize>(grid.distances.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(grid.normals.data()),
              static_cast<std::streamsize>(grid.normals.size() * sizeof(float)));
}

inline SdfGrid load_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open grid file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SDFG", 4) != 0)
        throw ParseError(path + ": not an SDFG grid file (bad magic)");
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (!in || version != 1)
        throw ParseError(path + ": unsupported grid file version " + std::to_string(version));
    SdfGrid grid;
    double hdr[4];
    std::uint32_t res[3];
    in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
    in.read(reinterpret_cast<char*>(res), sizeof(res));
    if (!in) throw ParseError(path + ": truncated grid header");
    grid.origin = Vec3(hdr[0], hdr[1], hdr[2]);
    grid.cell_size = hdr[3];
    grid.resolution = Eigen::Vector3i(static_cast<int>(res[0]), static_cast<int>(res[1]),
                                      static_cast<int>(res[2]));
    grid.distances.resize(grid.cell_count());
    grid.normals.resize(3 * grid.cell_count());
    in.read(reinterpret_cast<char*>(grid.distances.data()),
            static_cast<std::streamsize>(grid.distances.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(grid.distances.size() * sizeof(float)))
        throw ParseError(path + ": truncated distance payload");
    in.read(reinterpret_cast<char*>(grid.normals.data()),
            static_cast<std::streamsize>(grid.normals.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(grid.normals.size() * sizeof(float)))
        throw ParseError(path + ": truncated normal payload");
    return grid;
}

}  // namespace scenefit
