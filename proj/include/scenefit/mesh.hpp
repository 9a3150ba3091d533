#pragma once

#include "scenefit/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace scenefit {

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 max = Vec3::Constant(std::numeric_limits<double>::lowest());

    void expand(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    void expand(const Aabb& b) {
        min = min.cwiseMin(b.min);
        max = max.cwiseMax(b.max);
    }
    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extent() const { return max - min; }
    double diagonal() const { return (max - min).norm(); }
    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    bool overlaps(const Aabb& b) const {
        return (min.array() <= b.max.array()).all() && (max.array() >= b.min.array()).all();
    }
    double sq_distance(const Vec3& p) const {
        Vec3 d = (min - p).cwiseMax(0.0).cwiseMax(p - max);
        return d.squaredNorm();
    }
    Aabb padded(double pad) const {
        Aabb out;
        out.min = min - Vec3::Constant(pad);
        out.max = max + Vec3::Constant(pad);
        return out;
    }
};

/// Indexed triangle surface. Units are meters throughout.
struct TriMesh {
    Points vertices;
    Faces faces;
    Points vertex_normals;  // empty until compute_vertex_normals()

    int num_vertices() const { return static_cast<int>(vertices.rows()); }
    int num_faces() const { return static_cast<int>(faces.rows()); }
    bool has_normals() const { return vertex_normals.rows() == vertices.rows(); }

    Vec3 vertex(int i) const { return vertices.row(i).transpose(); }
    Vec3 normal(int i) const { return vertex_normals.row(i).transpose(); }

    Vec3 face_vertex(int f, int corner) const { return vertices.row(faces(f, corner)).transpose(); }

    Vec3 face_normal_unnormalized(int f) const {
        Vec3 a = face_vertex(f, 0), b = face_vertex(f, 1), c = face_vertex(f, 2);
        return (b - a).cross(c - a);
    }

    double face_area(int f) const { return 0.5 * face_normal_unnormalized(f).norm(); }

    Aabb bounds() const {
        Aabb box;
        for (int i = 0; i < num_vertices(); ++i) box.expand(vertex(i));
        return box;
    }

    Aabb face_bounds(int f) const {
        Aabb box;
        box.expand(face_vertex(f, 0));
        box.expand(face_vertex(f, 1));
        box.expand(face_vertex(f, 2));
        return box;
    }

    /// Index validity and non-degeneracy. Throws GeometryError naming the offending face.
    void validate(double min_area = 1e-12) const {
        const int nv = num_vertices();
        for (int f = 0; f < num_faces(); ++f) {
            for (int c = 0; c < 3; ++c) {
                int idx = faces(f, c);
                if (idx < 0 || idx >= nv)
                    throw GeometryError("face " + std::to_string(f) + " references invalid vertex " +
                                        std::to_string(idx));
            }
            if (face_area(f) < min_area)
                throw GeometryError("degenerate face " + std::to_string(f) + " (area below threshold)");
        }
    }

    /// Every edge shared by exactly two faces.
    bool is_watertight() const {
        std::map<std::pair<int, int>, int> edge_count;
        for (int f = 0; f < num_faces(); ++f) {
            for (int c = 0; c < 3; ++c) {
                int a = faces(f, c), b = faces(f, (c + 1) % 3);
                edge_count[{std::min(a, b), std::max(a, b)}]++;
            }
        }
        for (const auto& [e, n] : edge_count)
            if (n != 2) return false;
        return true;
    }
};

/// Area-weighted vertex normals (the cross-product magnitude carries the area weight).
inline void compute_vertex_normals(TriMesh& mesh) {
    mesh.validate();
    Points accum = Points::Zero(mesh.num_vertices(), 3);
    for (int f = 0; f < mesh.num_faces(); ++f) {
        Vec3 n = mesh.face_normal_unnormalized(f);
        for (int c = 0; c < 3; ++c) accum.row(mesh.faces(f, c)) += n.transpose();
    }
    for (int i = 0; i < mesh.num_vertices(); ++i) {
        double len = accum.row(i).norm();
        if (len > 0) accum.row(i) /= len;
    }
    mesh.vertex_normals = accum;
}

// ---------------------------------------------------------------------------
// OBJ / ASCII PLY I/O
// ---------------------------------------------------------------------------

namespace detail {

inline std::string file_extension(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](char c) { return std::tolower(c); });
    return ext;
}

inline TriMesh load_obj(std::istream& in, const std::string& name) {
    std::vector<Vec3> verts;
    std::vector<Eigen::Vector3i> faces;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z))
                throw ParseError(name + ":" + std::to_string(lineno) + ": malformed vertex line");
            verts.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) {
                // accept v, v/vt, v/vt/vn, v//vn
                size_t slash = tok.find('/');
                std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
                try {
                    int i = std::stoi(head);
                    if (i < 0) i = static_cast<int>(verts.size()) + i + 1;  // negative = relative
                    idx.push_back(i - 1);                                    // OBJ is 1-based
                } catch (const std::exception&) {
                    throw ParseError(name + ":" + std::to_string(lineno) + ": malformed face index '" +
                                     tok + "'");
                }
            }
            if (idx.size() < 3)
                throw ParseError(name + ":" + std::to_string(lineno) + ": face with fewer than 3 indices");
            for (size_t k = 2; k < idx.size(); ++k)  // fan-triangulate polygons
                faces.emplace_back(idx[0], idx[k - 1], idx[k]);
        }
        // ignore vt/vn/usemtl/etc.
    }
    TriMesh mesh;
    mesh.vertices.resize(static_cast<int>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<int>(i)) = verts[i].transpose();
    mesh.faces.resize(static_cast<int>(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i) mesh.faces.row(static_cast<int>(i)) = faces[i].transpose();
    return mesh;
}

inline TriMesh load_ply(std::istream& in, const std::string& name) {
    std::string line;
    int lineno = 0;
    auto next_line = [&]() -> std::string {
        if (!std::getline(in, line)) throw ParseError(name + ": unexpected end of file");
        ++lineno;
        return line;
    };
    if (next_line() != "ply") throw ParseError(name + ": missing ply magic");
    int n_verts = -1, n_faces = -1;
    bool in_vertex_element = false;
    int vertex_props = 0;
    while (true) {
        std::istringstream ls(next_line());
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii") throw ParseError(name + ": only ascii PLY is supported");
        } else if (tag == "element") {
            std::string what;
            int count;
            ls >> what >> count;
            if (what == "vertex") {
                n_verts = count;
                in_vertex_element = true;
            } else if (what == "face") {
                n_faces = count;
                in_vertex_element = false;
            } else {
                throw ParseError(name + ":" + std::to_string(lineno) + ": unsupported element '" + what + "'");
            }
        } else if (tag == "property") {
            if (in_vertex_element) ++vertex_props;
        } else if (tag == "end_header") {
            break;
        } else if (tag == "comment") {
            continue;
        }
    }
    if (n_verts < 0) throw ParseError(name + ": no vertex element");
    TriMesh mesh;
    mesh.vertices.resize(n_verts, 3);
    for (int i = 0; i < n_verts; ++i) {
        std::istringstream ls(next_line());
        double x, y, z;
        if (!(ls >> x >> y >> z))
            throw ParseError(name + ":" + std::to_string(lineno) + ": malformed vertex line");
        mesh.vertices.row(i) << x, y, z;
    }
    std::vector<Eigen::Vector3i> faces;
    for (int i = 0; i < std::max(n_faces, 0); ++i) {
        std::istringstream ls(next_line());
        int cnt;
        if (!(ls >> cnt) || cnt < 3)
            throw ParseError(name + ":" + std::to_string(lineno) + ": malformed face line");
        std::vector<int> idx(cnt);
        for (int k = 0; k < cnt; ++k)
            if (!(ls >> idx[k]))
                throw ParseError(name + ":" + std::to_string(lineno) + ": malformed face line");
        for (int k = 2; k < cnt; ++k) faces.emplace_back(idx[0], idx[k - 1], idx[k]);
    }
    mesh.faces.resize(static_cast<int>(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i) mesh.faces.row(static_cast<int>(i)) = faces[i].transpose();
    return mesh;
}

}  // namespace detail

inline TriMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open mesh file: " + path);
    std::string ext = detail::file_extension(path);
    TriMesh mesh;
    if (ext == "obj")
        mesh = detail::load_obj(in, path);
    else if (ext == "ply")
        mesh = detail::load_ply(in, path);
    else
        throw ParseError("unsupported mesh format '" + ext + "' for " + path);
    mesh.validate();
    return mesh;
}

inline void save_mesh(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out.precision(10);
    std::string ext = detail::file_extension(path);
    if (ext == "obj") {
        for (int i = 0; i < mesh.num_vertices(); ++i)
            out << "v " << mesh.vertices(i, 0) << " " << mesh.vertices(i, 1) << " " << mesh.vertices(i, 2)
                << "\n";
        for (int f = 0; f < mesh.num_faces(); ++f)
            out << "f " << mesh.faces(f, 0) + 1 << " " << mesh.faces(f, 1) + 1 << " " << mesh.faces(f, 2) + 1
                << "\n";
    } else if (ext == "ply") {
        out << "ply\nformat ascii 1.0\n";
        out << "element vertex " << mesh.num_vertices() << "\n";
        out << "property double x\nproperty double y\nproperty double z\n";
        out << "element face " << mesh.num_faces() << "\n";
        out << "property list uchar int vertex_indices\nend_header\n";
        for (int i = 0; i < mesh.num_vertices(); ++i)
            out << mesh.vertices(i, 0) << " " << mesh.vertices(i, 1) << " " << mesh.vertices(i, 2) << "\n";
        for (int f = 0; f < mesh.num_faces(); ++f)
            out << "3 " << mesh.faces(f, 0) << " " << mesh.faces(f, 1) << " " << mesh.faces(f, 2) << "\n";
    } else {
        throw ParseError("unsupported mesh format '" + ext + "' for " + path);
    }
}

}  // namespace scenefit
