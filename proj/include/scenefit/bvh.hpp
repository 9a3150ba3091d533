#pragma once

#include "scenefit/mesh.hpp"
#include "scenefit/triangle.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <utility>
#include <vector>

namespace scenefit {

struct SurfaceHit {
    Vec3 point = Vec3::Zero();
    double distance = 0.0;
    int face_index = -1;
    Vec3 barycentric = Vec3::Zero();
};

/// Binary AABB tree over mesh faces. Median split on the longest axis.
class Bvh {
public:
    struct Node {
        Aabb box;
        int left = -1;   // internal child, -1 for leaf
        int right = -1;
        int face_begin = 0;  // into face_order_ for leaves
        int face_end = 0;
    };

    Bvh() = default;

    explicit Bvh(const TriMesh& mesh, int leaf_size = 4) : mesh_(&mesh) {
        const int nf = mesh.num_faces();
        if (nf == 0) throw GeometryError("cannot build BVH over an empty mesh");
        face_order_.resize(nf);
        std::iota(face_order_.begin(), face_order_.end(), 0);
        centroids_.resize(nf, 3);
        for (int f = 0; f < nf; ++f)
            centroids_.row(f) =
                ((mesh.face_vertex(f, 0) + mesh.face_vertex(f, 1) + mesh.face_vertex(f, 2)) / 3.0)
                    .transpose();
        nodes_.reserve(2 * nf);
        build_node(0, nf, leaf_size);
    }

    const TriMesh& mesh() const { return *mesh_; }
    const std::vector<Node>& nodes() const { return nodes_; }

    /// Globally nearest surface point to p.
    SurfaceHit closest_point(const Vec3& p) const {
        SurfaceHit best;
        best.distance = std::numeric_limits<double>::max();
        closest_recurse(0, p, best);
        return best;
    }

    /// Face indices whose AABB overlaps the given box.
    void collect_overlapping(const Aabb& box, std::vector<int>& out) const {
        collect_recurse(0, box, out);
    }

private:
    int build_node(int begin, int end, int leaf_size) {
        int idx = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        Aabb box;
        for (int i = begin; i < end; ++i) box.expand(mesh_->face_bounds(face_order_[i]));
        nodes_[idx].box = box;
        if (end - begin <= leaf_size) {
            nodes_[idx].face_begin = begin;
            nodes_[idx].face_end = end;
            return idx;
        }
        Aabb cbox;
        for (int i = begin; i < end; ++i) cbox.expand(centroids_.row(face_order_[i]).transpose());
        int axis;
        cbox.extent().maxCoeff(&axis);
        int mid = (begin + end) / 2;
        std::nth_element(face_order_.begin() + begin, face_order_.begin() + mid,
                         face_order_.begin() + end,
                         [&](int a, int b) { return centroids_(a, axis) < centroids_(b, axis); });
        int left = build_node(begin, mid, leaf_size);
        int right = build_node(mid, end, leaf_size);
        nodes_[idx].left = left;
        nodes_[idx].right = right;
        return idx;
    }

    void closest_recurse(int node_idx, const Vec3& p, SurfaceHit& best) const {
        const Node& node = nodes_[node_idx];
        if (node.box.sq_distance(p) >= best.distance * best.distance) return;
        if (node.left < 0) {
            for (int i = node.face_begin; i < node.face_end; ++i) {
                int f = face_order_[i];
                Vec3 bary;
                Vec3 q = closest_point_on_triangle(p, mesh_->face_vertex(f, 0), mesh_->face_vertex(f, 1),
                                                   mesh_->face_vertex(f, 2), &bary);
                double d = (p - q).norm();
                if (d < best.distance) {
                    best.distance = d;
                    best.point = q;
                    best.face_index = f;
                    best.barycentric = bary;
                }
            }
            return;
        }
        // descend nearer child first
        double dl = nodes_[node.left].box.sq_distance(p);
        double dr = nodes_[node.right].box.sq_distance(p);
        if (dl < dr) {
            closest_recurse(node.left, p, best);
            closest_recurse(node.right, p, best);
        } else {
            closest_recurse(node.right, p, best);
            closest_recurse(node.left, p, best);
        }
    }

    void collect_recurse(int node_idx, const Aabb& box, std::vector<int>& out) const {
        const Node& node = nodes_[node_idx];
        if (!node.box.overlaps(box)) return;
        if (node.left < 0) {
            for (int i = node.face_begin; i < node.face_end; ++i) out.push_back(face_order_[i]);
            return;
        }
        collect_recurse(node.left, box, out);
        collect_recurse(node.right, box, out);
    }

    const TriMesh* mesh_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<int> face_order_;
    Points centroids_;
};

inline SurfaceHit closest_point(const TriMesh& mesh, const Bvh& bvh, const Vec3& p) {
    if (mesh.num_faces() == 0) throw GeometryError("closest_point on empty mesh");
    return bvh.closest_point(p);
}

namespace detail {
inline bool faces_share_vertex(const TriMesh& mesh, int fa, int fb) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (mesh.faces(fa, i) == mesh.faces(fb, j)) return true;
    return false;
}
}  // namespace detail

/// All face pairs whose triangles geometrically intersect. In self mode
/// (&mesh_a == &mesh_b) pairs sharing a vertex are skipped and each pair is
/// reported once with face_a < face_b.
inline std::set<std::pair<int, int>> intersecting_face_pairs(const TriMesh& mesh_a, const Bvh& bvh_a,
                                                             const TriMesh& mesh_b, const Bvh& bvh_b) {
    const bool self_mode = &mesh_a == &mesh_b;
    std::set<std::pair<int, int>> result;
    std::vector<int> candidates;
    for (int fa = 0; fa < mesh_a.num_faces(); ++fa) {
        candidates.clear();
        bvh_b.collect_overlapping(mesh_a.face_bounds(fa), candidates);
        for (int fb : candidates) {
            if (self_mode) {
                if (fb <= fa) continue;
                if (detail::faces_share_vertex(mesh_a, fa, fb)) continue;
            }
            if (triangles_intersect(mesh_a.face_vertex(fa, 0), mesh_a.face_vertex(fa, 1),
                                    mesh_a.face_vertex(fa, 2), mesh_b.face_vertex(fb, 0),
                                    mesh_b.face_vertex(fb, 1), mesh_b.face_vertex(fb, 2)))
                result.insert({fa, fb});
        }
    }
    return result;
}

}  // namespace scenefit
