#include <catch2/catch_amalgamated.hpp>

#include <scenefit/mesh.hpp>

#include "helpers.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace scenefit;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("vertex normals on a flat grid are all +z") {
    TriMesh mesh;
    const int n = 5;
    mesh.vertices.resize(n * n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) mesh.vertices.row(i * n + j) << i, j, 0.0;
    std::vector<Eigen::Vector3i> faces;
    for (int i = 0; i + 1 < n; ++i)
        for (int j = 0; j + 1 < n; ++j) {
            int a = i * n + j, b = i * n + j + 1, c = (i + 1) * n + j, d = (i + 1) * n + j + 1;
            faces.emplace_back(a, c, b);
            faces.emplace_back(b, c, d);
        }
    mesh.faces.resize(static_cast<int>(faces.size()), 3);
    for (size_t f = 0; f < faces.size(); ++f) mesh.faces.row(static_cast<int>(f)) = faces[f].transpose();

    compute_vertex_normals(mesh);
    for (int i = 0; i < mesh.num_vertices(); ++i) {
        CHECK(mesh.vertex_normals(i, 0) == Catch::Approx(0.0).margin(1e-12));
        CHECK(mesh.vertex_normals(i, 1) == Catch::Approx(0.0).margin(1e-12));
        CHECK(mesh.vertex_normals(i, 2) == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("cube corner normal equals area-weighted average of incident faces") {
    TriMesh cube = testutil::make_box(Vec3(0, 0, 0), Vec3(1, 1, 1));
    compute_vertex_normals(cube);
    // corner (0,0,0) is vertex 0: each cube face contributes triangles of
    // equal area, so the average of the three incident unit face normals is
    // proportional to (-1,-1,-1) regardless of the triangulation split.
    Vec3 n = cube.vertex_normals.row(0).transpose();
    Vec3 expected = Vec3(-1, -1, -1).normalized();
    // the fan triangulation puts one or two triangles of each face at the
    // corner, but they all share the face normal, so only the per-face total
    // incident area matters; check direction, not exact equality
    CHECK(n.dot(expected) > 0.9);
    CHECK(n.norm() == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vertex normals match a brute-force per-face accumulation oracle") {
    TriMesh mesh = testutil::make_blob(7);
    compute_vertex_normals(mesh);

    Points accum = Points::Zero(mesh.num_vertices(), 3);
    for (int f = 0; f < mesh.num_faces(); ++f) {
        Vec3 a = mesh.face_vertex(f, 0), b = mesh.face_vertex(f, 1), c = mesh.face_vertex(f, 2);
        Vec3 area_normal = 0.5 * (b - a).cross(c - a);  // area-weighted
        for (int k = 0; k < 3; ++k) accum.row(mesh.faces(f, k)) += area_normal.transpose();
    }
    for (int i = 0; i < mesh.num_vertices(); ++i) {
        Vec3 expected = accum.row(i).transpose().normalized();
        Vec3 got = mesh.vertex_normals.row(i).transpose();
        CHECK((got - expected).norm() < 1e-6);
    }
}

TEST_CASE("watertightness check") {
    TriMesh cube = testutil::make_box(Vec3(0, 0, 0), Vec3(1, 1, 1));
    CHECK(cube.is_watertight());

    TriMesh open = cube;
    open.faces.conservativeResize(open.num_faces() - 1, 3);
    CHECK_FALSE(open.is_watertight());

    CHECK(testutil::make_blob(3).is_watertight());
    CHECK(testutil::make_uv_sphere(8, 12).is_watertight());
}

TEST_CASE("OBJ save/load round-trip") {
    TriMesh cube = testutil::make_box(Vec3(-0.25, 0.5, 1.0), Vec3(1.0, 2.0, 3.0));
    std::string path = temp_path("scenefit_test_cube.obj");
    save_mesh(cube, path);
    TriMesh back = load_mesh(path);
    REQUIRE(back.num_vertices() == cube.num_vertices());
    REQUIRE(back.num_faces() == cube.num_faces());
    CHECK((back.vertices - cube.vertices).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((back.faces - cube.faces).cwiseAbs().maxCoeff() == 0);
    std::remove(path.c_str());
}

TEST_CASE("PLY save/load round-trip") {
    TriMesh blob = testutil::make_blob(11);
    std::string path = temp_path("scenefit_test_blob.ply");
    save_mesh(blob, path);
    TriMesh back = load_mesh(path);
    REQUIRE(back.num_vertices() == blob.num_vertices());
    REQUIRE(back.num_faces() == blob.num_faces());
    CHECK((back.vertices - blob.vertices).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((back.faces - blob.faces).cwiseAbs().maxCoeff() == 0);
    std::remove(path.c_str());
}

TEST_CASE("OBJ 1-based indices convert to 0-based") {
    std::string path = temp_path("scenefit_test_tri.obj");
    {
        std::ofstream out(path);
        out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
    }
    TriMesh tri = load_mesh(path);
    REQUIRE(tri.num_faces() == 1);
    CHECK(tri.faces(0, 0) == 0);
    CHECK(tri.faces(0, 1) == 1);
    CHECK(tri.faces(0, 2) == 2);
    std::remove(path.c_str());
}

TEST_CASE("OBJ negative (relative) indices") {
    std::string path = temp_path("scenefit_test_neg.obj");
    {
        std::ofstream out(path);
        out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n";
    }
    TriMesh tri = load_mesh(path);
    REQUIRE(tri.num_faces() == 1);
    CHECK(tri.faces(0, 0) == 0);
    CHECK(tri.faces(0, 2) == 2);
    std::remove(path.c_str());
}

TEST_CASE("malformed face line raises a parse error naming the line") {
    std::string path = temp_path("scenefit_test_bad.obj");
    {
        std::ofstream out(path);
        out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 nonsense\n";
    }
    try {
        load_mesh(path);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        std::string msg = e.what();
        CHECK(msg.find(":4") != std::string::npos);  // the offending line number
    }
    std::remove(path.c_str());
}

TEST_CASE("face index out of range is rejected") {
    std::string path = temp_path("scenefit_test_oob.obj");
    {
        std::ofstream out(path);
        out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
    }
    CHECK_THROWS_AS(load_mesh(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("validate rejects degenerate faces") {
    TriMesh degen;
    degen.vertices.resize(3, 3);
    degen.vertices << 0, 0, 0, 1, 0, 0, 2, 0, 0;  // collinear
    degen.faces.resize(1, 3);
    degen.faces << 0, 1, 2;
    CHECK_THROWS_AS(degen.validate(), GeometryError);

    TriMesh ok = testutil::make_box(Vec3(0, 0, 0), Vec3(1, 1, 1));
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("Aabb queries") {
    Aabb box;
    box.expand(Vec3(0, 0, 0));
    box.expand(Vec3(1, 2, 3));
    CHECK(box.contains(Vec3(0.5, 1.0, 1.5)));
    CHECK_FALSE(box.contains(Vec3(-0.1, 0, 0)));
    CHECK(box.sq_distance(Vec3(2, 0, 0)) == Catch::Approx(1.0));
    CHECK(box.sq_distance(Vec3(0.5, 1, 1)) == Catch::Approx(0.0));
    CHECK(box.diagonal() == Catch::Approx(std::sqrt(1.0 + 4.0 + 9.0)));

    Aabb other;
    other.expand(Vec3(2, 0, 0));
    other.expand(Vec3(3, 1, 1));
    CHECK_FALSE(box.overlaps(other));
    CHECK(box.overlaps(box));
}
