#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include "ggf/mesh.hpp"
#include "ggf/mesh_io.hpp"
#include "test_helpers.hpp"

using namespace ggf;

namespace {

TriangleMesh single_triangle() {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.faces = {{0, 1, 2}};
  return m;
}

TriangleMesh two_triangles() {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

}  // namespace

TEST_CASE("build_topology counts edges and dihedral pairs") {
  SUBCASE("single triangle: 3 edges, no interior edge") {
    const Topology topo = build_topology(single_triangle());
    CHECK(topo.edges.size() == 3);
    CHECK(topo.dihedral_pairs.empty());
    CHECK(topo.nonmanifold_edges.empty());
  }
  SUBCASE("two triangles sharing one edge: 5 edges, 1 pair") {
    const Topology topo = build_topology(two_triangles());
    CHECK(topo.edges.size() == 5);
    REQUIRE(topo.dihedral_pairs.size() == 1);
    CHECK(topo.dihedral_pairs[0].edge_v0 == 0);
    CHECK(topo.dihedral_pairs[0].edge_v1 == 2);
  }
  SUBCASE("three faces on one edge are non-manifold and carry no pair") {
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1)};
    m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 1, 4}};
    const Topology topo = build_topology(m);
    REQUIRE(topo.nonmanifold_edges.size() == 1);
    CHECK(topo.nonmanifold_edges[0] == std::array<int, 2>{0, 1});
    for (const auto& pair : topo.dihedral_pairs) {
      CHECK_FALSE((pair.edge_v0 == 0 && pair.edge_v1 == 1));
    }
  }
  SUBCASE("empty mesh throws") {
    TriangleMesh empty;
    CHECK_THROWS_AS(build_topology(empty), InvalidMesh);
  }
}

TEST_CASE("bending pair count equals interior manifold edge count on random meshes") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const TriangleMesh mesh = testing::random_sheet(rng);
    const Topology topo = build_topology(mesh);
    // Brute-force edge incidence scan.
    std::map<std::array<int, 2>, int> incidence;
    for (const auto& f : mesh.faces)
      for (int k = 0; k < 3; ++k) {
        int a = f[k], b = f[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        ++incidence[{a, b}];
      }
    size_t interior = 0;
    for (const auto& [e, n] : incidence)
      if (n == 2) ++interior;
    CHECK(topo.dihedral_pairs.size() == interior);
    CHECK(topo.edges.size() == incidence.size());
  }
}

TEST_CASE("surface_point_position") {
  const TriangleMesh m = single_triangle();
  SUBCASE("simplex corner returns the first vertex") {
    const Vec3 p = surface_point_position(m, {0, Vec3(1, 0, 0)});
    CHECK((p - m.vertices[0]).norm() == 0.0);
  }
  SUBCASE("uniform barycentric returns the centroid") {
    const Vec3 p = surface_point_position(m, {0, Vec3(1, 1, 1) / 3.0});
    CHECK((p - Vec3(1.0 / 3, 1.0 / 3, 0)).norm() < 1e-15);
  }
  SUBCASE("edge midpoint") {
    const Vec3 p = surface_point_position(m, {0, Vec3(0.5, 0.5, 0)});
    CHECK((p - Vec3(0.5, 0, 0)).norm() < 1e-15);
  }
  SUBCASE("face index out of range throws") {
    CHECK_THROWS_AS(surface_point_position(m, {3, Vec3(1, 0, 0)}), InvalidSurfacePoint);
  }
}

TEST_CASE("surface_point_position is affine in barycentric coordinates") {
  Rng rng(3);
  const TriangleMesh mesh = testing::random_sheet(rng);
  for (int trial = 0; trial < 100; ++trial) {
    const int face = static_cast<int>(rng.uniform() * mesh.faces.size());
    Vec3 b1(rng.uniform(), rng.uniform(), rng.uniform());
    Vec3 b2(rng.uniform(), rng.uniform(), rng.uniform());
    b1 /= b1.sum();
    b2 /= b2.sum();
    const double a = rng.uniform();
    const Vec3 lhs = surface_point_position(mesh, {face, a * b1 + (1 - a) * b2});
    const Vec3 rhs = a * surface_point_position(mesh, {face, b1}) +
                     (1 - a) * surface_point_position(mesh, {face, b2});
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("local_frame") {
  SUBCASE("planar CCW triangle: normal +z, det +1") {
    const TriangleMesh m = single_triangle();
    const LocalFrame f = local_frame(m, {0, Vec3(1, 1, 1) / 3.0});
    CHECK((f.rotation.col(2) - Vec3(0, 0, 1)).norm() < 1e-12);
    CHECK(f.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("base 2 height 1 gives scale 1.5") {
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0.7, 1, 0)};
    m.faces = {{0, 1, 2}};
    const LocalFrame f = local_frame(m, {0, Vec3(1, 1, 1) / 3.0});
    CHECK(f.scale == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("zero-area face throws DegenerateFace") {
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
    m.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(local_frame(m, {0, Vec3(1, 1, 1) / 3.0}), DegenerateFace);
  }
}

TEST_CASE("local_frame rotations stay orthonormal on 1000 random faces") {
  Rng rng(11);
  int tested = 0;
  while (tested < 1000) {
    const TriangleMesh mesh = testing::random_sheet(rng);
    for (size_t face = 0; face < mesh.faces.size() && tested < 1000; ++face, ++tested) {
      const LocalFrame f = local_frame(mesh, {static_cast<int>(face), Vec3(1, 1, 1) / 3.0});
      const Mat3 err = f.rotation.transpose() * f.rotation - Mat3::Identity();
      CHECK(err.cwiseAbs().maxCoeff() < 1e-9);
      CHECK(f.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(f.scale > 0.0);
    }
  }
}

TEST_CASE("deformation_gradient") {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.2, 0.9, 0)};
  m.faces = {{0, 1, 2}};
  m.rest_positions = m.vertices;
  const auto rest = build_rest_states(m, 1e-3);

  SUBCASE("identity deformation") {
    const Mat32 F = deformation_gradient(m, rest, 0);
    const Mat2 M = F.transpose() * F - Mat2::Identity();
    CHECK(M.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("uniform in-plane x2 gives F^T F = 4 I") {
    TriangleMesh scaled = m;
    for (auto& v : scaled.vertices) v *= 2.0;
    const Mat32 F = deformation_gradient(scaled, rest, 0);
    const Mat2 M = F.transpose() * F - 4.0 * Mat2::Identity();
    CHECK(M.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("rigid motion leaves the metric at identity") {
    Rng rng(5);
    TriangleMesh moved = m;
    const Mat3 R = testing::random_rotation(rng);
    for (auto& v : moved.vertices) v = R * v + Vec3(0.3, -1.0, 2.0);
    const Mat32 F = deformation_gradient(moved, rest, 0);
    const Mat2 M = F.transpose() * F - Mat2::Identity();
    CHECK(M.cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("missing rest state throws") {
    CHECK_THROWS_AS(deformation_gradient(m, {}, 0), MissingRestState);
  }
}

TEST_CASE("F^T F is invariant under rigid transforms on random meshes") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const TriangleMesh mesh = testing::random_sheet(rng);
    const auto rest = build_rest_states(mesh, 1e-3);
    TriangleMesh moved = mesh;
    const Mat3 R = testing::random_rotation(rng);
    const Vec3 t(rng.normal(), rng.normal(), rng.normal());
    for (auto& v : moved.vertices) v = R * v + t;
    for (size_t face = 0; face < mesh.faces.size(); ++face) {
      const Mat2 a = deformation_gradient(mesh, rest, static_cast<int>(face)).transpose() *
                     deformation_gradient(mesh, rest, static_cast<int>(face));
      const Mat2 b = deformation_gradient(moved, rest, static_cast<int>(face)).transpose() *
                     deformation_gradient(moved, rest, static_cast<int>(face));
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("mesh validation catches UV overlap") {
  TriangleMesh m = two_triangles();
  m.uvs = {{Vec2(0.1, 0.1), Vec2(0.9, 0.1), Vec2(0.9, 0.9)},
           {Vec2(0.1, 0.1), Vec2(0.9, 0.9), Vec2(0.1, 0.9)}};
  CHECK_NOTHROW(validate_mesh(m));  // shared edge only, no interior overlap
  m.uvs[1] = {Vec2(0.2, 0.1), Vec2(0.9, 0.15), Vec2(0.5, 0.8)};
  CHECK_THROWS_AS(validate_mesh(m), InvalidMesh);
}

TEST_CASE("OBJ and PLY round trips preserve vertex data bit-exactly") {
  Rng rng(23);
  TriangleMesh mesh = testing::random_sheet(rng);
  // Attach UVs: one chart cell per face in a grid.
  const int cells = static_cast<int>(std::ceil(std::sqrt(mesh.faces.size())));
  mesh.uvs.resize(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const double cx = (f % cells) / static_cast<double>(cells);
    const double cy = (f / cells) / static_cast<double>(cells);
    const double s = 0.8 / cells;
    mesh.uvs[f] = {Vec2(cx + 0.1 * s, cy + 0.1 * s), Vec2(cx + s, cy + 0.1 * s),
                   Vec2(cx + 0.5 * s, cy + s)};
  }
  const auto tmp = std::filesystem::temp_directory_path();

  SUBCASE("ply") {
    const std::string path = (tmp / "ggf_roundtrip.ply").string();
    save_ply(mesh, path);
    const TriangleMesh loaded = load_ply(path);
    REQUIRE(loaded.vertices.size() == mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
      CHECK(loaded.vertices[i] == mesh.vertices[i]);
      CHECK(loaded.rest_positions[i] == mesh.rest_positions[i]);
    }
    CHECK(loaded.faces == mesh.faces);
    for (size_t f = 0; f < mesh.uvs.size(); ++f)
      for (int k = 0; k < 3; ++k) CHECK(loaded.uvs[f][k] == mesh.uvs[f][k]);
  }
  SUBCASE("obj") {
    const std::string path = (tmp / "ggf_roundtrip.obj").string();
    mesh.rest_positions.clear();  // OBJ carries no rest channel
    save_obj(mesh, path);
    const TriangleMesh loaded = load_obj(path);
    REQUIRE(loaded.vertices.size() == mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
      CHECK(loaded.vertices[i] == mesh.vertices[i]);
    CHECK(loaded.faces == mesh.faces);
  }
}

TEST_CASE("pairwise_sum matches plain summation") {
  Rng rng(9);
  std::vector<double> values(1234);
  long double ref = 0.0;
  for (auto& v : values) {
    v = rng.normal();
    ref += v;
  }
  CHECK(pairwise_sum(values) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
}
