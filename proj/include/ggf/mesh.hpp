#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "ggf/errors.hpp"

namespace ggf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

// Faces are CCW vertex-index triples; UVs are per-face-corner and live in
// [0,1]^2. rest_positions, when non-empty, holds the template-frame geometry
// (same length as vertices). Positions are meters.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::array<Vec2, 3>> uvs;  // empty or faces.size()
  std::vector<Vec3> rest_positions;      // empty or vertices.size()

  bool has_uvs() const { return !uvs.empty(); }
  bool has_rest() const { return !rest_positions.empty(); }
  const std::vector<Vec3>& rest() const {
    return rest_positions.empty() ? vertices : rest_positions;
  }

  // Whole-buffer position replacement; the only sanctioned mutation.
  void set_positions(std::vector<Vec3> positions);

  Vec3 face_normal(int face) const;        // unit, CCW
  Vec3 face_centroid(int face) const;
  double face_area(int face) const;
  Vec3 rest_face_centroid(int face) const;

  // Axis-aligned bounds of the current positions.
  void bounds(Vec3& lo, Vec3& hi) const;
  double bbox_diagonal() const;
};

// Throws InvalidMesh if indices are out of range, a rest-pose face is
// degenerate (area <= 1e-12 m^2), UV charts overlap, or array sizes are
// inconsistent.
void validate_mesh(const TriangleMesh& mesh);

struct DihedralPair {
  int face_a = -1, face_b = -1;
  int edge_v0 = -1, edge_v1 = -1;  // shared edge, edge_v0 < edge_v1
  int opp_a = -1, opp_b = -1;      // vertices opposite the edge
  double rest_edge_length = 0.0;   // |e_ij| (m)
  double rest_area_sum = 0.0;      // a_ij (m^2)
  double rest_angle = 0.0;         // signed dihedral in the rest pose
};

struct Topology {
  std::vector<std::array<int, 2>> edges;            // unique, v0 < v1, sorted
  std::vector<DihedralPair> dihedral_pairs;         // interior manifold edges
  std::vector<std::vector<int>> vertex_adjacency;   // sorted neighbor lists
  std::vector<std::array<int, 2>> nonmanifold_edges;
};

// Rest lengths/areas/angles come from the mesh's rest positions. Non-manifold
// edges (>2 incident faces) are excluded from bending and reported.
Topology build_topology(const TriangleMesh& mesh);

// A point on the mesh surface: face index + barycentric coordinates.
struct SurfacePoint {
  int face = -1;
  Vec3 bary = Vec3(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
};

Vec3 surface_point_position(const TriangleMesh& mesh, const SurfacePoint& sp);

// Orthonormal per-face frame anchored at a surface point. Columns of rotation
// are [normalized (v0,v1) edge, normal x edge, normal]; scale is (B+H)/2 with
// B the designated edge length and H the triangle height over it.
struct LocalFrame {
  Mat3 rotation = Mat3::Identity();
  Vec3 origin = Vec3::Zero();
  double scale = 1.0;
};

LocalFrame local_frame(const TriangleMesh& mesh, const SurfacePoint& sp);

// Backward companion of local_frame: accumulates d(loss)/d(vertex) for the
// face's three corners given gradients w.r.t. the frame itself.
// grad_rotation column k is dL/d(column k of rotation).
void accumulate_frame_gradients(const TriangleMesh& mesh, const SurfacePoint& sp,
                                const Mat3& grad_rotation, double grad_scale,
                                const Vec3& grad_origin,
                                std::vector<Vec3>& vertex_grads);

// Per-face reference configuration for membrane strain. inv_rest_edges maps
// current in-plane edges back to the rest 2D frame; volume = area * thickness.
struct FaceRestState {
  Mat2 inv_rest_edges = Mat2::Identity();
  double rest_area = 0.0;
  double thickness = 5e-4;
};

std::vector<FaceRestState> build_rest_states(const TriangleMesh& mesh,
                                             double thickness);

// F = d(current)/d(rest), a 3x2 map from the rest tangent frame to world.
Mat32 deformation_gradient(const TriangleMesh& current,
                           const std::vector<FaceRestState>& rest, int face);

// Numerically stable sum with a pairwise reduction tree; the accumulation
// order is fixed so results do not depend on thread count.
double pairwise_sum(const double* values, size_t n);
inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

}  // namespace ggf
