#pragma once

#include <cstdint>
#include <vector>

#include "ggf/bvh.hpp"
#include "ggf/mesh.hpp"
#include "ggf/texture.hpp"

namespace ggf {

struct MaterialParams {
  double lame_lambda = 2.1e4;  // Pa
  double lame_mu = 1.15e4;     // Pa
  double thickness = 5e-4;     // m

  void validate() const {
    if (lame_mu <= 0 || lame_lambda < 0 || thickness <= 0)
      throw InvalidMesh("invalid material parameters");
  }
};

// Energy value plus, when requested, its gradient w.r.t. vertex positions.
struct EnergyGrad {
  double value = 0.0;
  std::vector<Vec3> grad;  // empty unless with_grad

  void init_grad(size_t n) { grad.assign(n, Vec3::Zero()); }
};

// Bending: sum over dihedral pairs of (|e|^2 / a) * wrap(theta - theta_rest)^2
// with rest-pose edge lengths, area sums, and reference angles. The wrap is
// the atan2 form, smooth away from the +-pi seam. For a flat template the
// reference angle is zero and this reduces to the plain dihedral penalty.
// pair_scale (simulation hook) multiplies individual pair terms.
EnergyGrad bending_energy(const TriangleMesh& mesh, const Topology& topology,
                          bool with_grad,
                          const std::vector<double>* pair_scale = nullptr);

// St. Venant-Kirchhoff membrane energy over faces:
//   sum_i V_i (lambda/2 tr(G)^2 + mu tr(G^2)),  G = (F^T F - I)/2.
// lambda_scale / mu_scale (simulation hooks) multiply per-face moduli.
EnergyGrad strain_energy(const TriangleMesh& mesh,
                         const std::vector<FaceRestState>& rest,
                         const MaterialParams& material, bool with_grad,
                         const std::vector<double>* lambda_scale = nullptr,
                         const std::vector<double>* mu_scale = nullptr);

// Per-garment-vertex witness data against the body surface. Rebuilt whenever
// either mesh moves; the garment position hash guards against stale reuse.
struct CollisionEntry {
  int body_face = -1;
  Vec3 witness = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  double signed_distance = 0.0;  // (v - witness) . normal
};

struct CollisionSet {
  std::vector<CollisionEntry> entries;
  uint64_t garment_hash = 0;
  uint64_t body_hash = 0;
};

uint64_t position_hash(const std::vector<Vec3>& positions);

CollisionSet build_collision_set(const TriangleMesh& garment, const TriangleMesh& body);
CollisionSet build_collision_set(const TriangleMesh& garment, const TriangleMesh& body,
                                 const TriangleBvh& body_bvh);

// Cubic one-sided penalty sum_i max(eps_body - d_i, 0)^3. The witness point
// and normal are frozen within one evaluation; pairs are refreshed by
// rebuilding the collision set each optimizer step.
EnergyGrad body_penetration_energy(const TriangleMesh& garment,
                                   const CollisionSet& collisions, double eps_body,
                                   bool with_grad);

// Rest-length tether between opposite faces of the template geometry.
// anchor_a sits at the casting face's centroid; anchor_b at the ray hit.
struct VirtualEdge {
  int face_a = -1, face_b = -1;
  SurfacePoint anchor_a, anchor_b;
  double rest_length = 0.0;
};

// Casts one ray per face from its centroid along the inward normal of the
// rest geometry and keeps first hits whose normals are opposite within
// parallel_tol_deg. Pairs are deduplicated as unordered (face, anchor) pairs.
// Open surfaces may yield no edges.
std::vector<VirtualEdge> build_virtual_edges(const TriangleMesh& rest_mesh,
                                             double parallel_tol_deg);

// sum_i max(L_e - l_e, 0)^2 on the current geometry.
EnergyGrad virtual_edge_energy(const TriangleMesh& mesh,
                               const std::vector<VirtualEdge>& ves, bool with_grad);

// Appearance-initialization regularizers:
//   pos_value   = || max(|mu_t| - eps_pos, 0) ||_2 over valid texels,
//   scale_value = || max(s_tk - eps_scale, 0) ||_2 over valid texels/axes.
// Gradients are w.r.t. the stored offset and log-scale channels.
struct RegularizerResult {
  double pos_value = 0.0;
  double scale_value = 0.0;
  std::vector<Vec3> d_offset;     // per texel, row-major (zeros when invalid)
  std::vector<Vec3> d_log_scale;
};

RegularizerResult gaussian_regularizers(const GaussianTexture& texture, double eps_pos,
                                        double eps_scale, bool with_grad = true);

}  // namespace ggf
