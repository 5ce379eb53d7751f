#pragma once

#include "ggf/bvh.hpp"
#include "ggf/mesh.hpp"

namespace ggf {

struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return R * p + t; }
};

// Point-to-point ICP with nearest-neighbour correspondences; alternates the
// correspondence update with a Kabsch solve until the correspondence set is
// fixed or max_rounds is hit. The result is exactly rigid.
RigidTransform align_first_frame(const std::vector<Vec3>& template_points,
                                 const std::vector<Vec3>& target_points,
                                 int max_rounds = 100);

// Least-squares rigid transform mapping src onto dst (same-length pairs).
RigidTransform kabsch(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

// Face-centroid samples, the standard body point sampling for alignment.
std::vector<Vec3> face_centroid_samples(const TriangleMesh& mesh);

}  // namespace ggf
