#include "ggf/icp.hpp"

#include <Eigen/SVD>

namespace ggf {

RigidTransform kabsch(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.empty() || src.size() != dst.size())
    throw EmptyPointCloud("kabsch needs equal-length non-empty point sets");
  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= static_cast<double>(src.size());
  mu_d /= static_cast<double>(src.size());
  Mat3 cov = Mat3::Zero();
  for (size_t i = 0; i < src.size(); ++i)
    cov += (dst[i] - mu_d) * (src[i] - mu_s).transpose();
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  RigidTransform out;
  out.R = svd.matrixU() * d * svd.matrixV().transpose();
  out.t = mu_d - out.R * mu_s;
  return out;
}

RigidTransform align_first_frame(const std::vector<Vec3>& template_points,
                                 const std::vector<Vec3>& target_points, int max_rounds) {
  if (template_points.empty() || target_points.empty())
    throw EmptyPointCloud("ICP requires non-empty point sets");
  const KdTree3 tree(target_points);

  RigidTransform current;
  std::vector<int> correspondences(template_points.size(), -1);
  std::vector<Vec3> src(template_points.size()), dst(template_points.size());
  for (int round = 0; round < max_rounds; ++round) {
    bool changed = false;
    for (size_t i = 0; i < template_points.size(); ++i) {
      const int nn = tree.nearest(current.apply(template_points[i]));
      if (nn != correspondences[i]) {
        correspondences[i] = nn;
        changed = true;
      }
    }
    if (!changed && round > 0) break;
    for (size_t i = 0; i < template_points.size(); ++i) {
      src[i] = template_points[i];
      dst[i] = target_points[correspondences[i]];
    }
    current = kabsch(src, dst);
  }
  return current;
}

std::vector<Vec3> face_centroid_samples(const TriangleMesh& mesh) {
  std::vector<Vec3> out;
  out.reserve(mesh.faces.size());
  for (size_t i = 0; i < mesh.faces.size(); ++i)
    out.push_back(mesh.face_centroid(static_cast<int>(i)));
  return out;
}

}  // namespace ggf
