#include "ggf/metrics.hpp"

#include <cmath>

#include "ggf/bvh.hpp"
#include "ggf/loss.hpp"
#include "ggf/rng.hpp"

namespace ggf {

PointCloud sample_mesh_surface(const TriangleMesh& mesh, int count, uint64_t seed) {
  if (mesh.faces.empty()) throw EmptyGeometry("cannot sample an empty mesh");
  // Cumulative area table for area-weighted face selection.
  std::vector<double> cum(mesh.faces.size());
  double total = 0.0;
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    total += mesh.face_area(static_cast<int>(i));
    cum[i] = total;
  }
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(count);
  cloud.normals.reserve(count);
  for (int s = 0; s < count; ++s) {
    const double r = rng.uniform() * total;
    const size_t face =
        std::lower_bound(cum.begin(), cum.end(), r) - cum.begin();
    const auto& f = mesh.faces[std::min(face, mesh.faces.size() - 1)];
    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    cloud.points.push_back((1.0 - u - v) * mesh.vertices[f[0]] + u * mesh.vertices[f[1]] +
                           v * mesh.vertices[f[2]]);
    cloud.normals.push_back(mesh.face_normal(static_cast<int>(
        std::min(face, mesh.faces.size() - 1))));
  }
  return cloud;
}

void chamfer_fscore(const PointCloud& pred, const PointCloud& gt, double threshold_cm,
                    double& chamfer_cm, double& fscore_pct) {
  if (pred.points.empty() || gt.points.empty())
    throw EmptyGeometry("metric inputs must be non-empty");
  const KdTree3 gt_tree(gt.points);
  const KdTree3 pred_tree(pred.points);

  double sum_fwd = 0.0;
  size_t close_fwd = 0;
  const double threshold_m = threshold_cm / 100.0;
  for (const auto& p : pred.points) {
    double d;
    gt_tree.nearest(p, &d);
    sum_fwd += d;
    if (d <= threshold_m) ++close_fwd;
  }
  double sum_bwd = 0.0;
  size_t close_bwd = 0;
  for (const auto& p : gt.points) {
    double d;
    pred_tree.nearest(p, &d);
    sum_bwd += d;
    if (d <= threshold_m) ++close_bwd;
  }
  const double mean_fwd = sum_fwd / static_cast<double>(pred.points.size());
  const double mean_bwd = sum_bwd / static_cast<double>(gt.points.size());
  chamfer_cm = 100.0 * 0.5 * (mean_fwd + mean_bwd);

  const double precision = static_cast<double>(close_fwd) / pred.points.size();
  const double recall = static_cast<double>(close_bwd) / gt.points.size();
  fscore_pct = (precision + recall) > 0.0
                   ? 100.0 * 2.0 * precision * recall / (precision + recall)
                   : 0.0;
}

double point_to_mesh_cm(const PointCloud& pred, const TriangleMesh& gt) {
  if (pred.points.empty() || gt.faces.empty())
    throw EmptyGeometry("metric inputs must be non-empty");
  const TriangleBvh bvh(gt);
  double sum = 0.0;
  for (const auto& p : pred.points) sum += bvh.closest_point(p).distance;
  return 100.0 * sum / static_cast<double>(pred.points.size());
}

MetricReport chamfer_p2m_fscore(const TriangleMesh& pred, const TriangleMesh& gt,
                                double threshold_cm, int sample_count, uint64_t seed) {
  MetricReport report;
  const PointCloud pred_cloud = sample_mesh_surface(pred, sample_count, seed);
  const PointCloud gt_cloud = sample_mesh_surface(gt, sample_count, seed + 1);
  chamfer_fscore(pred_cloud, gt_cloud, threshold_cm, report.chamfer_cm, report.fscore_pct);
  report.p2m_cm = point_to_mesh_cm(pred_cloud, gt);
  return report;
}

void chamfer_p2m_fscore(const PointCloud& pred, const PointCloud& gt, double threshold_cm,
                        double& chamfer_cm, double& p2m_cm, double& fscore_pct) {
  chamfer_fscore(pred, gt, threshold_cm, chamfer_cm, fscore_pct);
  // Cloud-vs-cloud: p2m falls back to nearest-neighbour distance.
  const KdTree3 gt_tree(gt.points);
  double sum = 0.0;
  for (const auto& p : pred.points) {
    double d;
    gt_tree.nearest(p, &d);
    sum += d;
  }
  p2m_cm = 100.0 * sum / static_cast<double>(pred.points.size());
}

void psnr_ssim(const ImageF& a, const ImageF& b, double& psnr_db, double& ssim_value) {
  if (!a.same_shape(b)) throw ShapeMismatch("psnr_ssim inputs differ in shape");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  psnr_db = mse > 0.0 ? std::min(10.0 * std::log10(1.0 / mse), 99.0) : 99.0;
  ssim_value = ssim(a, b);
}

}  // namespace ggf
