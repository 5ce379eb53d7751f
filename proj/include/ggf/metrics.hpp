#pragma once

#include <cstdint>
#include <optional>

#include "ggf/image.hpp"
#include "ggf/mesh.hpp"

namespace ggf {

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // optional, empty or same length
};

struct MetricReport {
  double chamfer_cm = 0.0;
  double p2m_cm = 0.0;
  double fscore_pct = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

// Uniform area-weighted surface samples, deterministic per seed.
PointCloud sample_mesh_surface(const TriangleMesh& mesh, int count, uint64_t seed);

// Geometry accuracy between prediction and ground truth given as clouds.
// chamfer: mean of the two directional mean nearest-neighbour distances (cm).
// fscore: harmonic mean of precision/recall at threshold_cm, in percent.
void chamfer_fscore(const PointCloud& pred, const PointCloud& gt, double threshold_cm,
                    double& chamfer_cm, double& fscore_pct);

// Mean distance (cm) of pred samples to the gt mesh surface.
double point_to_mesh_cm(const PointCloud& pred, const TriangleMesh& gt);

// Mesh-vs-mesh convenience wrapper: samples both surfaces (sample_count
// points each) and fills chamfer, p2m and F-score.
MetricReport chamfer_p2m_fscore(const TriangleMesh& pred, const TriangleMesh& gt,
                                double threshold_cm, int sample_count = 10000,
                                uint64_t seed = 7);
void chamfer_p2m_fscore(const PointCloud& pred, const PointCloud& gt, double threshold_cm,
                        double& chamfer_cm, double& p2m_cm, double& fscore_pct);

// PSNR (10 log10(1/MSE), capped at 99 dB for identical images) and SSIM with
// the same window constants as the photometric loss.
void psnr_ssim(const ImageF& a, const ImageF& b, double& psnr_db, double& ssim_value);

}  // namespace ggf
