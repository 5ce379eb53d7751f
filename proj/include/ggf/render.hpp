#pragma once

#include <cstdint>
#include <vector>

#include "ggf/bvh.hpp"
#include "ggf/camera.hpp"
#include "ggf/image.hpp"
#include "ggf/texture.hpp"

namespace ggf {

struct RenderedImage {
  ImageF rgb;    // H x W x 3 in [0,1]
  ImageF alpha;  // H x W x 1 in [0,1]
};

struct ProjectedGaussian {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();  // px
  Mat2 cov = Mat2::Identity();                     // px^2
  double depth = 0.0;                              // m
  bool culled = true;
};

// EWA-style perspective projection: mean by pinhole projection, covariance
// J W Sigma W^T J^T with the Jacobian evaluated at the mean, plus a low-pass
// dilation on the diagonal. Culled when depth < near or the 3-sigma ellipse
// misses the frame.
ProjectedGaussian project_gaussian(const WorldGaussian& g, const Camera& cam,
                                   double low_pass = 0.3);

struct RenderOptions {
  Vec3 background = Vec3::Zero();
  double low_pass = 0.3;              // px^2
  double alpha_clamp = 0.99;
  double min_alpha = 1.0 / 255.0;     // skip threshold per blend
  double transmittance_floor = 1e-4;  // early stop
  int tile_size = 16;
  // Support truncation in sigmas. Gradient tests widen this (together with
  // the cutoffs above) so finite differences act on the smooth region.
  double radius_sigma = 3.0;
};

// Inputs of one render call. mesh/texture enable the attachment chain in the
// backward pass; visibility (when present) drops Gaussians before projection.
struct SplatScene {
  const std::vector<AttachedGaussian>* gaussians = nullptr;
  const TriangleMesh* mesh = nullptr;
  const GaussianTexture* texture = nullptr;
  const std::vector<uint8_t>* visibility = nullptr;
};

// Retained forward state; inputs must outlive the context.
struct RenderContext {
  SplatScene scene;
  Camera camera;
  RenderOptions options;
  RenderedImage image;

  struct GaussianRecord {
    bool valid = false;
    Vec3 cam_pos = Vec3::Zero();
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Mat2 cov = Mat2::Zero();
    Mat2 conic = Mat2::Zero();
    double depth = 0.0;
    Vec3 color = Vec3::Zero();
    double opacity = 0.0;
    Vec3 view_dir = Vec3::Zero();
    double view_dist = 0.0;
    Mat3 rot_world = Mat3::Identity();
  };
  std::vector<GaussianRecord> records;
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<int>> tile_lists;  // sorted front-to-back
};

RenderContext render_forward(const SplatScene& scene, const Camera& cam,
                             const RenderOptions& options = {});

// Convenience forward-only call.
RenderedImage rasterize(const std::vector<AttachedGaussian>& gaussians, const Camera& cam,
                        const Vec3& background = Vec3::Zero());

// Gradients w.r.t. the stored texel channels of one Gaussian.
struct TexelGrads {
  ShCoeffs sh = ShCoeffs::Zero();
  double opacity_logit = 0.0;
  Vec3 log_scale = Vec3::Zero();
  Quat rotation = Quat::Zero();  // w.r.t. the stored (unnormalized) quaternion
  Vec3 offset = Vec3::Zero();
};

struct GradientBuffers {
  std::vector<Vec3> world_position;  // per Gaussian
  std::vector<TexelGrads> texels;    // per Gaussian; empty without a texture
  std::vector<Vec3> vertices;        // per mesh vertex; empty without a mesh
};

// Full backward pass: pixel gradients -> Gaussian parameters -> (through the
// local frames) mesh vertices. dL_drgb must match the rendered image shape;
// dL_dalpha is optional.
GradientBuffers rasterize_backward(const RenderContext& ctx, const ImageF& dL_drgb,
                                   const ImageF* dL_dalpha = nullptr);

// Ray-cast visibility of Gaussian surface points: a Gaussian is visible iff
// the segment from the camera origin to its surface point is unobstructed up
// to (distance - delta). The Gaussian's own face is excluded when testing the
// occluder at host_index.
struct OccluderSet {
  std::vector<const TriangleBvh*> bvhs;
  int host_index = -1;
};

std::vector<uint8_t> visibility_mask(const std::vector<AttachedGaussian>& gaussians,
                                     const TriangleMesh& mesh, const OccluderSet& occluders,
                                     const Camera& cam, double delta = 1e-3);

}  // namespace ggf
