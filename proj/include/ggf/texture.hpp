#pragma once

#include <cstdint>
#include <vector>

#include "ggf/mesh.hpp"

namespace ggf {

constexpr int kShTerms = 16;       // degree-3 basis
constexpr int kTexelChannels = 59; // 48 SH + 1 opacity + 3 scale + 4 rotation + 3 offset

using ShCoeffs = Eigen::Matrix<double, kShTerms, 3>;
using Quat = Eigen::Vector4d;  // (w, x, y, z)

// One texel of the Gaussian texture. Opacity is stored as a pre-sigmoid
// logit and scale as log-scale so unconstrained optimization stays in range;
// SH coefficients are unclamped (only the decoded color is clamped).
// Rotation and offset live in the local frame of the host face; offset and
// scale are in units of the face scale k.
struct GaussianTexel {
  ShCoeffs sh = ShCoeffs::Zero();
  double opacity_logit = 0.0;
  Vec3 log_scale = Vec3::Zero();
  Quat rotation = Quat(1, 0, 0, 0);
  Vec3 offset = Vec3::Zero();

  double opacity() const { return 1.0 / (1.0 + std::exp(-opacity_logit)); }
  Vec3 scale() const { return log_scale.array().exp(); }
  Quat unit_rotation() const {
    const double n = rotation.norm();
    return n > 0 ? Quat(rotation / n) : Quat(1, 0, 0, 0);
  }

  static GaussianTexel defaults();
  bool operator==(const GaussianTexel& o) const = default;
};

// H x W grid of texels plus the validity mask; invalid texels stay all-zero.
struct GaussianTexture {
  int width = 0, height = 0;
  std::vector<GaussianTexel> data;
  std::vector<uint8_t> valid;

  GaussianTexture() = default;
  GaussianTexture(int w, int h)
      : width(w), height(h), data(static_cast<size_t>(w) * h),
        valid(static_cast<size_t>(w) * h, 0) {}

  size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  GaussianTexel& at(int x, int y) { return data[index(x, y)]; }
  const GaussianTexel& at(int x, int y) const { return data[index(x, y)]; }
  bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
  size_t valid_count() const;
};

// Point location in UV space, grid-accelerated. Texel centers that land on a
// shared chart edge resolve to the lowest containing face index.
class UvLocator {
 public:
  explicit UvLocator(const TriangleMesh& mesh);
  int locate(const Vec2& uv, Vec3* bary = nullptr) const;

 private:
  const TriangleMesh* mesh_;
  int cells_;
  std::vector<std::vector<int>> grid_;
};

// Texture whose valid mask marks texel centers covered by the mesh's UV
// charts; texels are initialized to defaults.
GaussianTexture make_texture_for_mesh(const TriangleMesh& mesh, int width, int height);

// World-space parameters of a spawned Gaussian.
struct WorldGaussian {
  Vec3 position = Vec3::Zero();
  Quat rotation = Quat(1, 0, 0, 0);  // unit
  Vec3 scale = Vec3::Ones();         // anisotropic, meters
  double opacity = 0.5;
};

// r' = quat(R) r, mu' = k R mu + tau, s' = k s.
WorldGaussian local_to_world(const GaussianTexel& texel, const LocalFrame& frame);

// A texel instantiated at its surface point with cached frame and world
// parameters. refresh_attachments re-derives frames + world parameters after
// a position-buffer update.
struct AttachedGaussian {
  int texel_x = 0, texel_y = 0;
  SurfacePoint surface;
  LocalFrame frame;
  WorldGaussian world;
  ShCoeffs sh = ShCoeffs::Zero();
};

// One Gaussian per valid texel, deterministic row-major order. Throws
// UvCoverageError when a valid texel's center lies outside all UV triangles.
std::vector<AttachedGaussian> spawn_gaussians(const GaussianTexture& texture,
                                              const TriangleMesh& mesh);

void refresh_attachments(std::vector<AttachedGaussian>& gaussians,
                         const GaussianTexture& texture, const TriangleMesh& mesh);

// Rotation matrix of a unit quaternion (w, x, y, z).
Mat3 quat_to_matrix(const Quat& q);
Quat quat_multiply(const Quat& a, const Quat& b);
Quat matrix_to_quat(const Mat3& R);

// d(R(q))/dq_k contracted against dL/dR, for a unit quaternion q; the
// projection onto the normalization constraint is applied by the caller.
Quat quat_rotation_backward(const Quat& q, const Mat3& dL_dR);

}  // namespace ggf
