#include "ggf/texture.hpp"

#include <algorithm>
#include <cmath>

namespace ggf {

GaussianTexel GaussianTexel::defaults() {
  GaussianTexel t;
  t.sh.setZero();                       // decoded color 0.5 gray
  t.opacity_logit = 0.0;                // alpha 0.5
  t.log_scale = Vec3::Constant(std::log(0.3));  // ~1/3 of the face scale
  t.rotation = Quat(1, 0, 0, 0);
  t.offset = Vec3::Zero();
  return t;
}

size_t GaussianTexture::valid_count() const {
  return static_cast<size_t>(std::count_if(valid.begin(), valid.end(),
                                           [](uint8_t v) { return v != 0; }));
}

UvLocator::UvLocator(const TriangleMesh& mesh) : mesh_(&mesh) {
  if (!mesh.has_uvs()) throw InvalidMesh("mesh has no UVs");
  cells_ = std::max(8, static_cast<int>(std::sqrt(static_cast<double>(mesh.faces.size()))));
  grid_.assign(static_cast<size_t>(cells_) * cells_, {});
  for (size_t i = 0; i < mesh.uvs.size(); ++i) {
    const auto& tri = mesh.uvs[i];
    Vec2 lo = tri[0].cwiseMin(tri[1]).cwiseMin(tri[2]);
    Vec2 hi = tri[0].cwiseMax(tri[1]).cwiseMax(tri[2]);
    const int x0 = std::clamp(static_cast<int>(lo.x() * cells_), 0, cells_ - 1);
    const int x1 = std::clamp(static_cast<int>(hi.x() * cells_), 0, cells_ - 1);
    const int y0 = std::clamp(static_cast<int>(lo.y() * cells_), 0, cells_ - 1);
    const int y1 = std::clamp(static_cast<int>(hi.y() * cells_), 0, cells_ - 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        grid_[static_cast<size_t>(y) * cells_ + x].push_back(static_cast<int>(i));
  }
}

int UvLocator::locate(const Vec2& uv, Vec3* bary) const {
  const int cx = std::clamp(static_cast<int>(uv.x() * cells_), 0, cells_ - 1);
  const int cy = std::clamp(static_cast<int>(uv.y() * cells_), 0, cells_ - 1);
  const auto& cell = grid_[static_cast<size_t>(cy) * cells_ + cx];
  int best = -1;
  Vec3 best_bary = Vec3::Zero();
  for (int face : cell) {
    const auto& tri = mesh_->uvs[face];
    const Vec2 e1 = tri[1] - tri[0];
    const Vec2 e2 = tri[2] - tri[0];
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    if (std::abs(det) < 1e-18) continue;
    const Vec2 d = uv - tri[0];
    const double b1 = (d.x() * e2.y() - d.y() * e2.x()) / det;
    const double b2 = (e1.x() * d.y() - e1.y() * d.x()) / det;
    const double b0 = 1.0 - b1 - b2;
    const double tol = -1e-12;
    if (b0 >= tol && b1 >= tol && b2 >= tol) {
      if (best < 0 || face < best) {  // lowest face index wins on shared edges
        best = face;
        best_bary = Vec3(b0, b1, b2);
      }
    }
  }
  if (best >= 0 && bary) {
    best_bary = best_bary.cwiseMax(0.0);
    *bary = best_bary / best_bary.sum();
  }
  return best;
}

GaussianTexture make_texture_for_mesh(const TriangleMesh& mesh, int width, int height) {
  GaussianTexture tex(width, height);
  const UvLocator locator(mesh);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec2 uv((x + 0.5) / width, (y + 0.5) / height);
      if (locator.locate(uv) >= 0) {
        tex.valid[tex.index(x, y)] = 1;
        tex.at(x, y) = GaussianTexel::defaults();
      }
    }
  }
  return tex;
}

Mat3 quat_to_matrix(const Quat& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

Quat quat_multiply(const Quat& a, const Quat& b) {
  return Quat(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

Quat matrix_to_quat(const Mat3& R) {
  const Eigen::Quaterniond q(R);
  Quat out(q.w(), q.x(), q.y(), q.z());
  return out[0] < 0 ? Quat(-out) : out;
}

Quat quat_rotation_backward(const Quat& q, const Mat3& dL_dR) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 dw, dx, dy, dz;
  dw << 0, -2 * z, 2 * y,
        2 * z, 0, -2 * x,
        -2 * y, 2 * x, 0;
  dx << 0, 2 * y, 2 * z,
        2 * y, -4 * x, -2 * w,
        2 * z, 2 * w, -4 * x;
  dy << -4 * y, 2 * x, 2 * w,
        2 * x, 0, 2 * z,
        -2 * w, 2 * z, -4 * y;
  dz << -4 * z, -2 * w, 2 * x,
        2 * w, -4 * z, 2 * y,
        2 * x, 2 * y, 0;
  return Quat(dw.cwiseProduct(dL_dR).sum(), dx.cwiseProduct(dL_dR).sum(),
              dy.cwiseProduct(dL_dR).sum(), dz.cwiseProduct(dL_dR).sum());
}

WorldGaussian local_to_world(const GaussianTexel& texel, const LocalFrame& frame) {
  WorldGaussian w;
  const Quat local = texel.unit_rotation();
  w.rotation = quat_multiply(matrix_to_quat(frame.rotation), local);
  w.position = frame.scale * (frame.rotation * texel.offset) + frame.origin;
  w.scale = frame.scale * texel.scale();
  w.opacity = texel.opacity();
  return w;
}

std::vector<AttachedGaussian> spawn_gaussians(const GaussianTexture& texture,
                                              const TriangleMesh& mesh) {
  const UvLocator locator(mesh);
  std::vector<AttachedGaussian> out;
  out.reserve(texture.valid_count());
  for (int y = 0; y < texture.height; ++y) {
    for (int x = 0; x < texture.width; ++x) {
      if (!texture.is_valid(x, y)) continue;
      const Vec2 uv((x + 0.5) / texture.width, (y + 0.5) / texture.height);
      Vec3 bary;
      const int face = locator.locate(uv, &bary);
      if (face < 0)
        throw UvCoverageError("valid texel (" + std::to_string(x) + ", " +
                              std::to_string(y) + ") lies outside all UV triangles");
      AttachedGaussian g;
      g.texel_x = x;
      g.texel_y = y;
      g.surface = SurfacePoint{face, bary};
      g.frame = local_frame(mesh, g.surface);
      g.world = local_to_world(texture.at(x, y), g.frame);
      g.sh = texture.at(x, y).sh;
      out.push_back(std::move(g));
    }
  }
  return out;
}

void refresh_attachments(std::vector<AttachedGaussian>& gaussians,
                         const GaussianTexture& texture, const TriangleMesh& mesh) {
  for (auto& g : gaussians) {
    g.frame = local_frame(mesh, g.surface);
    const auto& texel = texture.at(g.texel_x, g.texel_y);
    g.world = local_to_world(texel, g.frame);
    g.sh = texel.sh;
  }
}

}  // namespace ggf
