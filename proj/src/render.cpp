#include "ggf/render.hpp"

#include <algorithm>
#include <cmath>

#include "ggf/sh.hpp"

namespace ggf {

namespace {

struct Projection {
  bool valid = false;
  Vec3 cam_pos = Vec3::Zero();
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Mat2 cov = Mat2::Zero();
  double radius = 0.0;
};

// Projection Jacobian at the camera-space point t.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Vec3& t) {
  Eigen::Matrix<double, 2, 3> J;
  const double iz = 1.0 / t.z();
  const double iz2 = iz * iz;
  J << cam.fx * iz, 0.0, -cam.fx * t.x() * iz2,
       0.0, cam.fy * iz, -cam.fy * t.y() * iz2;
  return J;
}

Projection project_internal(const Vec3& position, const Mat3& rot_world, const Vec3& scale,
                            const Camera& cam, double low_pass,
                            double radius_sigma = 3.0) {
  Projection out;
  const Vec3 t = cam.to_camera(position);
  if (t.z() < cam.near_plane) return out;
  out.cam_pos = t;
  out.mean = Eigen::Vector2d(cam.fx * t.x() / t.z() + cam.cx,
                             cam.fy * t.y() / t.z() + cam.cy);
  const Mat3 A = cam.R * rot_world * scale.asDiagonal();
  const Mat3 sigma_cam = A * A.transpose();
  const auto J = projection_jacobian(cam, t);
  out.cov = J * sigma_cam * J.transpose() + low_pass * Mat2::Identity();
  // Truncation circle from the largest eigenvalue of the 2x2 covariance.
  const double mid = 0.5 * (out.cov(0, 0) + out.cov(1, 1));
  const double det = out.cov.determinant();
  const double lambda_max = mid + std::sqrt(std::max(mid * mid - det, 0.0));
  out.radius = radius_sigma * std::sqrt(std::max(lambda_max, 0.0));
  if (out.mean.x() + out.radius < 0.0 || out.mean.x() - out.radius > cam.width ||
      out.mean.y() + out.radius < 0.0 || out.mean.y() - out.radius > cam.height)
    return out;
  if (det <= 1e-300) return out;
  out.valid = true;
  return out;
}

}  // namespace

ProjectedGaussian project_gaussian(const WorldGaussian& g, const Camera& cam,
                                   double low_pass) {
  ProjectedGaussian out;
  const Projection p =
      project_internal(g.position, quat_to_matrix(g.rotation), g.scale, cam, low_pass);
  out.culled = !p.valid;
  if (p.valid || cam.to_camera(g.position).z() >= cam.near_plane) {
    out.mean = p.mean;
    out.cov = p.cov;
  }
  out.depth = cam.to_camera(g.position).z();
  return out;
}

RenderContext render_forward(const SplatScene& scene, const Camera& cam,
                             const RenderOptions& options) {
  cam.validate();
  RenderContext ctx;
  ctx.scene = scene;
  ctx.camera = cam;
  ctx.options = options;
  const auto& gaussians = *scene.gaussians;
  const int n = static_cast<int>(gaussians.size());
  ctx.records.resize(n);

  const int tile = options.tile_size;
  ctx.tiles_x = (cam.width + tile - 1) / tile;
  ctx.tiles_y = (cam.height + tile - 1) / tile;
  ctx.tile_lists.assign(static_cast<size_t>(ctx.tiles_x) * ctx.tiles_y, {});

  const Vec3 cam_center = cam.center();
  std::vector<double> radius(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (scene.visibility && !(*scene.visibility)[i]) continue;
    const auto& g = gaussians[i];
    auto& rec = ctx.records[i];
    // The world rotation is recomposed from frame * local so the backward
    // pass sees bitwise-identical factors.
    Mat3 rot_world;
    if (scene.texture) {
      const auto& texel = scene.texture->at(g.texel_x, g.texel_y);
      rot_world = g.frame.rotation * quat_to_matrix(texel.unit_rotation());
    } else {
      rot_world = quat_to_matrix(g.world.rotation);
    }
    const Projection proj = project_internal(g.world.position, rot_world, g.world.scale,
                                             cam, options.low_pass, options.radius_sigma);
    if (!proj.valid) continue;
    rec.valid = true;
    rec.rot_world = rot_world;
    rec.cam_pos = proj.cam_pos;
    rec.mean = proj.mean;
    rec.cov = proj.cov;
    rec.conic = proj.cov.inverse();
    rec.depth = proj.cam_pos.z();
    rec.opacity = g.world.opacity;
    rec.view_dist = (g.world.position - cam_center).norm();
    rec.view_dir = (g.world.position - cam_center) / rec.view_dist;
    rec.color = evaluate_sh(g.sh, rec.view_dir);
    radius[i] = proj.radius;
  }

  // Tile binning, then a global front-to-back order per tile.
  for (int i = 0; i < n; ++i) {
    if (!ctx.records[i].valid) continue;
    const auto& rec = ctx.records[i];
    const int x0 = std::clamp(static_cast<int>((rec.mean.x() - radius[i]) / tile), 0,
                              ctx.tiles_x - 1);
    const int x1 = std::clamp(static_cast<int>((rec.mean.x() + radius[i]) / tile), 0,
                              ctx.tiles_x - 1);
    const int y0 = std::clamp(static_cast<int>((rec.mean.y() - radius[i]) / tile), 0,
                              ctx.tiles_y - 1);
    const int y1 = std::clamp(static_cast<int>((rec.mean.y() + radius[i]) / tile), 0,
                              ctx.tiles_y - 1);
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        ctx.tile_lists[static_cast<size_t>(ty) * ctx.tiles_x + tx].push_back(i);
  }
  for (auto& list : ctx.tile_lists) {
    std::sort(list.begin(), list.end(), [&](int a, int b) {
      return ctx.records[a].depth != ctx.records[b].depth
                 ? ctx.records[a].depth < ctx.records[b].depth
                 : a < b;
    });
  }

  ctx.image.rgb = ImageF(cam.width, cam.height, 3);
  ctx.image.alpha = ImageF(cam.width, cam.height, 1);
  const int num_tiles = ctx.tiles_x * ctx.tiles_y;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int t = 0; t < num_tiles; ++t) {
    const int tx = t % ctx.tiles_x, ty = t / ctx.tiles_x;
    const auto& list = ctx.tile_lists[t];
    const int px0 = tx * tile, px1 = std::min(px0 + tile, cam.width);
    const int py0 = ty * tile, py1 = std::min(py0 + tile, cam.height);
    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        const Eigen::Vector2d p(px + 0.5, py + 0.5);
        double T = 1.0;
        Vec3 c = Vec3::Zero();
        for (int idx : list) {
          const auto& rec = ctx.records[idx];
          const Eigen::Vector2d d = p - rec.mean;
          const double power = -0.5 * d.dot(rec.conic * d);
          if (power > 0.0) continue;
          const double alpha = std::min(options.alpha_clamp, rec.opacity * std::exp(power));
          if (alpha < options.min_alpha) continue;
          c += rec.color * (alpha * T);
          T *= 1.0 - alpha;
          if (T < options.transmittance_floor) break;
        }
        c += T * options.background;
        for (int k = 0; k < 3; ++k) ctx.image.rgb.at(px, py, k) = c[k];
        ctx.image.alpha.at(px, py, 0) = 1.0 - T;
      }
    }
  }
  return ctx;
}

RenderedImage rasterize(const std::vector<AttachedGaussian>& gaussians, const Camera& cam,
                        const Vec3& background) {
  SplatScene scene;
  scene.gaussians = &gaussians;
  RenderOptions options;
  options.background = background;
  return render_forward(scene, cam, options).image;
}

namespace {

// Per-gaussian accumulators from the pixel loop.
struct PixelGrads {
  Eigen::Vector2d d_mean = Eigen::Vector2d::Zero();
  Mat2 d_conic = Mat2::Zero();
  double d_opacity = 0.0;
  Vec3 d_color = Vec3::Zero();
  bool touched = false;
};

}  // namespace

GradientBuffers rasterize_backward(const RenderContext& ctx, const ImageF& dL_drgb,
                                   const ImageF* dL_dalpha) {
  const auto& cam = ctx.camera;
  if (dL_drgb.width != cam.width || dL_drgb.height != cam.height || dL_drgb.channels != 3)
    throw ShapeMismatch("dL/d(rgb) does not match the rendered image");
  if (dL_dalpha && (dL_dalpha->width != cam.width || dL_dalpha->height != cam.height))
    throw ShapeMismatch("dL/d(alpha) does not match the rendered image");

  const auto& gaussians = *ctx.scene.gaussians;
  const int n = static_cast<int>(gaussians.size());
  const auto& opt = ctx.options;

  GradientBuffers out;
  out.world_position.assign(n, Vec3::Zero());
  if (ctx.scene.texture) out.texels.assign(n, TexelGrads{});
  if (ctx.scene.mesh) out.vertices.assign(ctx.scene.mesh->vertices.size(), Vec3::Zero());

  // Stage 1: pixel-space gradients, accumulated per tile and reduced in a
  // fixed tile order so results do not depend on thread count.
  const int num_tiles = ctx.tiles_x * ctx.tiles_y;
  std::vector<std::vector<PixelGrads>> tile_grads(num_tiles);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int t = 0; t < num_tiles; ++t) {
    const auto& list = ctx.tile_lists[t];
    if (list.empty()) continue;
    auto& grads = tile_grads[t];
    grads.assign(list.size(), PixelGrads{});
    const int tile = opt.tile_size;
    const int tx = t % ctx.tiles_x, ty = t / ctx.tiles_x;
    const int px0 = tx * tile, px1 = std::min(px0 + tile, cam.width);
    const int py0 = ty * tile, py1 = std::min(py0 + tile, cam.height);

    std::vector<double> alphas(list.size());
    std::vector<double> ts(list.size());
    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        const Eigen::Vector2d p(px + 0.5, py + 0.5);
        const Vec3 w(dL_drgb.at(px, py, 0), dL_drgb.at(px, py, 1), dL_drgb.at(px, py, 2));
        const double wa = dL_dalpha ? dL_dalpha->at(px, py, 0) : 0.0;
        if (w.isZero(0.0) && wa == 0.0) continue;

        // Replay the forward blend to recover per-entry alpha/transmittance.
        double T = 1.0;
        Vec3 color_sum = Vec3::Zero();
        size_t count = 0;
        for (size_t li = 0; li < list.size(); ++li) {
          const auto& rec = ctx.records[list[li]];
          const Eigen::Vector2d d = p - rec.mean;
          const double power = -0.5 * d.dot(rec.conic * d);
          double alpha = 0.0;
          if (power <= 0.0) {
            alpha = std::min(opt.alpha_clamp, rec.opacity * std::exp(power));
            if (alpha < opt.min_alpha) alpha = 0.0;
          }
          alphas[li] = alpha;
          ts[li] = T;
          color_sum += ctx.records[list[li]].color * (alpha * T);
          T *= 1.0 - alpha;
          count = li + 1;
          if (T < opt.transmittance_floor) break;
        }
        const double t_end = T;
        // rem walks the suffix sum S_i = contributions after i + bg term.
        Vec3 rem = color_sum + t_end * opt.background;
        for (size_t li = 0; li < count; ++li) {
          const double alpha = alphas[li];
          if (alpha <= 0.0) continue;
          const auto& rec = ctx.records[list[li]];
          const double Ti = ts[li];
          const Vec3 contrib = rec.color * (alpha * Ti);
          rem -= contrib;
          auto& g = grads[li];
          g.touched = true;
          g.d_color += w * (alpha * Ti);
          double d_alpha = w.dot(rec.color * Ti - rem / (1.0 - alpha));
          d_alpha += wa * t_end / (1.0 - alpha);
          if (alpha < opt.alpha_clamp) {  // clamped alphas block the chain
            const Eigen::Vector2d d = p - rec.mean;
            const double power = -0.5 * d.dot(rec.conic * d);
            const double ea = rec.opacity * std::exp(power);
            g.d_opacity += d_alpha * std::exp(power);
            const double d_power = d_alpha * ea;
            g.d_mean += d_power * (rec.conic * d);
            g.d_conic += d_power * (-0.5) * (d * d.transpose());
          }
        }
      }
    }
  }

  std::vector<PixelGrads> acc(n);
  for (int t = 0; t < num_tiles; ++t) {
    const auto& list = ctx.tile_lists[t];
    for (size_t li = 0; li < tile_grads[t].size(); ++li) {
      const auto& g = tile_grads[t][li];
      if (!g.touched) continue;
      auto& a = acc[list[li]];
      a.touched = true;
      a.d_mean += g.d_mean;
      a.d_conic += g.d_conic;
      a.d_opacity += g.d_opacity;
      a.d_color += g.d_color;
    }
  }

  // Stage 2: per-gaussian chain to world parameters, stored texel channels,
  // and mesh vertices.
  const Vec3 cam_center = cam.center();
  for (int i = 0; i < n; ++i) {
    const auto& rec = ctx.records[i];
    if (!rec.valid || !acc[i].touched) continue;
    const auto& g = gaussians[i];
    const auto& a = acc[i];

    Vec3 d_pos = Vec3::Zero();

    // color -> SH coefficients and view direction.
    ShCoeffs d_sh;
    Vec3 d_dir;
    evaluate_sh_backward(g.sh, rec.view_dir, a.d_color, d_sh, d_dir);
    d_pos += (d_dir - rec.view_dir * rec.view_dir.dot(d_dir)) / rec.view_dist;

    // conic -> 2D covariance.
    const Mat2 d_cov = -rec.conic.transpose() * a.d_conic * rec.conic.transpose();

    // cov = J sigma_cam J^T + lp I.
    const auto J = projection_jacobian(cam, rec.cam_pos);
    const Mat3 A = cam.R * rec.rot_world * g.world.scale.asDiagonal();
    const Mat3 sigma_cam = A * A.transpose();
    const Mat3 d_sigma_cam = J.transpose() * d_cov * J;
    const Eigen::Matrix<double, 2, 3> d_J =
        d_cov * J * sigma_cam.transpose() + d_cov.transpose() * J * sigma_cam;

    // J and the projected mean both depend on the camera-space position.
    Vec3 d_t = Vec3::Zero();
    const double x = rec.cam_pos.x(), y = rec.cam_pos.y(), z = rec.cam_pos.z();
    const double iz = 1.0 / z, iz2 = iz * iz, iz3 = iz2 * iz;
    d_t.x() += -cam.fx * iz2 * d_J(0, 2);
    d_t.y() += -cam.fy * iz2 * d_J(1, 2);
    d_t.z() += -cam.fx * iz2 * d_J(0, 0) - cam.fy * iz2 * d_J(1, 1) +
               2.0 * cam.fx * x * iz3 * d_J(0, 2) + 2.0 * cam.fy * y * iz3 * d_J(1, 2);
    d_t.x() += cam.fx * iz * a.d_mean.x();
    d_t.y() += cam.fy * iz * a.d_mean.y();
    d_t.z() += -cam.fx * x * iz2 * a.d_mean.x() - cam.fy * y * iz2 * a.d_mean.y();
    d_pos += cam.R.transpose() * d_t;

    // sigma_cam = A A^T with A = (W R_w) S.
    const Mat3 d_A = (d_sigma_cam + d_sigma_cam.transpose()) * A;
    const Mat3 WR = cam.R * rec.rot_world;
    const Mat3 d_WR = d_A * g.world.scale.asDiagonal();
    const Mat3 d_rot_world = cam.R.transpose() * d_WR;
    Vec3 d_scale_world;
    for (int k = 0; k < 3; ++k) d_scale_world[k] = WR.col(k).dot(d_A.col(k));

    out.world_position[i] += d_pos;

    if (!ctx.scene.texture) continue;
    const auto& texel = ctx.scene.texture->at(g.texel_x, g.texel_y);
    auto& tg = out.texels[i];
    tg.sh += d_sh;
    const double o = rec.opacity;
    tg.opacity_logit += a.d_opacity * o * (1.0 - o);

    const Vec3 s_local = texel.scale();
    const double k_face = g.frame.scale;
    tg.log_scale += d_scale_world.cwiseProduct(g.world.scale);  // d/d(log s) = s_world
    double d_k = d_scale_world.dot(s_local);

    // rot_world = R_frame R_local(q).
    const Mat3 R_local = quat_to_matrix(texel.unit_rotation());
    const Mat3 d_R_frame_rot = d_rot_world * R_local.transpose();
    const Mat3 d_R_local = g.frame.rotation.transpose() * d_rot_world;
    const Quat q_hat = texel.unit_rotation();
    const Quat d_qhat = quat_rotation_backward(q_hat, d_R_local);
    const double q_norm = texel.rotation.norm();
    if (q_norm > 1e-12)
      tg.rotation += (d_qhat - q_hat * q_hat.dot(d_qhat)) / q_norm;

    // position = k R_frame mu + tau.
    const Vec3 R_mu = g.frame.rotation * texel.offset;
    d_k += R_mu.dot(d_pos);
    const Mat3 d_R_frame = d_R_frame_rot + d_pos * (k_face * texel.offset).transpose();
    tg.offset += k_face * (g.frame.rotation.transpose() * d_pos);

    if (ctx.scene.mesh)
      accumulate_frame_gradients(*ctx.scene.mesh, g.surface, d_R_frame, d_k, d_pos,
                                 out.vertices);
  }
  return out;
}

std::vector<uint8_t> visibility_mask(const std::vector<AttachedGaussian>& gaussians,
                                     const TriangleMesh& mesh, const OccluderSet& occluders,
                                     const Camera& cam, double delta) {
  const Vec3 origin = cam.center();
  std::vector<uint8_t> visible(gaussians.size(), 1);
  for (size_t i = 0; i < gaussians.size(); ++i) {
    const Vec3 target = surface_point_position(mesh, gaussians[i].surface);
    const Vec3 diff = target - origin;
    const double dist = diff.norm();
    if (dist < 1e-12) continue;
    const Vec3 dir = diff / dist;
    for (size_t o = 0; o < occluders.bvhs.size(); ++o) {
      const int skip = (static_cast<int>(o) == occluders.host_index)
                           ? gaussians[i].surface.face
                           : -1;
      if (occluders.bvhs[o]->ray_occluded(origin, dir, 1e-9, dist - delta, skip)) {
        visible[i] = 0;
        break;
      }
    }
  }
  return visible;
}

}  // namespace ggf
