#include "ggf/registration.hpp"

#include <algorithm>
#include <cmath>

#include "ggf/adam.hpp"
#include "ggf/loss.hpp"
#include "ggf/render.hpp"
#include "ggf/rng.hpp"

namespace ggf {

namespace {

std::vector<int> camera_subset(size_t n_cameras, int k, Rng& rng) {
  std::vector<int> all(n_cameras);
  for (size_t i = 0; i < n_cameras; ++i) all[i] = static_cast<int>(i);
  if (k <= 0 || k >= static_cast<int>(n_cameras)) return all;
  // Seeded partial Fisher-Yates.
  for (int i = 0; i < k; ++i) {
    const int j = i + rng.uniform_int(0, static_cast<int>(n_cameras) - 1 - i);
    std::swap(all[i], all[j]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

struct RenderPass {
  double rgb_loss_value = 0.0;
  std::vector<Vec3> vertex_grads;
  std::vector<TexelGrads> texel_grads;  // empty unless requested
  int gaussian_count = 0;
};

// Renders the scene into every selected camera, computes the photometric
// loss against the observation and accumulates gradients (mean over
// cameras). Deterministic: cameras are processed in index order.
RenderPass photometric_pass(const std::vector<AttachedGaussian>& gaussians,
                            const TriangleMesh& mesh, const GaussianTexture& texture,
                            const FrameObservation& obs, const std::vector<int>& cams,
                            double lambda_rgb, const Vec3& background,
                            bool visibility_culling, bool want_texel_grads) {
  RenderPass pass;
  pass.vertex_grads.assign(mesh.vertices.size(), Vec3::Zero());
  pass.gaussian_count = static_cast<int>(gaussians.size());
  if (want_texel_grads) pass.texel_grads.assign(gaussians.size(), TexelGrads{});

  TriangleBvh self_bvh;
  TriangleBvh body_bvh;
  OccluderSet occluders;
  if (visibility_culling) {
    self_bvh = TriangleBvh(mesh);
    occluders.bvhs.push_back(&self_bvh);
    occluders.host_index = 0;
    if (obs.has_body()) {
      body_bvh = TriangleBvh(obs.body);
      occluders.bvhs.push_back(&body_bvh);
    }
  }

  SplatScene scene;
  scene.gaussians = &gaussians;
  scene.mesh = &mesh;
  scene.texture = &texture;
  RenderOptions options;
  options.background = background;

  for (int c : cams) {
    std::vector<uint8_t> vis;
    if (visibility_culling) {
      vis = visibility_mask(gaussians, mesh, occluders, obs.cameras[c]);
      scene.visibility = &vis;
    } else {
      scene.visibility = nullptr;
    }
    const RenderContext ctx = render_forward(scene, obs.cameras[c], options);
    const ImageF* mask = obs.masks.empty() ? nullptr : &obs.masks[c];
    const LossResult loss = rgb_loss(ctx.image.rgb, obs.images[c], mask, lambda_rgb);
    pass.rgb_loss_value += loss.value;
    const GradientBuffers grads = rasterize_backward(ctx, loss.d_render);
    for (size_t i = 0; i < grads.vertices.size(); ++i)
      pass.vertex_grads[i] += grads.vertices[i];
    if (want_texel_grads) {
      for (size_t i = 0; i < grads.texels.size(); ++i) {
        auto& acc = pass.texel_grads[i];
        const auto& g = grads.texels[i];
        acc.sh += g.sh;
        acc.opacity_logit += g.opacity_logit;
        acc.log_scale += g.log_scale;
        acc.rotation += g.rotation;
        acc.offset += g.offset;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(cams.size());
  pass.rgb_loss_value *= inv;
  for (auto& g : pass.vertex_grads) g *= inv;
  for (auto& g : pass.texel_grads) {
    g.sh *= inv;
    g.opacity_logit *= inv;
    g.log_scale *= inv;
    g.rotation *= inv;
    g.offset *= inv;
  }
  return pass;
}

}  // namespace

void RegistrationConfig::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda_rgb < 0 || lambda_rgb > 1)
    throw Error("registration weights must be non-negative");
  if (schedule_fraction <= 0.0 || schedule_fraction >= 1.0)
    throw Error("schedule_fraction must lie in (0, 1)");
  if (iterations_per_frame < 0) throw Error("iterations_per_frame must be >= 0");
}

void FrameObservation::validate() const {
  if (cameras.empty() || images.size() != cameras.size())
    throw EmptyObservation("observation needs matching image and camera counts");
  if (!masks.empty() && masks.size() != cameras.size())
    throw EmptyObservation("mask count does not match cameras");
}

GaussianTexture init_appearance(const FrameObservation& template_obs,
                                const TriangleMesh& mesh, int tex_width, int tex_height,
                                AppearanceConfig& cfg, const GaussianTexture* initial) {
  if (template_obs.cameras.empty())
    throw EmptyObservation("appearance initialization needs at least one camera");
  template_obs.validate();

  GaussianTexture texture =
      initial ? *initial : make_texture_for_mesh(mesh, tex_width, tex_height);
  if (cfg.iterations <= 0) return texture;

  std::vector<AttachedGaussian> gaussians = spawn_gaussians(texture, mesh);
  const int n = static_cast<int>(gaussians.size());

  constexpr int kPerTexel = kTexelChannels;
  std::vector<double> params(static_cast<size_t>(n) * kPerTexel);
  auto pack = [&]() {
    for (int i = 0; i < n; ++i) {
      const auto& t = texture.at(gaussians[i].texel_x, gaussians[i].texel_y);
      double* p = params.data() + static_cast<size_t>(i) * kPerTexel;
      int k = 0;
      for (int r = 0; r < kShTerms; ++r)
        for (int c = 0; c < 3; ++c) p[k++] = t.sh(r, c);
      p[k++] = t.opacity_logit;
      for (int r = 0; r < 3; ++r) p[k++] = t.log_scale[r];
      for (int r = 0; r < 4; ++r) p[k++] = t.rotation[r];
      for (int r = 0; r < 3; ++r) p[k++] = t.offset[r];
    }
  };
  auto unpack = [&]() {
    for (int i = 0; i < n; ++i) {
      auto& t = texture.at(gaussians[i].texel_x, gaussians[i].texel_y);
      const double* p = params.data() + static_cast<size_t>(i) * kPerTexel;
      int k = 0;
      for (int r = 0; r < kShTerms; ++r)
        for (int c = 0; c < 3; ++c) t.sh(r, c) = p[k++];
      t.opacity_logit = p[k++];
      for (int r = 0; r < 3; ++r) t.log_scale[r] = p[k++];
      for (int r = 0; r < 4; ++r) t.rotation[r] = p[k++];
      for (int r = 0; r < 3; ++r) t.offset[r] = p[k++];
    }
  };
  pack();

  std::vector<int> all_cams(template_obs.cameras.size());
  for (size_t i = 0; i < all_cams.size(); ++i) all_cams[i] = static_cast<int>(i);

  AdamOptimizer adam(params.size(), cfg.learning_rate);
  std::vector<double> grad(params.size());
  double last_l1 = 0.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    unpack();
    refresh_attachments(gaussians, texture, mesh);
    RenderPass pass = photometric_pass(gaussians, mesh, texture, template_obs, all_cams,
                                       cfg.lambda_rgb, cfg.background,
                                       cfg.visibility_culling && template_obs.has_body(),
                                       /*want_texel_grads=*/true);
    const RegularizerResult reg =
        gaussian_regularizers(texture, cfg.eps_pos, cfg.eps_scale, true);

    std::fill(grad.begin(), grad.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      double* g = grad.data() + static_cast<size_t>(i) * kPerTexel;
      const auto& tg = pass.texel_grads[i];
      int k = 0;
      for (int r = 0; r < kShTerms; ++r)
        for (int c = 0; c < 3; ++c) g[k++] = tg.sh(r, c);
      g[k++] = tg.opacity_logit;
      for (int r = 0; r < 3; ++r) g[k++] = tg.log_scale[r];
      for (int r = 0; r < 4; ++r) g[k++] = tg.rotation[r];
      for (int r = 0; r < 3; ++r) g[k++] = tg.offset[r];

      const size_t tex_idx =
          texture.index(gaussians[i].texel_x, gaussians[i].texel_y);
      for (int r = 0; r < 3; ++r) {
        g[49 + r] += cfg.w_scale * reg.d_log_scale[tex_idx][r];
        g[56 + r] += cfg.w_pos * reg.d_offset[tex_idx][r];
      }
    }
    adam.step(grad, params);

    if (it + 1 == cfg.iterations) {
      unpack();
      refresh_attachments(gaussians, texture, mesh);
      // Report the final masked L1 across cameras.
      SplatScene scene;
      scene.gaussians = &gaussians;
      scene.mesh = &mesh;
      scene.texture = &texture;
      RenderOptions options;
      options.background = cfg.background;
      double l1 = 0.0;
      for (size_t c = 0; c < template_obs.cameras.size(); ++c) {
        const RenderContext ctx = render_forward(scene, template_obs.cameras[c], options);
        const ImageF* mask = template_obs.masks.empty() ? nullptr : &template_obs.masks[c];
        l1 += rgb_loss(ctx.image.rgb, template_obs.images[c], mask, 1.0, false).l1;
      }
      last_l1 = l1 / static_cast<double>(template_obs.cameras.size());
    }
  }
  cfg.final_l1 = last_l1;
  return texture;
}

std::vector<Vec3> register_frame(const std::vector<Vec3>& prev_positions,
                                 const FrameObservation& obs, const RegistrationConfig& cfg,
                                 const TriangleMesh& template_mesh,
                                 const std::vector<FaceRestState>& rest,
                                 const Topology& topology,
                                 const std::vector<VirtualEdge>& ves,
                                 const GaussianTexture& texture,
                                 const MaterialParams& material, FrameResult* result) {
  cfg.validate();
  obs.validate();
  if (prev_positions.size() != template_mesh.vertices.size())
    throw InvalidMesh("previous positions do not match the template vertex count");

  TriangleMesh mesh = template_mesh;
  mesh.rest_positions = template_mesh.rest();
  mesh.vertices = prev_positions;

  if (result) {
    result->trace.clear();
    result->trace.reserve(cfg.iterations_per_frame);
  }
  if (cfg.iterations_per_frame == 0) {
    if (result) result->positions = prev_positions;
    return prev_positions;
  }

  std::vector<AttachedGaussian> gaussians = spawn_gaussians(texture, mesh);
  const size_t nv = mesh.vertices.size();
  std::vector<double> params(nv * 3), grad(nv * 3);
  for (size_t i = 0; i < nv; ++i)
    for (int k = 0; k < 3; ++k) params[3 * i + k] = mesh.vertices[i][k];
  AdamOptimizer adam(params.size(), cfg.learning_rate);
  Rng rng(cfg.seed);

  const int boundary =
      static_cast<int>(std::ceil(cfg.schedule_fraction * cfg.iterations_per_frame));

  FrameResult local;
  FrameResult& fr = result ? *result : local;
  for (int it = 0; it < cfg.iterations_per_frame; ++it) {
    for (size_t i = 0; i < nv; ++i)
      mesh.vertices[i] = Vec3(params[3 * i], params[3 * i + 1], params[3 * i + 2]);
    refresh_attachments(gaussians, texture, mesh);

    const std::vector<int> cams =
        camera_subset(obs.cameras.size(), cfg.cameras_per_iteration, rng);
    const RenderPass pass =
        photometric_pass(gaussians, mesh, texture, obs, cams, cfg.lambda_rgb,
                         cfg.background, cfg.visibility_culling, false);

    const EnergyGrad bend = bending_energy(mesh, topology, true);
    const EnergyGrad strain = strain_energy(mesh, rest, material, true);

    const bool body_phase = !cfg.use_schedule || it >= boundary;
    EnergyGrad schedule_term;
    if (cfg.lambda3 > 0.0) {
      if (body_phase) {
        if (!obs.has_body())
          throw MissingBody("body term requested but the observation has no body mesh");
        const CollisionSet collisions = build_collision_set(mesh, obs.body);
        schedule_term = body_penetration_energy(mesh, collisions, cfg.eps_body, true);
      } else {
        schedule_term = virtual_edge_energy(mesh, ves, true);
      }
    } else {
      schedule_term.init_grad(nv);
    }

    const double phys = bend.value + strain.value;
    const double loss = cfg.lambda1 * pass.rgb_loss_value + cfg.lambda2 * phys +
                        cfg.lambda3 * schedule_term.value;
    if (!std::isfinite(loss))
      throw DivergedOptimization("registration loss is not finite", it);

    IterationTrace trace;
    trace.used_body = body_phase && cfg.lambda3 > 0.0;
    trace.loss = loss;
    trace.rgb = pass.rgb_loss_value;
    trace.phys = phys;
    trace.schedule_term = schedule_term.value;
    fr.trace.push_back(trace);

    for (size_t i = 0; i < nv; ++i) {
      const Vec3 g = cfg.lambda1 * pass.vertex_grads[i] +
                     cfg.lambda2 * (bend.grad[i] + strain.grad[i]) +
                     cfg.lambda3 * schedule_term.grad[i];
      for (int k = 0; k < 3; ++k) grad[3 * i + k] = g[k];
    }
    adam.step(grad, params);

    fr.final_loss = loss;
    fr.final_rgb = pass.rgb_loss_value;
    fr.final_bending = bend.value;
    fr.final_strain = strain.value;
    fr.final_schedule_term = schedule_term.value;
  }

  std::vector<Vec3> out(nv);
  for (size_t i = 0; i < nv; ++i)
    out[i] = Vec3(params[3 * i], params[3 * i + 1], params[3 * i + 2]);
  for (const auto& p : out)
    if (!p.allFinite())
      throw DivergedOptimization("non-finite vertex after registration",
                                 cfg.iterations_per_frame);
  fr.positions = out;
  return out;
}

RegistrationResult register_sequence(const TriangleMesh& template_mesh,
                                     const TriangleMesh* template_body,
                                     const GaussianTexture& texture,
                                     const std::vector<FrameObservation>& observations,
                                     const RegistrationConfig& cfg,
                                     const MaterialParams& material) {
  if (observations.empty()) throw EmptyObservation("no observations to register");

  TriangleMesh mesh = template_mesh;
  mesh.rest_positions = template_mesh.rest();
  const Topology topology = build_topology(mesh);
  const std::vector<FaceRestState> rest = build_rest_states(mesh, material.thickness);
  const std::vector<VirtualEdge> ves = build_virtual_edges(mesh, cfg.ve_parallel_tol);

  std::vector<Vec3> positions = template_mesh.vertices;
  if (template_body && !template_body->vertices.empty() && observations[0].has_body()) {
    const RigidTransform align = align_first_frame(
        face_centroid_samples(*template_body), face_centroid_samples(observations[0].body));
    for (auto& p : positions) p = align.apply(p);
  }

  RegistrationResult result;
  result.frames.resize(observations.size());
  for (size_t f = 0; f < observations.size(); ++f) {
    try {
      positions = register_frame(positions, observations[f], cfg, template_mesh, rest,
                                 topology, ves, texture, material, &result.frames[f]);
    } catch (const DivergedOptimization& e) {
      throw DivergedOptimization("frame " + std::to_string(f) + ": " + e.what(),
                                 e.iteration);
    } catch (const Error& e) {
      throw Error("frame " + std::to_string(f) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace ggf
