#include "ggf/scene.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ggf/render.hpp"
#include "ggf/rng.hpp"
#include "ggf/mesh_io.hpp"
#include "ggf/sequence_io.hpp"

namespace ggf {

namespace {

namespace fs = std::filesystem;

void append_hash(uint64_t& h, const std::vector<Vec3>& points) {
  for (const auto& p : points) {
    const float q[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                        static_cast<float>(p.z())};
    h = fnv1a(q, sizeof(q), h);
  }
}

std::vector<Camera> camera_ring(int count, double radius, double height, const Vec3& target,
                                int image_size) {
  std::vector<Camera> cams;
  const double f = 0.5 * image_size / std::tan(0.5 * 50.0 * M_PI / 180.0);
  for (int i = 0; i < count; ++i) {
    const double a = 2.0 * M_PI * i / count;
    const Vec3 eye = target + Vec3(radius * std::cos(a), height, radius * std::sin(a));
    Camera cam = Camera::look_at(eye, target, Vec3(0, 1, 0), f, f, image_size, image_size);
    cam.near_plane = 0.05;
    cams.push_back(cam);
  }
  return cams;
}

ImageF mask_from_alpha(const ImageF& alpha) {
  ImageF mask(alpha.width, alpha.height, 1);
  for (size_t i = 0; i < alpha.data.size(); ++i)
    mask.data[i] = alpha.data[i] > 0.5 ? 1.0 : 0.0;
  return mask;
}

// Renders the garment state into every camera, with body occlusion culling.
void render_frame(const TriangleMesh& garment, const GaussianTexture& texture,
                  const TriangleMesh* body, const std::vector<Camera>& cameras,
                  std::vector<ImageF>& images, std::vector<ImageF>& masks) {
  std::vector<AttachedGaussian> gaussians = spawn_gaussians(texture, garment);
  const TriangleBvh self_bvh(garment);
  TriangleBvh body_bvh;
  OccluderSet occluders;
  occluders.bvhs.push_back(&self_bvh);
  occluders.host_index = 0;
  if (body) {
    body_bvh = TriangleBvh(*body);
    occluders.bvhs.push_back(&body_bvh);
  }
  SplatScene scene;
  scene.gaussians = &gaussians;
  scene.mesh = &garment;
  scene.texture = &texture;
  for (const auto& cam : cameras) {
    const std::vector<uint8_t> vis = visibility_mask(gaussians, garment, occluders, cam);
    scene.visibility = &vis;
    const RenderContext ctx = render_forward(scene, cam, RenderOptions{});
    images.push_back(ctx.image.rgb);
    masks.push_back(mask_from_alpha(ctx.image.alpha));
  }
}

}  // namespace

SceneKind scene_kind_from_string(const std::string& name) {
  if (name == "patch_drop") return SceneKind::PatchDrop;
  if (name == "skirt_on_capsule") return SceneKind::SkirtOnCapsule;
  if (name == "two_cylinders") return SceneKind::TwoCylinders;
  throw UnknownScene("unknown scene kind: " + name);
}

TriangleMesh make_grid_patch(int nx, int ny, double size_x, double size_y) {
  TriangleMesh mesh;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      mesh.vertices.emplace_back(size_x * (static_cast<double>(i) / (nx - 1) - 0.5), 0.0,
                                 size_y * (static_cast<double>(j) / (ny - 1) - 0.5));
  const double pad = 0.02;
  auto uv = [&](int i, int j) {
    return Vec2(pad + (1.0 - 2.0 * pad) * i / (nx - 1), pad + (1.0 - 2.0 * pad) * j / (ny - 1));
  };
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      const int v00 = j * nx + i, v10 = j * nx + i + 1;
      const int v01 = (j + 1) * nx + i, v11 = (j + 1) * nx + i + 1;
      mesh.faces.push_back({v00, v10, v11});
      mesh.uvs.push_back({uv(i, j), uv(i + 1, j), uv(i + 1, j + 1)});
      mesh.faces.push_back({v00, v11, v01});
      mesh.uvs.push_back({uv(i, j), uv(i + 1, j + 1), uv(i, j + 1)});
    }
  mesh.rest_positions = mesh.vertices;
  return mesh;
}

TriangleMesh make_tube(int segments, int rings, double radius, double y_min, double y_max) {
  TriangleMesh mesh;
  for (int r = 0; r < rings; ++r) {
    const double y = y_min + (y_max - y_min) * r / (rings - 1);
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * M_PI * s / segments;
      mesh.vertices.emplace_back(radius * std::cos(a), y, radius * std::sin(a));
    }
  }
  const double pad = 0.02;
  auto uv = [&](int s, int r) {  // per-corner; s may equal segments at the seam
    return Vec2(pad + (1.0 - 2.0 * pad) * s / segments,
                pad + (1.0 - 2.0 * pad) * r / (rings - 1));
  };
  auto vid = [&](int s, int r) { return r * segments + (s % segments); };
  for (int r = 0; r + 1 < rings; ++r)
    for (int s = 0; s < segments; ++s) {
      // Outward CCW winding (normals point away from the axis).
      mesh.faces.push_back({vid(s, r), vid(s, r + 1), vid(s + 1, r)});
      mesh.uvs.push_back({uv(s, r), uv(s, r + 1), uv(s + 1, r)});
      mesh.faces.push_back({vid(s + 1, r), vid(s, r + 1), vid(s + 1, r + 1)});
      mesh.uvs.push_back({uv(s + 1, r), uv(s, r + 1), uv(s + 1, r + 1)});
    }
  mesh.rest_positions = mesh.vertices;
  return mesh;
}

TriangleMesh make_capsule(int segments, int rings, double radius, double half_height) {
  TriangleMesh mesh;
  // Ring profile (r, y) from just above the bottom pole to just below the top.
  std::vector<std::pair<double, double>> profile;
  const int cap = std::max(2, rings / 2);
  for (int i = 1; i < cap; ++i) {
    const double t = 0.5 * M_PI * i / cap;
    profile.emplace_back(radius * std::sin(t), -half_height - radius * std::cos(t));
  }
  for (int i = 0; i <= rings; ++i)
    profile.emplace_back(radius, -half_height + 2.0 * half_height * i / rings);
  for (int i = 1; i < cap; ++i) {
    const double t = 0.5 * M_PI * i / cap;
    profile.emplace_back(radius * std::cos(t), half_height + radius * std::sin(t));
  }
  const int bottom = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, -half_height - radius, 0.0);
  std::vector<int> ring_start;
  for (const auto& [r, y] : profile) {
    ring_start.push_back(static_cast<int>(mesh.vertices.size()));
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * M_PI * s / segments;
      mesh.vertices.emplace_back(r * std::cos(a), y, r * std::sin(a));
    }
  }
  const int top = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, half_height + radius, 0.0);

  auto rv = [&](size_t ring, int s) { return ring_start[ring] + (s % segments); };
  for (int s = 0; s < segments; ++s)
    mesh.faces.push_back({bottom, rv(0, s), rv(0, s + 1)});
  for (size_t r = 0; r + 1 < profile.size(); ++r)
    for (int s = 0; s < segments; ++s) {
      mesh.faces.push_back({rv(r, s), rv(r + 1, s), rv(r, s + 1)});
      mesh.faces.push_back({rv(r, s + 1), rv(r + 1, s), rv(r + 1, s + 1)});
    }
  for (int s = 0; s < segments; ++s)
    mesh.faces.push_back({top, rv(profile.size() - 1, s + 1), rv(profile.size() - 1, s)});
  mesh.rest_positions = mesh.vertices;
  return mesh;
}

void randomize_texture_colors(GaussianTexture& texture, uint64_t seed) {
  Rng rng(seed);
  for (size_t i = 0; i < texture.data.size(); ++i) {
    if (!texture.valid[i]) continue;
    auto& t = texture.data[i];
    for (int c = 0; c < 3; ++c) t.sh(0, c) = rng.uniform(-1.2, 1.2);
    for (int b = 1; b < 4; ++b)
      for (int c = 0; c < 3; ++c) t.sh(b, c) = rng.uniform(-0.15, 0.15);
    t.opacity_logit = 2.5;
  }
}

SyntheticScene make_synthetic_scene(SceneKind kind, uint64_t seed, const SceneParams& params) {
  SyntheticScene scene;
  scene.sim_config.damping = 0.97;
  scene.sim_config.material.lame_lambda = 3e3;
  scene.sim_config.material.lame_mu = 1.5e3;
  scene.sim_config.bending_stiffness = 2e-7;

  switch (kind) {
    case SceneKind::PatchDrop: {
      TriangleMesh patch = make_grid_patch(9, 9, 0.4, 0.4);
      Garment garment = make_garment(patch);
      scene.garments.push_back(garment);
      scene.cameras = camera_ring(params.cameras, 0.9, -0.2, Vec3(0, -0.15, 0),
                                  params.image_size);

      GaussianTexture texture =
          make_texture_for_mesh(patch, params.texture_size, params.texture_size);
      randomize_texture_colors(texture, seed);
      scene.asset = GarmentAsset{patch, texture, garment.rest,
                                 MaterialField::ones(patch.vertices.size())};

      ClothSystem sys = make_cloth_system(patch, garment.topology, garment.rest,
                                          scene.asset.material, scene.sim_config);
      SimState state = SimState::at_rest(patch.vertices);
      scene.gt_positions.push_back(state.positions);
      for (int f = 1; f < params.frames; ++f) {
        state = step(state, sys, nullptr, {}, scene.sim_config);
        scene.gt_positions.push_back(state.positions);
      }
      break;
    }
    case SceneKind::SkirtOnCapsule: {
      TriangleMesh skirt = make_tube(24, 9, 1.0, 0.0, 1.0);
      // Taper into a cone: waist 0.085 at the top, hem 0.13 at the bottom.
      for (auto& v : skirt.vertices) {
        const double t = v.y();  // 0 bottom, 1 top
        const double r = 0.13 + (0.085 - 0.13) * t;
        const double a = std::atan2(v.z(), v.x());
        v = Vec3(r * std::cos(a), -0.12 + 0.27 * t, r * std::sin(a));
      }
      skirt.rest_positions = skirt.vertices;
      Garment garment = make_garment(skirt);
      scene.garments.push_back(garment);
      scene.cameras = camera_ring(params.cameras, 0.75, 0.1, Vec3(0, 0, 0),
                                  params.image_size);

      GaussianTexture texture =
          make_texture_for_mesh(skirt, params.texture_size, params.texture_size);
      randomize_texture_colors(texture, seed);
      scene.asset = GarmentAsset{skirt, texture, garment.rest,
                                 MaterialField::ones(skirt.vertices.size())};

      const TriangleMesh capsule = make_capsule(16, 6, 0.07, 0.16);
      const double amplitude = 0.02 * params.motion_scale;
      for (int f = 0; f < params.frames; ++f) {
        TriangleMesh body = capsule;
        const double dx = amplitude * std::sin(2.0 * M_PI * f / 20.0);
        for (auto& v : body.vertices) v.x() += dx;
        body.rest_positions.clear();
        scene.body_frames.push_back(std::move(body));
      }

      ClothSystem sys = make_cloth_system(skirt, garment.topology, garment.rest,
                                          scene.asset.material, scene.sim_config);
      SimState state = SimState::at_rest(skirt.vertices);
      scene.gt_positions.push_back(state.positions);
      for (int f = 1; f < params.frames; ++f) {
        state = step(state, sys, &scene.body_frames[f], {}, scene.sim_config);
        scene.gt_positions.push_back(state.positions);
      }
      break;
    }
    case SceneKind::TwoCylinders: {
      const double r_inner = 0.095, r_outer = 0.13;
      TriangleMesh inner = make_tube(20, 7, r_inner, -0.13, 0.13);
      TriangleMesh outer = make_tube(20, 7, r_outer, -0.12, 0.12);
      // Swapped layering: the inner tube starts at the outer radius and vice
      // versa; rest positions keep the intended radii.
      auto scale_radial = [](TriangleMesh& m, double factor) {
        for (auto& v : m.vertices) {
          v.x() *= factor;
          v.z() *= factor;
        }
      };
      scale_radial(inner, r_outer / r_inner);
      scale_radial(outer, r_inner / r_outer);
      scene.garments.push_back(make_garment(inner));
      scene.garments.push_back(make_garment(outer));
      scene.cameras = camera_ring(params.cameras, 0.8, 0.1, Vec3(0, 0, 0),
                                  params.image_size);

      GaussianTexture texture =
          make_texture_for_mesh(inner, params.texture_size, params.texture_size);
      randomize_texture_colors(texture, seed);
      scene.asset = GarmentAsset{inner, texture, scene.garments[0].rest,
                                 MaterialField::ones(inner.vertices.size())};
      scene.body_frames.push_back(make_capsule(16, 6, 0.06, 0.15));
      scene.gt_positions.push_back(inner.vertices);
      break;
    }
  }

  if (params.render_images && kind != SceneKind::TwoCylinders) {
    TriangleMesh garment = scene.asset.mesh;
    for (size_t f = 0; f < scene.gt_positions.size(); ++f) {
      garment.vertices = scene.gt_positions[f];
      const TriangleMesh* body =
          scene.body_frames.empty() ? nullptr : &scene.body_frames[f];
      std::vector<ImageF> images, masks;
      render_frame(garment, scene.asset.texture, body, scene.cameras, images, masks);
      scene.images.push_back(std::move(images));
      scene.masks.push_back(std::move(masks));
    }
  }

  uint64_t h = 1469598103934665603ull;
  for (const auto& f : scene.gt_positions) append_hash(h, f);
  for (const auto& g : scene.garments) append_hash(h, g.mesh.vertices);
  for (const auto& t : scene.asset.texture.data) {
    const float v[4] = {static_cast<float>(t.sh(0, 0)), static_cast<float>(t.sh(0, 1)),
                        static_cast<float>(t.sh(0, 2)),
                        static_cast<float>(t.opacity_logit)};
    h = fnv1a(v, sizeof(v), h);
  }
  scene.content_hash = h;
  return scene;
}

void save_scene(const SyntheticScene& scene, const std::string& dir) {
  fs::create_directories(dir);
  save_cameras(scene.cameras, (fs::path(dir) / "cameras.json").string());
  save_asset(scene.asset, (fs::path(dir) / "asset").string());
  save_position_sequence(scene.gt_positions, (fs::path(dir) / "gt_positions.bin").string());
  for (size_t f = 0; f < scene.gt_positions.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu", f);
    const fs::path frame_dir = fs::path(dir) / "frames" / name;
    fs::create_directories(frame_dir);
    if (f < scene.body_frames.size())
      save_ply(scene.body_frames[f], (frame_dir / "body.ply").string());
    if (f < scene.images.size()) {
      for (size_t c = 0; c < scene.images[f].size(); ++c) {
        char cam_name[32];
        std::snprintf(cam_name, sizeof(cam_name), "cam_%02zu.pfm", c);
        save_pfm(scene.images[f][c], (frame_dir / cam_name).string());
        std::snprintf(cam_name, sizeof(cam_name), "mask_%02zu.png", c);
        save_png(scene.masks[f][c], (frame_dir / cam_name).string());
      }
    }
  }
  // Secondary garments (untangling scenes) are stored as extra assets.
  for (size_t g = 1; g < scene.garments.size(); ++g) {
    const GaussianTexture tex = make_texture_for_mesh(scene.garments[g].mesh, 8, 8);
    save_asset(scene.garments[g].mesh, tex, scene.garments[g].rest,
               scene.garments[g].material,
               (fs::path(dir) / ("asset_layer" + std::to_string(g))).string());
  }
}

}  // namespace ggf
