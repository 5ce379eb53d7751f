// Scratch diagnostic for the rasterizer backward pass (not a registered test).
#include <cstdio>

#include "ggf/render.hpp"
#include "ggf/rng.hpp"
#include "ggf/sh.hpp"

using namespace ggf;

namespace {

TriangleMesh uv_patch(int n = 3, double size = 0.3) {
  TriangleMesh m;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      m.vertices.emplace_back(size * (i / double(n - 1) - 0.5),
                              size * (j / double(n - 1) - 0.5), 0.0);
  auto uv = [&](int i, int j) {
    return Vec2(0.05 + 0.9 * i / (n - 1), 0.05 + 0.9 * j / (n - 1));
  };
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const int v00 = j * n + i, v10 = v00 + 1, v01 = v00 + n, v11 = v01 + 1;
      m.faces.push_back({v00, v10, v11});
      m.uvs.push_back({uv(i, j), uv(i + 1, j), uv(i + 1, j + 1)});
      m.faces.push_back({v00, v11, v01});
      m.uvs.push_back({uv(i, j), uv(i + 1, j + 1), uv(i, j + 1)});
    }
  m.rest_positions = m.vertices;
  return m;
}

double weighted_image_sum(const ImageF& rgb, const ImageF& weights) {
  double sum = 0.0;
  for (size_t i = 0; i < rgb.data.size(); ++i) sum += rgb.data[i] * weights.data[i];
  return sum;
}

}  // namespace

int main() {
  Rng rng(2025);
  TriangleMesh mesh = uv_patch();
  for (auto& v : mesh.vertices) v.z() += 0.03 * std::sin(7.0 * v.x()) + 0.01;
  GaussianTexture tex = make_texture_for_mesh(mesh, 4, 3);
  for (size_t i = 0; i < tex.data.size(); ++i) {
    if (!tex.valid[i]) continue;
    auto& t = tex.data[i];
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 3; ++c) t.sh(b, c) = rng.uniform(-0.35, 0.35) / (b + 1);
    t.opacity_logit = rng.uniform(0.2, 1.4);
    t.log_scale = Vec3::Constant(std::log(0.45)) +
                  0.2 * Vec3(rng.normal(), rng.normal(), rng.normal());
    t.rotation = Quat(1.0 + rng.uniform(), 0.3 * rng.normal(), 0.3 * rng.normal(),
                      0.3 * rng.normal());
    t.offset = 0.08 * Vec3(rng.normal(), rng.normal(), rng.normal());
  }
  auto gaussians = spawn_gaussians(tex, mesh);
  refresh_attachments(gaussians, tex, mesh);
  const Camera cam = Camera::look_at(Vec3(0, 0, -0.55), Vec3(0, 0, 0), Vec3(0, 1, 0), 60,
                                     60, 32, 32);

  SplatScene scene;
  scene.gaussians = &gaussians;
  scene.mesh = &mesh;
  scene.texture = &tex;
  RenderOptions options;
  options.background = Vec3(0.15, 0.1, 0.2);

  ImageF weights(cam.width, cam.height, 3);
  for (auto& w : weights.data) w = rng.normal();

  const RenderContext ctx = render_forward(scene, cam, options);
  const GradientBuffers grads = rasterize_backward(ctx, weights);

  auto loss_with_texture = [&](const GaussianTexture& t) {
    auto g = spawn_gaussians(t, mesh);
    refresh_attachments(g, t, mesh);
    SplatScene s;
    s.gaussians = &g;
    s.mesh = &mesh;
    s.texture = &t;
    return weighted_image_sum(render_forward(s, cam, options).image.rgb, weights);
  };

  const double step = 2e-5;
  const char* names[5] = {"sh", "opacity", "log_scale", "rotation", "offset"};
  double family_fd[5] = {0}, family_diff[5] = {0};
  for (size_t gi = 0; gi < gaussians.size(); ++gi) {
    const int tx = gaussians[gi].texel_x, ty = gaussians[gi].texel_y;
    GaussianTexture work = tex;
    auto probe = [&](int family, double& field, double analytic) {
      const double saved = field;
      field = saved + step;
      const double plus = loss_with_texture(work);
      field = saved - step;
      const double minus = loss_with_texture(work);
      field = saved;
      const double fd = (plus - minus) / (2 * step);
      family_fd[family] = std::max(family_fd[family], std::abs(fd));
      family_diff[family] = std::max(family_diff[family], std::abs(fd - analytic));
    };
    GaussianTexel& t = work.at(tx, ty);
    const TexelGrads& tg = grads.texels[gi];
    for (int b = 0; b < kShTerms; ++b)
      for (int c = 0; c < 3; ++c) probe(0, t.sh(b, c), tg.sh(b, c));
    probe(1, t.opacity_logit, tg.opacity_logit);
    for (int k = 0; k < 3; ++k) probe(2, t.log_scale[k], tg.log_scale[k]);
    for (int k = 0; k < 4; ++k) probe(3, t.rotation[k], tg.rotation[k]);
    for (int k = 0; k < 3; ++k) probe(4, t.offset[k], tg.offset[k]);
  }
  for (int f = 0; f < 5; ++f)
    std::printf("%-10s max_fd %.6e  max_diff %.6e  rel %.3e\n", names[f], family_fd[f],
                family_diff[f], family_diff[f] / std::max(family_fd[f], 1e-30));
  return 0;
}
