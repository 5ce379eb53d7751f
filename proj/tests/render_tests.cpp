#include <doctest.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ggf/render.hpp"
#include "ggf/sh.hpp"
#include "test_helpers.hpp"

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

Camera test_camera(int size = 32, double distance = 0.6) {
  return Camera::look_at(Vec3(0, 0, -distance), Vec3(0, 0, 0), Vec3(0, 1, 0), 60.0, 60.0,
                         size, size);
}

// Perturbs texels towards a photometrically interesting, cutoff-safe state.
void randomize_scene_texture(GaussianTexture& tex, Rng& rng) {
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
}

double weighted_image_sum(const ImageF& rgb, const ImageF& weights) {
  double sum = 0.0;
  for (size_t i = 0; i < rgb.data.size(); ++i) sum += rgb.data[i] * weights.data[i];
  return sum;
}

}  // namespace

TEST_CASE("spherical harmonics evaluation") {
  SUBCASE("all zero coefficients decode to mid gray") {
    const Vec3 rgb = evaluate_sh(ShCoeffs::Zero(), Vec3(0, 0, 1));
    CHECK((rgb - Vec3(0.5, 0.5, 0.5)).norm() < 1e-15);
  }
  SUBCASE("DC-only is constant over directions") {
    ShCoeffs coeffs = ShCoeffs::Zero();
    coeffs.row(0) = Eigen::RowVector3d(0.9, -0.4, 0.2);
    Rng rng(8);
    const Vec3 expected = (0.28209479177387814 * coeffs.row(0).transpose() +
                           Vec3::Constant(0.5)).cwiseMax(0.0).cwiseMin(1.0);
    for (int i = 0; i < 25; ++i) {
      Vec3 dir(rng.normal(), rng.normal(), rng.normal());
      dir.normalize();
      CHECK((evaluate_sh(coeffs, dir) - expected).norm() < 1e-12);
    }
  }
  SUBCASE("degree-1 terms flip under direction negation") {
    Rng rng(9);
    ShCoeffs coeffs = ShCoeffs::Zero();
    for (int b = 1; b < 4; ++b)
      for (int c = 0; c < 3; ++c) coeffs(b, c) = 0.2 * rng.normal();
    Vec3 dir(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    const Vec3 a = evaluate_sh(coeffs, dir);
    const Vec3 b = evaluate_sh(coeffs, -dir);
    // (a - 0.5) = -(b - 0.5) for pure odd-parity coefficients.
    CHECK((a - Vec3::Constant(0.5) + (b - Vec3::Constant(0.5))).norm() < 1e-12);
  }
}

TEST_CASE("project_gaussian") {
  Camera cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = cam.cy = 16.0;
  cam.width = cam.height = 32;
  cam.near_plane = 0.01;

  SUBCASE("on-axis isotropic gaussian") {
    WorldGaussian g;
    g.position = Vec3(0, 0, 0.5);
    g.scale = Vec3::Constant(0.01);
    const ProjectedGaussian p = project_gaussian(g, cam, /*low_pass=*/0.0);
    CHECK_FALSE(p.culled);
    CHECK(p.mean.x() == doctest::Approx(16.0));
    CHECK(p.mean.y() == doctest::Approx(16.0));
    const double expected = std::pow(100.0 * 0.01 / 0.5, 2);
    CHECK(p.cov(0, 0) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(p.cov(1, 1) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::abs(p.cov(0, 1)) < 1e-12);
    CHECK(p.depth == doctest::Approx(0.5));
  }
  SUBCASE("behind the camera is culled") {
    WorldGaussian g;
    g.position = Vec3(0, 0, -0.5);
    CHECK(project_gaussian(g, cam).culled);
  }
  SUBCASE("joint world translation leaves the projection unchanged") {
    WorldGaussian g;
    g.position = Vec3(0.05, -0.03, 0.7);
    g.scale = Vec3(0.01, 0.02, 0.005);
    Rng rng(5);
    g.rotation = Quat(1, 0.2, -0.1, 0.3).normalized();
    const ProjectedGaussian before = project_gaussian(g, cam);
    const Vec3 offset(0.4, -0.2, 0.9);
    Camera moved = cam;
    moved.t = cam.t - cam.R * offset;  // camera center shifts by offset
    WorldGaussian g2 = g;
    g2.position += offset;
    const ProjectedGaussian after = project_gaussian(g2, moved);
    CHECK((before.mean - after.mean).norm() < 1e-9);
    CHECK((before.cov - after.cov).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(before.depth == doctest::Approx(after.depth));
  }
}

TEST_CASE("rasterize basics") {
  const Camera cam = test_camera();

  SUBCASE("no gaussians render the background") {
    const std::vector<AttachedGaussian> empty;
    const RenderedImage img = rasterize(empty, cam, Vec3(0.2, 0.4, 0.6));
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        CHECK(img.rgb.at(x, y, 0) == doctest::Approx(0.2));
        CHECK(img.rgb.at(x, y, 2) == doctest::Approx(0.6));
        CHECK(img.alpha.at(x, y, 0) == 0.0);
      }
  }

  SUBCASE("opaque gaussian centered on a pixel clamps alpha at 0.99") {
    Camera centered = cam;
    centered.cx = centered.cy = 16.5;  // center of pixel (16, 16)
    AttachedGaussian g;
    g.world.position = Vec3(0, 0, 0);  // on the optical axis
    g.world.scale = Vec3::Constant(0.02);
    g.world.opacity = 1.0 - 1e-12;
    g.sh.setZero();
    g.sh.row(0) = Eigen::RowVector3d(1.2, 0.0, -1.2);  // clamps to (1, 0.5, 0)-ish
    const std::vector<AttachedGaussian> gaussians{g};
    const RenderedImage img = rasterize(gaussians, centered);
    CHECK(img.alpha.at(16, 16, 0) == doctest::Approx(0.99).epsilon(1e-12));
    const Vec3 expected = evaluate_sh(g.sh, Vec3(0, 0, 1));
    // Pixel color = 0.99 * color (background is black).
    CHECK(img.rgb.at(16, 16, 0) == doctest::Approx(0.99 * expected[0]).epsilon(1e-9));
    CHECK(img.rgb.at(16, 16, 1) == doctest::Approx(0.99 * expected[1]).epsilon(1e-9));
  }

  SUBCASE("occluded far gaussian contributes at most 1%") {
    Camera centered = cam;
    centered.cx = centered.cy = 16.5;
    AttachedGaussian near_g, far_g;
    near_g.world.position = Vec3(0, 0, -0.1);
    near_g.world.scale = Vec3::Constant(0.03);
    near_g.world.opacity = 1.0 - 1e-12;
    near_g.sh.setZero();  // gray 0.5
    far_g = near_g;
    far_g.world.position = Vec3(0, 0, 0.1);
    far_g.sh.row(0) = Eigen::RowVector3d(1.8, 1.8, 1.8);  // white
    const std::vector<AttachedGaussian> both{near_g, far_g};
    const std::vector<AttachedGaussian> near_only{near_g};
    const RenderedImage img_both = rasterize(both, centered);
    const RenderedImage img_near = rasterize(near_only, centered);
    // Far white gaussian can add at most T * 0.99 * 1 = 1% on the center pixel.
    CHECK(std::abs(img_both.rgb.at(16, 16, 0) - img_near.rgb.at(16, 16, 0)) < 0.0101);
  }
}

TEST_CASE("compositing conserves transmittance against the background") {
  Rng rng(20);
  const TriangleMesh mesh = uv_patch();
  GaussianTexture tex = make_texture_for_mesh(mesh, 6, 6);
  randomize_scene_texture(tex, rng);
  const auto gaussians = spawn_gaussians(tex, mesh);
  const Camera cam = test_camera();

  SplatScene scene;
  scene.gaussians = &gaussians;
  RenderOptions opt1, opt2;
  opt1.background = Vec3(0.0, 0.25, 0.5);
  opt2.background = Vec3(1.0, 0.75, 0.5);
  const RenderContext ctx1 = render_forward(scene, cam, opt1);
  const RenderContext ctx2 = render_forward(scene, cam, opt2);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const double transmittance = 1.0 - ctx1.image.alpha.at(x, y, 0);
      for (int c = 0; c < 3; ++c) {
        const double diff = ctx2.image.rgb.at(x, y, c) - ctx1.image.rgb.at(x, y, c);
        const double expected =
            transmittance * (opt2.background[c] - opt1.background[c]);
        CHECK(std::abs(diff - expected) < 1e-6);
      }
    }
}

TEST_CASE("rendering is deterministic and thread-count independent") {
  Rng rng(21);
  const TriangleMesh mesh = uv_patch();
  GaussianTexture tex = make_texture_for_mesh(mesh, 8, 8);
  randomize_scene_texture(tex, rng);
  const auto gaussians = spawn_gaussians(tex, mesh);
  const Camera cam = test_camera(48);
  SplatScene scene;
  scene.gaussians = &gaussians;

#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
  const RenderContext a = render_forward(scene, cam, RenderOptions{});
#ifdef _OPENMP
  omp_set_num_threads(4);
#endif
  const RenderContext b = render_forward(scene, cam, RenderOptions{});
  CHECK(a.image.rgb.data == b.image.rgb.data);
  CHECK(a.image.alpha.data == b.image.alpha.data);

  // Backward determinism across thread counts.
  ImageF weights(cam.width, cam.height, 3);
  for (auto& w : weights.data) w = rng.normal();
#ifdef _OPENMP
  omp_set_num_threads(4);
#endif
  const GradientBuffers g4 = rasterize_backward(b, weights);
#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
  const GradientBuffers g1 = rasterize_backward(a, weights);
  REQUIRE(g1.world_position.size() == g4.world_position.size());
  for (size_t i = 0; i < g1.world_position.size(); ++i)
    CHECK(g1.world_position[i] == g4.world_position[i]);
}

TEST_CASE("rasterize_backward matches finite differences") {
  Rng rng(2025);
  TriangleMesh mesh = uv_patch();
  // Mild out-of-plane bend so frames are non-trivial.
  for (auto& v : mesh.vertices) v.z() += 0.03 * std::sin(7.0 * v.x()) + 0.01;
  GaussianTexture tex = make_texture_for_mesh(mesh, 4, 3);  // ~10 gaussians
  randomize_scene_texture(tex, rng);
  auto gaussians = spawn_gaussians(tex, mesh);
  refresh_attachments(gaussians, tex, mesh);
  REQUIRE(gaussians.size() >= 8);
  REQUIRE(gaussians.size() <= 12);

  const Camera cam = test_camera(32, 0.55);
  SplatScene scene;
  scene.gaussians = &gaussians;
  scene.mesh = &mesh;
  scene.texture = &tex;
  RenderOptions options;
  options.background = Vec3(0.15, 0.1, 0.2);
  // Support truncation and the blend cutoffs are step discontinuities; the
  // finite-difference oracle needs the smooth interior.
  options.radius_sigma = 12.0;
  options.min_alpha = 1e-12;
  options.transmittance_floor = 1e-12;

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
  auto loss_with_mesh = [&](const TriangleMesh& m) {
    auto g = spawn_gaussians(tex, m);
    refresh_attachments(g, tex, m);
    SplatScene s;
    s.gaussians = &g;
    s.mesh = &m;
    s.texture = &tex;
    return weighted_image_sum(render_forward(s, cam, options).image.rgb, weights);
  };

  double max_fd = 0.0, max_diff = 0.0;
  auto track = [&](double fd, double analytic) {
    max_fd = std::max(max_fd, std::abs(fd));
    max_diff = std::max(max_diff, std::abs(fd - analytic));
  };

  SUBCASE("texel parameter gradients") {
    const double step = 2e-5;
    for (size_t gi = 0; gi < gaussians.size(); ++gi) {
      const int tx = gaussians[gi].texel_x, ty = gaussians[gi].texel_y;
      auto probe = [&](double* field, double analytic) {
        GaussianTexture work = tex;
        double* wf = reinterpret_cast<double*>(
            reinterpret_cast<char*>(&work.at(tx, ty)) +
            (reinterpret_cast<char*>(field) - reinterpret_cast<char*>(&tex.at(tx, ty))));
        const double saved = *wf;
        *wf = saved + step;
        const double plus = loss_with_texture(work);
        *wf = saved - step;
        const double minus = loss_with_texture(work);
        track((plus - minus) / (2 * step), analytic);
      };
      GaussianTexel& t = const_cast<GaussianTexel&>(tex.at(tx, ty));
      const TexelGrads& tg = grads.texels[gi];
      for (int b = 0; b < kShTerms; ++b)
        for (int c = 0; c < 3; ++c) probe(&t.sh(b, c), tg.sh(b, c));
      probe(&t.opacity_logit, tg.opacity_logit);
      for (int k = 0; k < 3; ++k) probe(&t.log_scale[k], tg.log_scale[k]);
      for (int k = 0; k < 4; ++k) probe(&t.rotation[k], tg.rotation[k]);
      for (int k = 0; k < 3; ++k) probe(&t.offset[k], tg.offset[k]);
    }
    CHECK(max_diff / max_fd < 1e-3);
  }

  SUBCASE("mesh vertex gradients") {
    const double step = 1e-6 * mesh.bbox_diagonal();
    const double err =
        testing::gradient_fd_error(mesh, grads.vertices, loss_with_mesh, step);
    CHECK(err < 1e-3);
  }

  SUBCASE("zero upstream gradient gives zero buffers") {
    ImageF zeros(cam.width, cam.height, 3);
    const GradientBuffers zg = rasterize_backward(ctx, zeros);
    for (const auto& v : zg.world_position) CHECK(v.norm() == 0.0);
    for (const auto& v : zg.vertices) CHECK(v.norm() == 0.0);
  }

  SUBCASE("culled gaussians receive zero gradient") {
    auto behind = gaussians;
    // Move one gaussian's face so its gaussian lands behind the camera.
    TriangleMesh moved = mesh;
    const int face = behind[0].surface.face;
    for (int k = 0; k < 3; ++k) moved.vertices[mesh.faces[face][k]].z() -= 2.0;
    refresh_attachments(behind, tex, moved);
    SplatScene s;
    s.gaussians = &behind;
    s.mesh = &moved;
    s.texture = &tex;
    const RenderContext c2 = render_forward(s, cam, options);
    const GradientBuffers g2 = rasterize_backward(c2, weights);
    CHECK(g2.world_position[0].norm() == 0.0);
    CHECK(g2.texels[0].sh.norm() == 0.0);
  }

  SUBCASE("image shape mismatch throws") {
    ImageF bad(cam.width / 2, cam.height, 3);
    CHECK_THROWS_AS(rasterize_backward(ctx, bad), ShapeMismatch);
  }
}

TEST_CASE("visibility_mask") {
  const TriangleMesh mesh = uv_patch();
  GaussianTexture tex = make_texture_for_mesh(mesh, 6, 6);
  auto gaussians = spawn_gaussians(tex, mesh);
  const Camera cam = test_camera();

  SUBCASE("no occluders: everything visible") {
    const auto vis = visibility_mask(gaussians, mesh, OccluderSet{}, cam);
    for (auto v : vis) CHECK(v == 1);
  }

  SUBCASE("an opaque plane in front hides everything") {
    TriangleMesh wall;
    wall.vertices = {Vec3(-1, -1, -0.3), Vec3(1, -1, -0.3), Vec3(1, 1, -0.3),
                     Vec3(-1, 1, -0.3)};
    wall.faces = {{0, 1, 2}, {0, 2, 3}};
    const TriangleBvh wall_bvh(wall);
    OccluderSet occ;
    occ.bvhs.push_back(&wall_bvh);
    const auto vis = visibility_mask(gaussians, mesh, occ, cam);
    for (auto v : vis) CHECK(v == 0);
  }

  SUBCASE("two-sided sheet: front layer visible, back layer hidden") {
    // One garment made of two parallel layers 1 cm apart; camera at -z sees
    // the z=0 layer, the z=+0.01 layer is behind it.
    TriangleMesh sheet = uv_patch();
    const size_t nv = sheet.vertices.size();
    const size_t nf = sheet.faces.size();
    // Disjoint charts: front layer in [0, 0.5)^2, back layer in [0.5, 1)^2.
    for (auto& uv : sheet.uvs)
      for (auto& t : uv) t *= 0.48;
    for (size_t i = 0; i < nv; ++i) {
      Vec3 v = sheet.vertices[i];
      v.z() += 0.01;
      sheet.vertices.push_back(v);
    }
    for (size_t f = 0; f < nf; ++f) {
      auto face = sheet.faces[f];
      std::swap(face[1], face[2]);  // keep the back layer oriented away
      for (auto& idx : face) idx += static_cast<int>(nv);
      sheet.faces.push_back(face);
      auto uv = sheet.uvs[f];
      for (auto& t : uv) t += Vec2(0.5, 0.5);
      std::swap(uv[1], uv[2]);
      sheet.uvs.push_back(uv);
    }
    sheet.rest_positions = sheet.vertices;
    GaussianTexture sheet_tex = make_texture_for_mesh(sheet, 10, 10);
    auto sheet_gaussians = spawn_gaussians(sheet_tex, sheet);
    const TriangleBvh self_bvh(sheet);
    OccluderSet occ;
    occ.bvhs.push_back(&self_bvh);
    occ.host_index = 0;
    const auto vis = visibility_mask(sheet_gaussians, sheet, occ, cam);
    int front_visible = 0, back_visible = 0, front_total = 0, back_total = 0;
    for (size_t i = 0; i < sheet_gaussians.size(); ++i) {
      const bool back = sheet_gaussians[i].surface.face >= static_cast<int>(nf);
      (back ? back_total : front_total) += 1;
      if (vis[i]) (back ? back_visible : front_visible) += 1;
    }
    REQUIRE(front_total > 0);
    REQUIRE(back_total > 0);
    CHECK(front_visible == front_total);
    CHECK(back_visible == 0);
  }
}
