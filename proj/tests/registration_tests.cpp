#include <doctest.h>

#include "ggf/icp.hpp"
#include "ggf/metrics.hpp"
#include "ggf/registration.hpp"
#include "ggf/scene.hpp"
#include "test_helpers.hpp"

using namespace ggf;

TEST_CASE("align_first_frame (ICP)") {
  Rng rng(5);
  std::vector<Vec3> cloud;
  for (int i = 0; i < 150; ++i)
    cloud.emplace_back(rng.normal() * 0.2, rng.normal() * 0.5, rng.normal() * 0.1);

  SUBCASE("identical clouds give the identity") {
    const RigidTransform t = align_first_frame(cloud, cloud);
    CHECK((t.R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(t.t.norm() < 1e-9);
  }
  SUBCASE("recovers a 20 degree rotation plus translation") {
    const double a = 20.0 * M_PI / 180.0;
    Mat3 R;
    R << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    const Vec3 t(0.1, 0, 0);
    std::vector<Vec3> target;
    for (const auto& p : cloud) target.push_back(R * p + t);
    const RigidTransform result = align_first_frame(cloud, target);
    CHECK((result.R - R).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((result.t - t).norm() < 1e-6);
    // The result must be exactly rigid.
    CHECK((result.R.transpose() * result.R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(result.R.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("single point maps by pure translation") {
    const std::vector<Vec3> a{Vec3(0.3, 0.2, 0.1)};
    const std::vector<Vec3> b{Vec3(-0.5, 0.8, 0.4)};
    const RigidTransform t = align_first_frame(a, b);
    CHECK((t.apply(a[0]) - b[0]).norm() < 1e-12);
    CHECK((t.R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("empty cloud throws") {
    const std::vector<Vec3> empty;
    CHECK_THROWS_AS(align_first_frame(empty, cloud), EmptyPointCloud);
  }
}

namespace {

// Small planar scene for appearance tests: white target everywhere.
FrameObservation white_observation(const TriangleMesh& mesh, int cams, int size) {
  FrameObservation obs;
  Vec3 lo, hi;
  mesh.bounds(lo, hi);
  const Vec3 center = 0.5 * (lo + hi);
  for (int i = 0; i < cams; ++i) {
    const double a = 2.0 * M_PI * i / cams - M_PI / 2.0;
    const Vec3 eye = center + 0.55 * Vec3(0.35 * std::sin(a), 0.2 * std::sin(a), -std::cos(a));
    Camera cam = Camera::look_at(eye, center, Vec3(0, 1, 0), 60, 60, size, size);
    cam.near_plane = 0.05;
    obs.cameras.push_back(cam);
    obs.images.emplace_back(size, size, 3, 1.0);  // white target
  }
  return obs;
}

TriangleMesh test_patch() { return make_grid_patch(4, 4, 0.25, 0.25); }

}  // namespace

TEST_CASE("init_appearance") {
  const TriangleMesh mesh = test_patch();

  SUBCASE("zero iterations return the texture unchanged") {
    AppearanceConfig cfg;
    cfg.iterations = 0;
    const FrameObservation obs = white_observation(mesh, 2, 32);
    const GaussianTexture tex = init_appearance(obs, mesh, 12, 12, cfg);
    const GaussianTexture fresh = make_texture_for_mesh(mesh, 12, 12);
    REQUIRE(tex.data.size() == fresh.data.size());
    for (size_t i = 0; i < tex.data.size(); ++i) CHECK(tex.data[i] == fresh.data[i]);
  }

  SUBCASE("no cameras throws EmptyObservation") {
    AppearanceConfig cfg;
    FrameObservation empty;
    CHECK_THROWS_AS(static_cast<void>(init_appearance(empty, mesh, 8, 8, cfg)),
                    EmptyObservation);
  }

  SUBCASE("white target with white background drives DC color to white") {
    AppearanceConfig cfg;
    cfg.iterations = 150;
    cfg.learning_rate = 0.05;
    cfg.background = Vec3(1.0, 1.0, 1.0);
    cfg.eps_scale = 1.0;
    const FrameObservation obs = white_observation(mesh, 3, 32);
    const GaussianTexture tex = init_appearance(obs, mesh, 10, 10, cfg);
    // Decoded DC color of every valid texel close to white.
    size_t checked = 0;
    for (size_t i = 0; i < tex.data.size(); ++i) {
      if (!tex.valid[i]) continue;
      const double dc = 0.28209479177387814 * tex.data[i].sh(0, 0) + 0.5;
      CHECK(std::min(dc, 1.0) > 0.98);
      ++checked;
    }
    CHECK(checked > 0);
    CHECK(cfg.final_l1 < 0.02);
  }

  SUBCASE("texels invisible in every camera keep their defaults") {
    // One camera so close that only part of the patch is in frame.
    AppearanceConfig cfg;
    cfg.iterations = 10;
    FrameObservation obs;
    Camera cam = Camera::look_at(Vec3(0.12, 0.12, -0.02), Vec3(0.12, 0.12, 0), Vec3(0, 1, 0),
                                 120, 120, 16, 16);
    cam.near_plane = 0.005;
    obs.cameras.push_back(cam);
    obs.images.emplace_back(16, 16, 3, 1.0);
    const GaussianTexture tex = init_appearance(obs, mesh, 12, 12, cfg);
    const GaussianTexture fresh = make_texture_for_mesh(mesh, 12, 12);
    size_t untouched = 0;
    for (size_t i = 0; i < tex.data.size(); ++i)
      if (tex.valid[i] && tex.data[i] == fresh.data[i]) ++untouched;
    CHECK(untouched > 0);
  }
}

TEST_CASE("register_frame basics") {
  SceneParams params;
  params.frames = 2;
  params.cameras = 4;
  params.image_size = 48;
  params.texture_size = 48;
  const SyntheticScene scene = make_synthetic_scene(SceneKind::SkirtOnCapsule, 77, params);
  const TriangleMesh& mesh = scene.asset.mesh;
  const Topology topo = build_topology(mesh);
  const MaterialParams material = scene.sim_config.material;
  const auto rest = build_rest_states(mesh, material.thickness);
  const auto ves = build_virtual_edges(mesh, 30.0);

  FrameObservation obs;
  obs.cameras = scene.cameras;
  obs.images = scene.images[1];
  obs.masks = scene.masks[1];
  obs.body = scene.body_frames[1];

  RegistrationConfig cfg;
  cfg.lambda2 = 1e-2;
  cfg.lambda3 = 1e3;
  cfg.learning_rate = 5e-4;

  SUBCASE("zero iterations return the previous positions") {
    cfg.iterations_per_frame = 0;
    const auto out = register_frame(mesh.vertices, obs, cfg, mesh, rest, topo, ves,
                                    scene.asset.texture, material);
    CHECK(out == mesh.vertices);
  }

  SUBCASE("schedule: body term never active before the boundary, always after") {
    cfg.iterations_per_frame = 12;
    cfg.schedule_fraction = 0.5;
    FrameResult result;
    register_frame(mesh.vertices, obs, cfg, mesh, rest, topo, ves, scene.asset.texture,
                   material, &result);
    REQUIRE(result.trace.size() == 12);
    for (int it = 0; it < 12; ++it) CHECK(result.trace[it].used_body == (it >= 6));
  }

  SUBCASE("body phase without a body mesh throws MissingBody") {
    cfg.iterations_per_frame = 4;
    FrameObservation no_body = obs;
    no_body.body = TriangleMesh{};
    CHECK_THROWS_AS(static_cast<void>(register_frame(mesh.vertices, no_body, cfg, mesh, rest,
                                                     topo, ves, scene.asset.texture, material)),
                    MissingBody);
  }

  SUBCASE("lambda3 = 0 skips the schedule terms entirely") {
    cfg.iterations_per_frame = 4;
    cfg.lambda3 = 0.0;
    FrameObservation no_body = obs;
    no_body.body = TriangleMesh{};
    FrameResult result;
    register_frame(mesh.vertices, no_body, cfg, mesh, rest, topo, ves, scene.asset.texture,
                   material, &result);
    for (const auto& t : result.trace) CHECK_FALSE(t.used_body);
  }
}

TEST_CASE("register_sequence basics") {
  SceneParams params;
  params.frames = 1;
  params.cameras = 4;
  params.image_size = 48;
  params.texture_size = 48;
  const SyntheticScene scene = make_synthetic_scene(SceneKind::SkirtOnCapsule, 88, params);

  RegistrationConfig cfg;
  cfg.iterations_per_frame = 60;
  cfg.lambda2 = 1e-2;
  cfg.lambda3 = 1e3;
  cfg.learning_rate = 5e-4;

  SUBCASE("empty observation list throws") {
    const std::vector<FrameObservation> none;
    CHECK_THROWS_AS(static_cast<void>(register_sequence(scene.asset.mesh, nullptr,
                                                        scene.asset.texture, none, cfg,
                                                        scene.sim_config.material)),
                    EmptyObservation);
  }

  SUBCASE("a frame identical to the template stays at the template") {
    std::vector<FrameObservation> obs(1);
    obs[0].cameras = scene.cameras;
    obs[0].images = scene.images[0];
    obs[0].masks = scene.masks[0];
    obs[0].body = scene.body_frames[0];
    const RegistrationResult result =
        register_sequence(scene.asset.mesh, &scene.body_frames[0], scene.asset.texture, obs,
                          cfg, scene.sim_config.material);
    REQUIRE(result.frames.size() == 1);
    TriangleMesh registered = scene.asset.mesh;
    registered.set_positions(result.frames[0].positions);
    const PointCloud samples = sample_mesh_surface(registered, 3000, 5);
    const double p2m = point_to_mesh_cm(samples, scene.asset.mesh) / 100.0;  // m
    CHECK(p2m < 1e-3 * scene.asset.mesh.bbox_diagonal());

    // Fixed point: a second identical frame stays within tolerance of the first.
    std::vector<FrameObservation> two = {obs[0], obs[0]};
    const RegistrationResult result2 =
        register_sequence(scene.asset.mesh, &scene.body_frames[0], scene.asset.texture, two,
                          cfg, scene.sim_config.material);
    double drift = 0.0;
    for (size_t i = 0; i < result2.frames[0].positions.size(); ++i)
      drift += (result2.frames[1].positions[i] - result2.frames[0].positions[i]).norm();
    drift /= static_cast<double>(result2.frames[0].positions.size());
    CHECK(drift < 2e-3 * scene.asset.mesh.bbox_diagonal());
  }
}
