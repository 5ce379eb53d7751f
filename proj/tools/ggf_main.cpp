// ggf — garment Gaussian fitting toolkit CLI.
//
// Subcommands: make-scene, bake, register, render, simulate, untangle,
// resize, fit-behavior, eval. Exit codes: 0 success, 2 validation error,
// 3 divergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ggf/asset.hpp"
#include "ggf/errors.hpp"
#include "ggf/image.hpp"
#include "ggf/mesh_io.hpp"
#include "ggf/metrics.hpp"
#include "ggf/registration.hpp"
#include "ggf/render.hpp"
#include "ggf/scene.hpp"
#include "ggf/sequence_io.hpp"
#include "ggf/sim.hpp"

namespace fs = std::filesystem;
using namespace ggf;

namespace {

// Scene directory layout produced by `ggf make-scene` / save_scene().
struct SceneOnDisk {
  std::vector<Camera> cameras;
  std::vector<FrameObservation> observations;
};

SceneOnDisk load_frames(const std::string& frames_dir, const std::string& cameras_path) {
  SceneOnDisk out;
  out.cameras = load_cameras(cameras_path);
  std::vector<fs::path> frame_dirs;
  for (const auto& entry : fs::directory_iterator(frames_dir))
    if (entry.is_directory()) frame_dirs.push_back(entry.path());
  std::sort(frame_dirs.begin(), frame_dirs.end());
  for (const auto& dir : frame_dirs) {
    FrameObservation obs;
    obs.cameras = out.cameras;
    for (size_t c = 0; c < out.cameras.size(); ++c) {
      char name[32];
      std::snprintf(name, sizeof(name), "cam_%02zu.pfm", c);
      obs.images.push_back(load_pfm((dir / name).string()));
      std::snprintf(name, sizeof(name), "mask_%02zu.png", c);
      if (fs::exists(dir / name)) obs.masks.push_back(load_png((dir / name).string()));
    }
    if (fs::exists(dir / "body.ply")) obs.body = load_ply((dir / "body.ply").string());
    out.observations.push_back(std::move(obs));
  }
  return out;
}

void add_registration_options(CLI::App* cmd, RegistrationConfig& cfg) {
  cmd->add_option("--lambda-rgb", cfg.lambda_rgb, "L1 vs SSIM balance");
  cmd->add_option("--lambda1", cfg.lambda1, "RGB term weight");
  cmd->add_option("--lambda2", cfg.lambda2, "physics term weight");
  cmd->add_option("--lambda3", cfg.lambda3, "VE/body term weight");
  cmd->add_option("--iterations", cfg.iterations_per_frame, "iterations per frame");
  cmd->add_option("--schedule-fraction", cfg.schedule_fraction, "VE->body switch point");
  cmd->add_option("--learning-rate", cfg.learning_rate, "optimizer step size (m)");
  cmd->add_option("--eps-body", cfg.eps_body, "body safety margin (m)");
  cmd->add_option("--ve-parallel-tol", cfg.ve_parallel_tol, "virtual edge tolerance (deg)");
  cmd->add_option("--cameras-per-iteration", cfg.cameras_per_iteration,
                  "camera subset size (0 = all)");
  cmd->add_option("--seed", cfg.seed, "camera subset seed");
  cmd->add_flag("!--no-schedule", cfg.use_schedule, "disable the VE->body schedule");
  cmd->add_flag("!--no-visibility", cfg.visibility_culling, "disable visibility culling");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"garment Gaussian fitting toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file");

  // make-scene
  auto* make_scene = app.add_subcommand("make-scene", "generate a synthetic scene");
  std::string scene_kind = "skirt_on_capsule", scene_out = "scene";
  uint64_t scene_seed = 7;
  SceneParams scene_params;
  make_scene->add_option("--kind", scene_kind, "patch_drop | skirt_on_capsule | two_cylinders");
  make_scene->add_option("--out", scene_out, "output directory")->required();
  make_scene->add_option("--seed", scene_seed, "scene seed");
  make_scene->add_option("--frames", scene_params.frames, "frame count");
  make_scene->add_option("--image-size", scene_params.image_size, "render resolution");
  make_scene->add_option("--texture-size", scene_params.texture_size, "texture resolution");
  make_scene->add_option("--motion-scale", scene_params.motion_scale, "body sway scale");

  // bake (appearance initialization)
  auto* bake = app.add_subcommand("bake", "fit the Gaussian texture to a template frame");
  std::string bake_asset, bake_frames, bake_cameras, bake_out;
  AppearanceConfig bake_cfg;
  bake->add_option("--asset", bake_asset, "asset directory")->required();
  bake->add_option("--frames", bake_frames, "frames directory")->required();
  bake->add_option("--cameras", bake_cameras, "cameras.json")->required();
  bake->add_option("--out", bake_out, "output asset directory")->required();
  bake->add_option("--iterations", bake_cfg.iterations, "optimizer iterations");
  bake->add_option("--learning-rate", bake_cfg.learning_rate, "optimizer step size");

  // register
  auto* reg = app.add_subcommand("register", "track a garment over a frame sequence");
  std::string reg_asset, reg_frames, reg_cameras, reg_out;
  RegistrationConfig reg_cfg;
  reg->add_option("--asset", reg_asset, "asset directory")->required();
  reg->add_option("--frames", reg_frames, "frames directory")->required();
  reg->add_option("--cameras", reg_cameras, "cameras.json")->required();
  reg->add_option("--out", reg_out, "tracked positions output")->required();
  add_registration_options(reg, reg_cfg);

  // render
  auto* render_cmd = app.add_subcommand("render", "render an asset from one camera");
  std::string render_asset, render_cameras, render_out = "render.png";
  int render_view = 0;
  render_cmd->add_option("--asset", render_asset, "asset directory")->required();
  render_cmd->add_option("--cameras", render_cameras, "cameras.json")->required();
  render_cmd->add_option("--view", render_view, "camera index");
  render_cmd->add_option("--out", render_out, "output image (.png or .pfm)");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "run the cloth stepper over a body motion");
  std::string sim_asset, sim_body_motion, sim_out;
  int sim_frames = 30;
  sim_cmd->add_option("--asset", sim_asset, "asset directory")->required();
  sim_cmd->add_option("--body-motion", sim_body_motion, "directory of body_XXXX.ply frames");
  sim_cmd->add_option("--frames", sim_frames, "frame count");
  sim_cmd->add_option("--out", sim_out, "output sequence")->required();

  // untangle
  auto* unt = app.add_subcommand("untangle", "order garment layers");
  std::vector<std::string> unt_assets;
  std::string unt_body, unt_out = "untangled";
  int unt_epochs = 2;
  unt->add_option("--assets", unt_assets, "asset directories, innermost first")->required();
  unt->add_option("--body", unt_body, "body mesh (.ply)");
  unt->add_option("--epochs", unt_epochs, "untangle epochs");
  unt->add_option("--out", unt_out, "output directory");

  // resize
  auto* rsz = app.add_subcommand("resize", "rescale the rest geometry");
  std::string rsz_asset, rsz_field, rsz_out;
  double rsz_uniform = 0.0;
  rsz->add_option("--asset", rsz_asset, "asset directory")->required();
  rsz->add_option("--scale-field", rsz_field, "JSON list of per-vertex scales");
  rsz->add_option("--uniform", rsz_uniform, "uniform scale factor");
  rsz->add_option("--out", rsz_out, "output asset directory")->required();

  // fit-behavior
  auto* fit = app.add_subcommand("fit-behavior", "fit material/rest to a tracked sequence");
  std::string fit_asset, fit_tracked, fit_body_motion, fit_out;
  fit->add_option("--asset", fit_asset, "asset directory")->required();
  fit->add_option("--tracked", fit_tracked, "tracked positions")->required();
  fit->add_option("--body-motion", fit_body_motion, "directory of body_XXXX.ply frames");
  fit->add_option("--out", fit_out, "output asset directory")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "geometry/image metrics");
  std::string eval_pred, eval_gt;
  double eval_threshold_cm = 1.0;
  eval_cmd->add_option("--pred", eval_pred, "predicted mesh or image")->required();
  eval_cmd->add_option("--gt", eval_gt, "ground-truth mesh or image")->required();
  eval_cmd->add_option("--threshold-cm", eval_threshold_cm, "F-score threshold (cm)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*make_scene) {
      const SyntheticScene scene =
          make_synthetic_scene(scene_kind_from_string(scene_kind), scene_seed, scene_params);
      save_scene(scene, scene_out);
      std::cout << "scene written to " << scene_out << " (hash "
                << std::hex << scene.content_hash << std::dec << ")\n";
    } else if (*bake) {
      GarmentAsset asset = load_asset(bake_asset);
      SceneOnDisk disk = load_frames(bake_frames, bake_cameras);
      if (disk.observations.empty()) throw EmptyObservation("no frames found");
      asset.texture = init_appearance(disk.observations[0], asset.mesh, asset.texture.width,
                                      asset.texture.height, bake_cfg, &asset.texture);
      save_asset(asset, bake_out);
      std::cout << "baked texture, final masked L1 " << bake_cfg.final_l1 << "\n";
    } else if (*reg) {
      const GarmentAsset asset = load_asset(reg_asset);
      SceneOnDisk disk = load_frames(reg_frames, reg_cameras);
      MaterialParams material;
      material.thickness = asset.rest.face_rest.empty() ? 5e-4
                                                        : asset.rest.face_rest[0].thickness;
      const TriangleMesh* template_body =
          !disk.observations.empty() && disk.observations[0].has_body()
              ? &disk.observations[0].body
              : nullptr;
      const RegistrationResult result = register_sequence(
          asset.mesh, template_body, asset.texture, disk.observations, reg_cfg, material);
      save_position_sequence(result.position_frames(), reg_out);
      std::cout << "registered " << result.frames.size() << " frames -> " << reg_out << "\n";
    } else if (*render_cmd) {
      const GarmentAsset asset = load_asset(render_asset);
      const std::vector<Camera> cameras = load_cameras(render_cameras);
      if (render_view < 0 || render_view >= static_cast<int>(cameras.size()))
        throw Error("--view out of range");
      const auto gaussians = spawn_gaussians(asset.texture, asset.mesh);
      const RenderedImage image = rasterize(gaussians, cameras[render_view]);
      if (render_out.size() > 4 && render_out.substr(render_out.size() - 4) == ".pfm")
        save_pfm(image.rgb, render_out);
      else
        save_png(image.rgb, render_out);
      std::cout << "rendered view " << render_view << " -> " << render_out << "\n";
    } else if (*sim_cmd) {
      const GarmentAsset asset = load_asset(sim_asset);
      SimConfig cfg;
      BodyMotion motion;
      if (!sim_body_motion.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(sim_body_motion))
          if (e.path().extension() == ".ply") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) motion.frames.push_back(load_ply(f.string()));
        motion.validate();
      }
      const Topology topology = build_topology(asset.mesh);
      const ClothSystem sys =
          make_cloth_system(asset.mesh, topology, asset.rest, asset.material, cfg);
      SimState state = SimState::at_rest(asset.mesh.vertices);
      std::vector<std::vector<Vec3>> frames{state.positions};
      for (int f = 1; f < sim_frames; ++f) {
        const TriangleMesh* body =
            motion.frames.empty()
                ? nullptr
                : &motion.frames[std::min<size_t>(f, motion.frames.size() - 1)];
        state = step(state, sys, body, {}, cfg);
        frames.push_back(state.positions);
      }
      save_position_sequence(frames, sim_out);
      std::cout << "simulated " << frames.size() << " frames -> " << sim_out << "\n";
    } else if (*unt) {
      std::vector<GarmentAsset> assets;
      std::vector<Garment> garments;
      for (const auto& dir : unt_assets) {
        assets.push_back(load_asset(dir));
        Garment g;
        g.mesh = assets.back().mesh;
        g.topology = build_topology(g.mesh);
        g.rest = assets.back().rest;
        g.material = assets.back().material;
        garments.push_back(std::move(g));
      }
      TriangleMesh body;
      if (!unt_body.empty()) body = load_mesh(unt_body);
      SimConfig cfg;
      untangle_all(garments, unt_body.empty() ? nullptr : &body, cfg, unt_epochs);
      fs::create_directories(unt_out);
      for (size_t i = 0; i < garments.size(); ++i) {
        assets[i].mesh.vertices = garments[i].mesh.vertices;
        save_asset(assets[i], (fs::path(unt_out) / ("layer" + std::to_string(i))).string());
      }
      std::cout << "untangled " << garments.size() << " garments -> " << unt_out << "\n";
    } else if (*rsz) {
      GarmentAsset asset = load_asset(rsz_asset);
      std::vector<double> scales;
      if (!rsz_field.empty()) {
        std::ifstream in(rsz_field);
        if (!in) throw Error("cannot open " + rsz_field);
        nlohmann::json doc;
        in >> doc;
        scales = doc.get<std::vector<double>>();
      } else if (rsz_uniform > 0.0) {
        scales.assign(asset.mesh.vertices.size(), rsz_uniform);
      } else {
        throw InvalidScaleField("provide --scale-field or --uniform");
      }
      if (scales.size() != asset.mesh.vertices.size())
        throw InvalidScaleField("scale field length does not match vertex count");
      asset.rest = resize(asset.rest, scales, asset.mesh.faces);
      save_asset(asset, rsz_out);
      std::cout << "resized rest geometry -> " << rsz_out << "\n";
    } else if (*fit) {
      GarmentAsset asset = load_asset(fit_asset);
      const auto tracked = load_position_sequence(fit_tracked);
      BodyMotion motion;
      if (!fit_body_motion.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(fit_body_motion))
          if (e.path().extension() == ".ply") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) motion.frames.push_back(load_ply(f.string()));
      }
      const Topology topology = build_topology(asset.mesh);
      SimConfig cfg;
      const FitResult result =
          fit_behavior(tracked, motion.frames.empty() ? nullptr : &motion, asset.mesh,
                       topology, asset.material, asset.rest, cfg);
      asset.material = result.material;
      asset.rest = result.rest;
      save_asset(asset, fit_out);
      std::cout << "behavior fit: L2 " << result.initial_l2 << " -> " << result.fitted_l2
                << "\n";
    } else if (*eval_cmd) {
      const auto is_image = [](const std::string& p) {
        return p.size() > 4 &&
               (p.substr(p.size() - 4) == ".png" || p.substr(p.size() - 4) == ".pfm");
      };
      if (is_image(eval_pred)) {
        const ImageF a = is_image(eval_pred) && eval_pred.ends_with(".png")
                             ? load_png(eval_pred)
                             : load_pfm(eval_pred);
        const ImageF b = eval_gt.ends_with(".png") ? load_png(eval_gt) : load_pfm(eval_gt);
        double psnr, ssim_v;
        psnr_ssim(a, b, psnr, ssim_v);
        std::cout << "psnr_db " << psnr << "\nssim " << ssim_v << "\n";
      } else {
        const TriangleMesh pred = load_mesh(eval_pred);
        const TriangleMesh gt = load_mesh(eval_gt);
        const MetricReport report = chamfer_p2m_fscore(pred, gt, eval_threshold_cm);
        std::cout << "chamfer_cm " << report.chamfer_cm << "\np2m_cm " << report.p2m_cm
                  << "\nfscore_pct " << report.fscore_pct << "\n";
      }
    }
  } catch (const DivergedOptimization& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 3;
  } catch (const DivergedSimulation& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
