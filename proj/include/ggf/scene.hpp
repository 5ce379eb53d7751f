#pragma once

#include <string>

#include "ggf/asset.hpp"
#include "ggf/camera.hpp"
#include "ggf/image.hpp"
#include "ggf/sim.hpp"

namespace ggf {

enum class SceneKind { PatchDrop, SkirtOnCapsule, TwoCylinders };

SceneKind scene_kind_from_string(const std::string& name);  // throws UnknownScene

struct SceneParams {
  int frames = 30;
  int cameras = 8;
  int image_size = 64;
  int texture_size = 64;
  double motion_scale = 1.0;  // scales the body sway amplitude
  bool render_images = true;
};

// Deterministic synthetic test scene: template asset with a seeded Gaussian
// texture, a camera ring, a body motion, the ground-truth garment frames
// produced by the simulator, and the corresponding renders + masks.
struct SyntheticScene {
  GarmentAsset asset;               // template mesh + ground-truth texture
  std::vector<Garment> garments;    // all garments (two for TwoCylinders)
  std::vector<Camera> cameras;
  std::vector<TriangleMesh> body_frames;          // empty for PatchDrop
  std::vector<std::vector<Vec3>> gt_positions;    // per frame, primary garment
  std::vector<std::vector<ImageF>> images;        // [frame][camera], rgb
  std::vector<std::vector<ImageF>> masks;         // [frame][camera], 1-channel
  SimConfig sim_config;             // configuration used for the ground truth
  uint64_t content_hash = 0;        // float32-quantized geometry + texture hash
};

SyntheticScene make_synthetic_scene(SceneKind kind, uint64_t seed,
                                    const SceneParams& params = {});

// Mesh builders used by the scenes (exposed for tests).
TriangleMesh make_grid_patch(int nx, int ny, double size_x, double size_y);
TriangleMesh make_tube(int segments, int rings, double radius, double y_min, double y_max);
TriangleMesh make_capsule(int segments, int rings, double radius, double half_height);

// Seeds a texture with random low-order SH color noise; the photometric
// signal registration locks onto.
void randomize_texture_colors(GaussianTexture& texture, uint64_t seed);

// Writes the scene to a directory (cameras.json, asset/, frames/NNNN/,
// gt_positions.bin) for CLI-driven workflows.
void save_scene(const SyntheticScene& scene, const std::string& dir);

}  // namespace ggf
