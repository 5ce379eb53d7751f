#pragma once

#include <optional>

#include "ggf/camera.hpp"
#include "ggf/energy.hpp"
#include "ggf/icp.hpp"
#include "ggf/image.hpp"
#include "ggf/mesh.hpp"
#include "ggf/texture.hpp"

namespace ggf {

struct RegistrationConfig {
  double lambda_rgb = 0.8;     // L1 vs SSIM balance inside the RGB term
  double lambda1 = 1.0;        // RGB weight
  double lambda2 = 1.0;        // physics (bending + strain) weight
  double lambda3 = 1e3;        // VE / body weight
  int iterations_per_frame = 300;
  double schedule_fraction = 0.5;  // VE before, body after
  double learning_rate = 1e-4;     // m
  double eps_body = 3e-3;          // m
  double ve_parallel_tol = 30.0;   // deg
  int cameras_per_iteration = 0;   // 0 = all cameras each step
  uint64_t seed = 0;
  bool use_schedule = true;        // false: body term from iteration 0
  bool visibility_culling = true;
  Vec3 background = Vec3::Zero();

  void validate() const;
};

// Images + masks + cameras + the fitted body mesh for one frame.
struct FrameObservation {
  std::vector<ImageF> images;
  std::vector<ImageF> masks;  // optional; empty or one per camera
  std::vector<Camera> cameras;
  TriangleMesh body;          // empty vertices = no body this frame

  bool has_body() const { return !body.vertices.empty(); }
  void validate() const;
};

struct IterationTrace {
  bool used_body = false;  // body term active (vs virtual edges)
  double loss = 0.0;
  double rgb = 0.0;
  double phys = 0.0;
  double schedule_term = 0.0;  // VE or body value, whichever was active
};

struct FrameResult {
  std::vector<Vec3> positions;
  double final_loss = 0.0;
  double final_rgb = 0.0;
  double final_bending = 0.0;
  double final_strain = 0.0;
  double final_schedule_term = 0.0;
  std::vector<IterationTrace> trace;
};

struct RegistrationResult {
  std::vector<FrameResult> frames;

  std::vector<std::vector<Vec3>> position_frames() const {
    std::vector<std::vector<Vec3>> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(f.positions);
    return out;
  }
};

struct AppearanceConfig {
  int iterations = 200;
  double learning_rate = 0.02;
  double lambda_rgb = 0.8;
  double eps_pos = 0.1;    // local frame units
  double eps_scale = 0.6;
  double w_pos = 1.0;
  double w_scale = 1.0;
  Vec3 background = Vec3::Zero();
  bool visibility_culling = true;
  double final_l1 = 0.0;   // reported back after optimization
};

// Fits the Gaussian texture to the template-frame observations with
// L_RGB + w_pos L_pos + w_scale L_scale. `initial` (when given) seeds the
// texture instead of the defaults; zero iterations return it unchanged.
GaussianTexture init_appearance(const FrameObservation& template_obs,
                                const TriangleMesh& mesh, int tex_width, int tex_height,
                                AppearanceConfig& cfg,
                                const GaussianTexture* initial = nullptr);

// One frame of tracking-based registration: first-order optimization of the
// vertex positions under lambda1 L_RGB + lambda2 (bending + strain) +
// lambda3 (VE before the schedule boundary, body after).
std::vector<Vec3> register_frame(const std::vector<Vec3>& prev_positions,
                                 const FrameObservation& obs, const RegistrationConfig& cfg,
                                 const TriangleMesh& template_mesh,
                                 const std::vector<FaceRestState>& rest,
                                 const Topology& topology,
                                 const std::vector<VirtualEdge>& ves,
                                 const GaussianTexture& texture,
                                 const MaterialParams& material,
                                 FrameResult* result = nullptr);

// Sequence tracking: frame 0 starts from the template aligned by ICP between
// template-body and frame-0-body face-centroid samples (when both exist);
// frame k starts at frame k-1's converged positions.
RegistrationResult register_sequence(const TriangleMesh& template_mesh,
                                     const TriangleMesh* template_body,
                                     const GaussianTexture& texture,
                                     const std::vector<FrameObservation>& observations,
                                     const RegistrationConfig& cfg,
                                     const MaterialParams& material);

}  // namespace ggf
