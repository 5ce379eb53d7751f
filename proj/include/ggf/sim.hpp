#pragma once

#include "ggf/asset.hpp"
#include "ggf/energy.hpp"
#include "ggf/mesh.hpp"

namespace ggf {

// Nodal positions (m) and velocities in displacement-per-frame units; the
// frame update follows x_{t+1} = x_t + v_t + a with a unit frame time, so
// v_{t+1} is defined as x_{t+1} - x_t.
struct SimState {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;

  static SimState at_rest(const std::vector<Vec3>& positions) {
    return SimState{positions, std::vector<Vec3>(positions.size(), Vec3::Zero())};
  }
};

// One body mesh per frame, fixed topology.
struct BodyMotion {
  std::vector<TriangleMesh> frames;
  void validate() const;
};

struct SimConfig {
  int substeps = 8;
  Vec3 gravity = Vec3(0.0, -9.81, 0.0);  // m/s^2
  double fps = 30.0;                     // maps seconds to the unit-frame clock
  double damping = 1.0;                  // per-frame velocity retention
  double eps_body = 3e-3;                // m, contact cushion
  double contact_stiffness = 50.0;       // weight of the cubic contact term
  double bending_stiffness = 5e-7;       // J per unit of the dihedral penalty
  double areal_density = 0.15;           // kg/m^2
  MaterialParams material;
  double repulsion_radius = 2e-3;        // m, cloth-cloth rest offset
  double repulsion_stiffness = 10.0;
  double projection_margin = 1e-4;       // m, post-projection clearance
};

// Connectivity, rest data and per-node material of one garment, precomputed
// for stepping. The mesh member holds the current positions.
struct ClothSystem {
  TriangleMesh mesh;
  Topology topology;
  RestGeometry rest;
  MaterialField material;
  std::vector<double> node_mass;      // kg
  std::vector<double> face_lambda;    // per-face stretch multipliers
  std::vector<double> face_mu;
  std::vector<double> pair_bend;      // per-dihedral-pair multipliers
};

ClothSystem make_cloth_system(const TriangleMesh& mesh, const Topology& topology,
                              const RestGeometry& rest, const MaterialField& material,
                              const SimConfig& cfg);

// Advances one frame: gravity enters as a per-frame impulse, internal and
// contact forces integrate over `substeps` symplectic-Euler substeps with
// per-substep collision re-pairing, and a position-level projection removes
// residual body/solid penetration. Throws DivergedSimulation on non-finite
// state.
SimState step(const SimState& state, const ClothSystem& system, const TriangleMesh* body,
              const std::vector<const TriangleMesh*>& solids, const SimConfig& cfg);

// Joint step over several garments with optional cloth-cloth repulsion
// (used by the untangling stages).
void step_garments(std::vector<ClothSystem*>& systems, std::vector<SimState>& states,
                   const TriangleMesh* body, const std::vector<const TriangleMesh*>& solids,
                   const SimConfig& cfg, bool cloth_cloth_repulsion);

// Simulation-ready garment bundle used by untangling.
struct Garment {
  TriangleMesh mesh;
  Topology topology;
  RestGeometry rest;
  MaterialField material;
};

Garment make_garment(TriangleMesh mesh, double thickness = 5e-4);

// Two-stage layer ordering: per epoch, simulate the outer garment with the
// inner ones as solids, then re-simulate everything as cloth with mutual
// repulsion. Gravity is disabled for the relaxation; topology and rest
// lengths are preserved exactly.
void untangle_one(Garment& outer, std::vector<Garment*>& inners, const TriangleMesh* body,
                  int n_epochs, const SimConfig& cfg, int frames_per_stage = 30);

// Orders garments innermost to outermost: untangles garment i from 1..i-1.
void untangle_all(std::vector<Garment>& garments, const TriangleMesh* body,
                  const SimConfig& cfg, int n_epochs = 2, int frames_per_stage = 30);

// Rest-geometry resizing: each edge rest length is multiplied by the mean of
// its endpoint scales; per-face rest states are rescaled consistently.
RestGeometry resize(const RestGeometry& rest, const std::vector<double>& vertex_scales,
                    const std::vector<std::array<int, 3>>& faces);

// Behavior fitting against a registered sequence: coordinate descent over
// global per-channel material multipliers plus a smoothed rest-length scale
// field. Never returns parameters with a higher rollout L2 than the
// initialization.
struct FitResult {
  MaterialField material;
  RestGeometry rest;
  double initial_l2 = 0.0;
  double fitted_l2 = 0.0;
};

FitResult fit_behavior(const std::vector<std::vector<Vec3>>& registered,
                       const BodyMotion* body, const TriangleMesh& mesh,
                       const Topology& topology, const MaterialField& init_material,
                       const RestGeometry& init_rest, const SimConfig& cfg);

// Autoregressive rollout L2 of a parameter set against a registered sequence
// (mean squared nodal distance over predicted frames).
double rollout_l2(const std::vector<std::vector<Vec3>>& registered, const BodyMotion* body,
                  const TriangleMesh& mesh, const Topology& topology,
                  const MaterialField& material, const RestGeometry& rest,
                  const SimConfig& cfg);

}  // namespace ggf
