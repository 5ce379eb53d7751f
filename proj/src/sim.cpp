#include "ggf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "ggf/bvh.hpp"

namespace ggf {

namespace {

bool finite(const std::vector<Vec3>& v) {
  for (const auto& p : v)
    if (!p.allFinite()) return false;
  return true;
}

Vec3 barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 v0 = b - a, v1 = c - a, v2 = p - a;
  const double d00 = v0.dot(v0), d01 = v0.dot(v1), d11 = v1.dot(v1);
  const double d20 = v2.dot(v0), d21 = v2.dot(v1);
  const double denom = d00 * d11 - d01 * d01;
  if (std::abs(denom) < 1e-18) return Vec3(1, 0, 0);
  const double v = (d11 * d20 - d01 * d21) / denom;
  const double w = (d00 * d21 - d01 * d20) / denom;
  Vec3 bary(1.0 - v - w, v, w);
  bary = bary.cwiseMax(0.0);
  return bary / bary.sum();
}

// Internal force accumulation for one garment at its current positions.
void add_internal_forces(const ClothSystem& sys, std::vector<Vec3>& force,
                         const SimConfig& cfg) {
  const EnergyGrad strain = strain_energy(sys.mesh, sys.rest.face_rest, cfg.material, true,
                                          &sys.face_lambda, &sys.face_mu);
  const EnergyGrad bend = bending_energy(sys.mesh, sys.topology, true, &sys.pair_bend);
  for (size_t i = 0; i < force.size(); ++i)
    force[i] -= strain.grad[i] + cfg.bending_stiffness * bend.grad[i];
}

// One-sided cubic contact force against a solid surface.
void add_contact_forces(const ClothSystem& sys, const TriangleBvh& bvh,
                        std::vector<Vec3>& force, const SimConfig& cfg) {
  for (size_t i = 0; i < sys.mesh.vertices.size(); ++i) {
    const auto hit = bvh.closest_point(sys.mesh.vertices[i]);
    if (hit.face < 0) continue;
    const double d = (sys.mesh.vertices[i] - hit.point).dot(hit.normal);
    const double pen = cfg.eps_body - d;
    if (pen <= 0.0) continue;
    force[i] += cfg.contact_stiffness * 3.0 * pen * pen * hit.normal;
  }
}

void project_penetrations(std::vector<Vec3>& positions, std::vector<Vec3>& velocities,
                          const TriangleBvh& bvh, const SimConfig& cfg) {
  for (size_t i = 0; i < positions.size(); ++i) {
    const auto hit = bvh.closest_point(positions[i]);
    if (hit.face < 0) continue;
    const double d = (positions[i] - hit.point).dot(hit.normal);
    if (d >= 0.0) continue;
    positions[i] = hit.point + cfg.projection_margin * hit.normal;
    const double vn = velocities[i].dot(hit.normal);
    if (vn < 0.0) velocities[i] -= vn * hit.normal;
  }
}

// Symmetric proximity repulsion between two garments.
void add_repulsion(const ClothSystem& a, const ClothSystem& b, const TriangleBvh& b_bvh,
                   std::vector<Vec3>& force_a, std::vector<Vec3>& force_b,
                   const SimConfig& cfg) {
  for (size_t i = 0; i < a.mesh.vertices.size(); ++i) {
    const auto hit = b_bvh.closest_point(a.mesh.vertices[i]);
    if (hit.face < 0) continue;
    const Vec3 diff = a.mesh.vertices[i] - hit.point;
    const double dist = diff.norm();
    if (dist >= cfg.repulsion_radius || dist < 1e-9) continue;
    const Vec3 dir = diff / dist;
    const Vec3 f = cfg.repulsion_stiffness * 2.0 * (cfg.repulsion_radius - dist) * dir;
    force_a[i] += f;
    const auto& bf = b.mesh.faces[hit.face];
    const Vec3 bary = barycentric(hit.point, b.mesh.vertices[bf[0]], b.mesh.vertices[bf[1]],
                                  b.mesh.vertices[bf[2]]);
    for (int k = 0; k < 3; ++k) force_b[bf[k]] -= bary[k] * f;
  }
}

}  // namespace

void BodyMotion::validate() const {
  if (frames.empty()) return;
  const size_t n = frames[0].vertices.size();
  for (const auto& f : frames)
    if (f.vertices.size() != n) throw TopologyMismatch("body frames change vertex count");
}

ClothSystem make_cloth_system(const TriangleMesh& mesh, const Topology& topology,
                              const RestGeometry& rest, const MaterialField& material,
                              const SimConfig& cfg) {
  material.validate(mesh.vertices.size());
  ClothSystem sys;
  sys.mesh = mesh;
  sys.topology = topology;
  sys.rest = rest;
  sys.material = material;

  sys.node_mass.assign(mesh.vertices.size(), 0.0);
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    const double share = rest.face_rest[i].rest_area * cfg.areal_density / 3.0;
    for (int k = 0; k < 3; ++k) sys.node_mass[mesh.faces[i][k]] += share;
  }
  for (size_t i = 0; i < sys.node_mass.size(); ++i) {
    sys.node_mass[i] *= material.m[i][3];
    sys.node_mass[i] = std::max(sys.node_mass[i], 1e-9);
  }

  sys.face_lambda.resize(mesh.faces.size());
  sys.face_mu.resize(mesh.faces.size());
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    sys.face_lambda[i] =
        (material.m[f[0]][1] + material.m[f[1]][1] + material.m[f[2]][1]) / 3.0;
    sys.face_mu[i] = (material.m[f[0]][2] + material.m[f[1]][2] + material.m[f[2]][2]) / 3.0;
  }
  sys.pair_bend.resize(topology.dihedral_pairs.size());
  for (size_t i = 0; i < topology.dihedral_pairs.size(); ++i) {
    const auto& p = topology.dihedral_pairs[i];
    sys.pair_bend[i] = (material.m[p.edge_v0][0] + material.m[p.edge_v1][0] +
                        material.m[p.opp_a][0] + material.m[p.opp_b][0]) /
                       4.0;
  }
  return sys;
}

void step_garments(std::vector<ClothSystem*>& systems, std::vector<SimState>& states,
                   const TriangleMesh* body, const std::vector<const TriangleMesh*>& solids,
                   const SimConfig& cfg, bool cloth_cloth_repulsion) {
  const size_t n_garments = systems.size();
  const double h = 1.0 / cfg.substeps;
  const double frame2 = 1.0 / (cfg.fps * cfg.fps);  // seconds^2 per frame^2
  const Vec3 gravity_frame = cfg.gravity * frame2;

  std::vector<TriangleBvh> solid_bvhs;
  solid_bvhs.reserve(solids.size() + 1);
  std::unique_ptr<TriangleBvh> body_bvh;
  if (body) body_bvh = std::make_unique<TriangleBvh>(*body);
  for (const auto* s : solids) solid_bvhs.emplace_back(*s);

  // Per-frame gravity impulse keeps the ballistic update exact for any
  // substep count.
  std::vector<std::vector<Vec3>> x0(n_garments), v(n_garments);
  for (size_t g = 0; g < n_garments; ++g) {
    x0[g] = states[g].positions;
    v[g].resize(states[g].velocities.size());
    for (size_t i = 0; i < v[g].size(); ++i)
      v[g][i] = cfg.damping * states[g].velocities[i] + gravity_frame;
    systems[g]->mesh.vertices = states[g].positions;
  }

  std::vector<std::vector<Vec3>> force(n_garments);
  for (int sub = 0; sub < cfg.substeps; ++sub) {
    for (size_t g = 0; g < n_garments; ++g)
      force[g].assign(systems[g]->mesh.vertices.size(), Vec3::Zero());

    std::vector<TriangleBvh> garment_bvhs;
    if (cloth_cloth_repulsion && n_garments > 1) {
      garment_bvhs.reserve(n_garments);
      for (size_t g = 0; g < n_garments; ++g) garment_bvhs.emplace_back(systems[g]->mesh);
    }

    for (size_t g = 0; g < n_garments; ++g) {
      add_internal_forces(*systems[g], force[g], cfg);
      if (body_bvh) add_contact_forces(*systems[g], *body_bvh, force[g], cfg);
      for (const auto& bvh : solid_bvhs) add_contact_forces(*systems[g], bvh, force[g], cfg);
    }
    if (cloth_cloth_repulsion && n_garments > 1) {
      for (size_t a = 0; a < n_garments; ++a)
        for (size_t b = a + 1; b < n_garments; ++b) {
          add_repulsion(*systems[a], *systems[b], garment_bvhs[b], force[a], force[b], cfg);
          add_repulsion(*systems[b], *systems[a], garment_bvhs[a], force[b], force[a], cfg);
        }
    }

    for (size_t g = 0; g < n_garments; ++g) {
      auto& sys = *systems[g];
      for (size_t i = 0; i < sys.mesh.vertices.size(); ++i) {
        const Vec3 accel = force[g][i] / sys.node_mass[i] * frame2;  // per frame^2
        v[g][i] += accel * h;
        sys.mesh.vertices[i] += v[g][i] * h;
      }
      if (body_bvh) project_penetrations(sys.mesh.vertices, v[g], *body_bvh, cfg);
      for (const auto& bvh : solid_bvhs) project_penetrations(sys.mesh.vertices, v[g], bvh, cfg);
    }
  }

  for (size_t g = 0; g < n_garments; ++g) {
    auto& sys = *systems[g];
    if (!finite(sys.mesh.vertices)) throw DivergedSimulation("non-finite simulation state");
    states[g].positions = sys.mesh.vertices;
    for (size_t i = 0; i < states[g].positions.size(); ++i)
      states[g].velocities[i] = states[g].positions[i] - x0[g][i];
  }
}

SimState step(const SimState& state, const ClothSystem& system, const TriangleMesh* body,
              const std::vector<const TriangleMesh*>& solids, const SimConfig& cfg) {
  if (state.positions.size() != system.mesh.vertices.size() ||
      state.velocities.size() != state.positions.size())
    throw TopologyMismatch("state size does not match the cloth system");
  ClothSystem scratch = system;
  std::vector<ClothSystem*> systems{&scratch};
  std::vector<SimState> states{state};
  step_garments(systems, states, body, solids, cfg, false);
  return states[0];
}

Garment make_garment(TriangleMesh mesh, double thickness) {
  Garment g;
  if (!mesh.has_rest()) mesh.rest_positions = mesh.vertices;
  g.topology = build_topology(mesh);
  g.rest = build_rest_geometry(mesh, g.topology, thickness);
  g.material = MaterialField::ones(mesh.vertices.size());
  g.mesh = std::move(mesh);
  return g;
}

void untangle_one(Garment& outer, std::vector<Garment*>& inners, const TriangleMesh* body,
                  int n_epochs, const SimConfig& cfg, int frames_per_stage) {
  SimConfig relax = cfg;
  relax.gravity = Vec3::Zero();  // ordering relaxation runs weightless
  if (relax.damping >= 1.0) relax.damping = 0.9;

  for (int epoch = 0; epoch < n_epochs; ++epoch) {
    // Stage 1: outer as cloth, inners as solids.
    {
      ClothSystem sys =
          make_cloth_system(outer.mesh, outer.topology, outer.rest, outer.material, relax);
      std::vector<ClothSystem*> systems{&sys};
      std::vector<SimState> states{SimState::at_rest(outer.mesh.vertices)};
      std::vector<const TriangleMesh*> solids;
      for (const auto* g : inners) solids.push_back(&g->mesh);
      for (int f = 0; f < frames_per_stage; ++f) {
        try {
          step_garments(systems, states, body, solids, relax, false);
        } catch (const DivergedSimulation& e) {
          throw DivergedSimulation(std::string(e.what()) + " [untangle stage 1, epoch " +
                                   std::to_string(epoch + 1) + "]");
        }
      }
      outer.mesh.vertices = states[0].positions;
    }
    // Stage 2: everything as cloth with mutual repulsion.
    {
      std::vector<Garment*> all = inners;
      all.push_back(&outer);
      std::vector<ClothSystem> sys_storage;
      sys_storage.reserve(all.size());
      std::vector<ClothSystem*> systems;
      std::vector<SimState> states;
      for (auto* g : all) {
        sys_storage.push_back(
            make_cloth_system(g->mesh, g->topology, g->rest, g->material, relax));
        states.push_back(SimState::at_rest(g->mesh.vertices));
      }
      for (auto& s : sys_storage) systems.push_back(&s);
      for (int f = 0; f < frames_per_stage; ++f) {
        try {
          step_garments(systems, states, body, {}, relax, true);
        } catch (const DivergedSimulation& e) {
          throw DivergedSimulation(std::string(e.what()) + " [untangle stage 2, epoch " +
                                   std::to_string(epoch + 1) + "]");
        }
      }
      for (size_t g = 0; g < all.size(); ++g) all[g]->mesh.vertices = states[g].positions;
    }
  }
}

void untangle_all(std::vector<Garment>& garments, const TriangleMesh* body,
                  const SimConfig& cfg, int n_epochs, int frames_per_stage) {
  for (size_t i = 1; i < garments.size(); ++i) {
    std::vector<Garment*> inners;
    for (size_t j = 0; j < i; ++j) inners.push_back(&garments[j]);
    untangle_one(garments[i], inners, body, n_epochs, cfg, frames_per_stage);
  }
}

RestGeometry resize(const RestGeometry& rest, const std::vector<double>& vertex_scales,
                    const std::vector<std::array<int, 3>>& faces) {
  for (double s : vertex_scales)
    if (!(s > 0.0)) throw InvalidScaleField("scale field entries must be positive");
  RestGeometry out = rest;
  for (size_t e = 0; e < rest.edges.size(); ++e) {
    const auto& edge = rest.edges[e];
    if (edge[0] >= static_cast<int>(vertex_scales.size()) ||
        edge[1] >= static_cast<int>(vertex_scales.size()))
      throw InvalidScaleField("scale field shorter than vertex count");
    out.edge_rest_lengths[e] =
        rest.edge_rest_lengths[e] * 0.5 * (vertex_scales[edge[0]] + vertex_scales[edge[1]]);
  }
  if (faces.size() != rest.face_rest.size())
    throw InvalidScaleField("face count does not match rest geometry");
  for (size_t i = 0; i < faces.size(); ++i) {
    const double s = (vertex_scales[faces[i][0]] + vertex_scales[faces[i][1]] +
                      vertex_scales[faces[i][2]]) /
                     3.0;
    out.face_rest[i].inv_rest_edges = rest.face_rest[i].inv_rest_edges / s;
    out.face_rest[i].rest_area = rest.face_rest[i].rest_area * s * s;
  }
  return out;
}

double rollout_l2(const std::vector<std::vector<Vec3>>& registered, const BodyMotion* body,
                  const TriangleMesh& mesh, const Topology& topology,
                  const MaterialField& material, const RestGeometry& rest,
                  const SimConfig& cfg) {
  if (registered.size() < 2) throw TopologyMismatch("need at least 2 registered frames");
  const size_t n = registered[0].size();
  for (const auto& f : registered)
    if (f.size() != n) throw TopologyMismatch("registered frames change vertex count");
  if (registered.size() == 2) return 0.0;  // nothing to predict

  TriangleMesh work = mesh;
  work.rest_positions = mesh.rest();
  work.vertices = registered[1];
  ClothSystem sys = make_cloth_system(work, topology, rest, material, cfg);

  SimState state;
  state.positions = registered[1];
  state.velocities.resize(n);
  for (size_t i = 0; i < n; ++i)
    state.velocities[i] = registered[1][i] - registered[0][i];

  double total = 0.0;
  size_t frames = 0;
  for (size_t t = 2; t < registered.size(); ++t) {
    const TriangleMesh* body_mesh = nullptr;
    if (body && !body->frames.empty())
      body_mesh = &body->frames[std::min(t, body->frames.size() - 1)];
    state = step(state, sys, body_mesh, {}, cfg);
    double frame_err = 0.0;
    for (size_t i = 0; i < n; ++i)
      frame_err += (state.positions[i] - registered[t][i]).squaredNorm();
    total += frame_err / static_cast<double>(n);
    ++frames;
  }
  return total / static_cast<double>(frames);
}

FitResult fit_behavior(const std::vector<std::vector<Vec3>>& registered,
                       const BodyMotion* body, const TriangleMesh& mesh,
                       const Topology& topology, const MaterialField& init_material,
                       const RestGeometry& init_rest, const SimConfig& cfg) {
  if (registered.size() < 2) throw TopologyMismatch("need at least 2 registered frames");
  FitResult result;
  result.material = init_material;
  result.rest = init_rest;

  // Low-dimensional parameterization: log-multipliers for the four material
  // channels plus a global rest-length scale.
  std::array<double, 5> params{0, 0, 0, 0, 0};
  auto realize = [&](const std::array<double, 5>& p, MaterialField& mat, RestGeometry& rest) {
    mat = init_material;
    for (auto& m : mat.m)
      for (int k = 0; k < 4; ++k) m[k] *= std::exp(p[k]);
    const std::vector<double> scales(mesh.vertices.size(), std::exp(p[4]));
    rest = resize(init_rest, scales, mesh.faces);
  };
  auto evaluate = [&](const std::array<double, 5>& p) {
    MaterialField mat;
    RestGeometry rest;
    realize(p, mat, rest);
    try {
      return rollout_l2(registered, body, mesh, topology, mat, rest, cfg);
    } catch (const DivergedSimulation&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  double best = evaluate(params);
  result.initial_l2 = best;
  if (registered.size() == 2 || best == 0.0) {  // static pair: nothing to fit
    result.fitted_l2 = best;
    return result;
  }

  const double steps[] = {std::log(2.0), std::log(1.5), std::log(1.25),
                          std::log(1.1), std::log(1.05), std::log(1.02)};
  for (int sweep = 0; sweep < 4; ++sweep) {
    bool improved = false;
    for (int channel = 0; channel < 5; ++channel) {
      for (double s : steps) {
        for (double dir : {+1.0, -1.0}) {
          auto trial = params;
          trial[channel] += dir * s;
          const double l2 = evaluate(trial);
          if (l2 < best) {
            best = l2;
            params = trial;
            improved = true;
          }
        }
      }
    }
    if (!improved) break;
  }

  // Smoothed local rest-scale refinement over four bbox regions.
  {
    Vec3 lo, hi;
    TriangleMesh rest_mesh = mesh;
    rest_mesh.vertices = mesh.rest();
    rest_mesh.bounds(lo, hi);
    const Vec3 mid = 0.5 * (lo + hi);
    std::vector<std::vector<double>> basis(4,
                                           std::vector<double>(mesh.vertices.size(), 0.0));
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
      const auto& p = rest_mesh.vertices[i];
      const int region = (p.x() > mid.x() ? 1 : 0) + (p.y() > mid.y() ? 2 : 0);
      basis[region][i] = 1.0;
    }
    // Three Laplacian smoothing rounds over the vertex adjacency.
    for (auto& b : basis)
      for (int round = 0; round < 3; ++round) {
        std::vector<double> next = b;
        for (size_t i = 0; i < b.size(); ++i) {
          const auto& adj = topology.vertex_adjacency[i];
          if (adj.empty()) continue;
          double acc = 0.0;
          for (int j : adj) acc += b[j];
          next[i] = 0.5 * b[i] + 0.5 * acc / static_cast<double>(adj.size());
        }
        b = std::move(next);
      }

    MaterialField mat;
    RestGeometry rest;
    realize(params, mat, rest);
    std::vector<double> field(mesh.vertices.size(), 1.0);
    auto evaluate_field = [&](const std::vector<double>& f) {
      try {
        return rollout_l2(registered, body, mesh, topology, mat,
                          resize(rest, f, mesh.faces), cfg);
      } catch (const DivergedSimulation&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    for (int r = 0; r < 4; ++r) {
      for (double amp : {0.05, -0.05, 0.02, -0.02}) {
        auto trial = field;
        for (size_t i = 0; i < trial.size(); ++i)
          trial[i] = std::max(trial[i] * (1.0 + amp * basis[r][i]), 1e-3);
        const double l2 = evaluate_field(trial);
        if (l2 < best) {
          best = l2;
          field = trial;
        }
      }
    }
    realize(params, result.material, result.rest);
    result.rest = resize(result.rest, field, mesh.faces);
  }
  result.fitted_l2 = best;
  return result;
}

}  // namespace ggf
