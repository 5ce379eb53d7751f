#pragma once

#include <string>

#include "ggf/mesh.hpp"
#include "ggf/texture.hpp"

namespace ggf {

// Per-edge rest lengths plus per-face reference states. Edges align with the
// deterministic ordering of build_topology on the asset mesh.
struct RestGeometry {
  std::vector<std::array<int, 2>> edges;
  std::vector<double> edge_rest_lengths;  // m
  std::vector<FaceRestState> face_rest;
};

RestGeometry build_rest_geometry(const TriangleMesh& mesh, const Topology& topology,
                                 double thickness);

// Per-node 4-vector of positive multipliers:
// (bending, stretch lambda, stretch mu, mass density).
struct MaterialField {
  std::vector<Eigen::Vector4d> m;

  static MaterialField ones(size_t nodes) {
    MaterialField f;
    f.m.assign(nodes, Eigen::Vector4d::Ones());
    return f;
  }
  void validate(size_t nodes) const;
};

struct GarmentAsset {
  TriangleMesh mesh;
  GaussianTexture texture;
  RestGeometry rest;
  MaterialField material;
};

// Asset bundle directory: mesh.ply, texture.ggt (magic "GGAR", version,
// channel layout, float32 channels, validity bitmap), rest.json, meta.json.
// Round trips are bit-exact.
void save_asset(const TriangleMesh& mesh, const GaussianTexture& texture,
                const RestGeometry& rest, const MaterialField& material,
                const std::string& dir);
inline void save_asset(const GarmentAsset& asset, const std::string& dir) {
  save_asset(asset.mesh, asset.texture, asset.rest, asset.material, dir);
}

GarmentAsset load_asset(const std::string& dir);

}  // namespace ggf
