#pragma once

#include <string>

#include "ggf/mesh.hpp"

namespace ggf {

// OBJ: v/vt/f with per-corner texture indices; polygons are fan-triangulated.
// Doubles are printed with round-trip precision so vertex data survives
// save/load bit-exactly.
TriangleMesh load_obj(const std::string& path);
void save_obj(const TriangleMesh& mesh, const std::string& path);

// Binary little-endian PLY. Vertices are double x/y/z (plus rx/ry/rz when
// rest positions are present); faces carry vertex_indices and an optional
// per-corner texcoord list (6 doubles). Vertex order is preserved.
TriangleMesh load_ply(const std::string& path);
void save_ply(const TriangleMesh& mesh, const std::string& path);

// Dispatch on extension (.obj / .ply).
TriangleMesh load_mesh(const std::string& path);
void save_mesh(const TriangleMesh& mesh, const std::string& path);

}  // namespace ggf
