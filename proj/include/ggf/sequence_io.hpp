#pragma once

#include <string>
#include <vector>

#include "ggf/mesh.hpp"

namespace ggf {

// Tracked-position container: magic "GGSQ", u32 version, u32 frames,
// u32 vertices, then frames*vertices*3 float32 little-endian.
void save_position_sequence(const std::vector<std::vector<Vec3>>& frames,
                            const std::string& path);
std::vector<std::vector<Vec3>> load_position_sequence(const std::string& path);

}  // namespace ggf
