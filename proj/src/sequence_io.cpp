#include "ggf/sequence_io.hpp"

#include <cstring>
#include <fstream>

namespace ggf {

namespace {
constexpr char kMagic[4] = {'G', 'G', 'S', 'Q'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_position_sequence(const std::vector<std::vector<Vec3>>& frames,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const uint32_t n_frames = static_cast<uint32_t>(frames.size());
  const uint32_t n_verts = frames.empty() ? 0 : static_cast<uint32_t>(frames[0].size());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), 4);
  out.write(reinterpret_cast<const char*>(&n_frames), 4);
  out.write(reinterpret_cast<const char*>(&n_verts), 4);
  std::vector<float> buf(static_cast<size_t>(n_verts) * 3);
  for (const auto& frame : frames) {
    if (frame.size() != n_verts) throw TopologyMismatch("frame vertex counts differ");
    for (size_t i = 0; i < frame.size(); ++i)
      for (int k = 0; k < 3; ++k) buf[3 * i + k] = static_cast<float>(frame[i][k]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

std::vector<std::vector<Vec3>> load_position_sequence(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[4];
  uint32_t version, n_frames, n_verts;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&n_frames), 4);
  in.read(reinterpret_cast<char*>(&n_verts), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(path + " is not a position sequence");
  if (version != kVersion) throw UnsupportedVersion("sequence version mismatch");
  std::vector<std::vector<Vec3>> frames(n_frames);
  std::vector<float> buf(static_cast<size_t>(n_verts) * 3);
  for (auto& frame : frames) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw Error("truncated sequence " + path);
    frame.resize(n_verts);
    for (size_t i = 0; i < frame.size(); ++i)
      frame[i] = Vec3(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]);
  }
  return frames;
}

}  // namespace ggf
