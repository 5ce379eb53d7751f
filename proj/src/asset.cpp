#include "ggf/asset.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ggf/mesh_io.hpp"

namespace ggf {

namespace {

constexpr char kMagic[4] = {'G', 'G', 'A', 'R'};
constexpr uint32_t kFormatVersion = 1;

namespace fs = std::filesystem;

void pack_texel(const GaussianTexel& t, float* out) {
  int k = 0;
  for (int i = 0; i < kShTerms; ++i)
    for (int c = 0; c < 3; ++c) out[k++] = static_cast<float>(t.sh(i, c));
  out[k++] = static_cast<float>(t.opacity_logit);
  for (int i = 0; i < 3; ++i) out[k++] = static_cast<float>(t.log_scale[i]);
  for (int i = 0; i < 4; ++i) out[k++] = static_cast<float>(t.rotation[i]);
  for (int i = 0; i < 3; ++i) out[k++] = static_cast<float>(t.offset[i]);
}

GaussianTexel unpack_texel(const float* in) {
  GaussianTexel t;
  int k = 0;
  for (int i = 0; i < kShTerms; ++i)
    for (int c = 0; c < 3; ++c) t.sh(i, c) = in[k++];
  t.opacity_logit = in[k++];
  for (int i = 0; i < 3; ++i) t.log_scale[i] = in[k++];
  for (int i = 0; i < 4; ++i) t.rotation[i] = in[k++];
  for (int i = 0; i < 3; ++i) t.offset[i] = in[k++];
  return t;
}

void save_texture(const GaussianTexture& tex, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(kMagic, 4);
  const uint32_t header[4] = {kFormatVersion, static_cast<uint32_t>(kTexelChannels),
                              static_cast<uint32_t>(tex.width),
                              static_cast<uint32_t>(tex.height)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::vector<float> row(static_cast<size_t>(tex.width) * kTexelChannels);
  for (int y = 0; y < tex.height; ++y) {
    for (int x = 0; x < tex.width; ++x)
      pack_texel(tex.at(x, y), row.data() + static_cast<size_t>(x) * kTexelChannels);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  // Validity bitmap, row-major, LSB first.
  std::vector<uint8_t> bits((tex.data.size() + 7) / 8, 0);
  for (size_t i = 0; i < tex.valid.size(); ++i)
    if (tex.valid[i]) bits[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
  out.write(reinterpret_cast<const char*>(bits.data()),
            static_cast<std::streamsize>(bits.size()));
}

GaussianTexture load_texture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotAnAsset("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw NotAnAsset(path + " does not start with the GGAR magic");
  uint32_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw CorruptAsset("truncated texture header in " + path);
  if (header[0] != kFormatVersion)
    throw UnsupportedVersion("texture format version " + std::to_string(header[0]));
  if (header[1] != static_cast<uint32_t>(kTexelChannels))
    throw UnsupportedVersion("texture declares " + std::to_string(header[1]) +
                             " channels, expected " + std::to_string(kTexelChannels));
  GaussianTexture tex(static_cast<int>(header[2]), static_cast<int>(header[3]));
  std::vector<float> row(static_cast<size_t>(tex.width) * kTexelChannels);
  for (int y = 0; y < tex.height; ++y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw CorruptAsset("truncated texture payload in " + path);
    for (int x = 0; x < tex.width; ++x)
      tex.at(x, y) = unpack_texel(row.data() + static_cast<size_t>(x) * kTexelChannels);
  }
  std::vector<uint8_t> bits((tex.data.size() + 7) / 8);
  in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (!in) throw CorruptAsset("truncated validity bitmap in " + path);
  for (size_t i = 0; i < tex.valid.size(); ++i)
    tex.valid[i] = (bits[i / 8] >> (i % 8)) & 1u;
  return tex;
}

}  // namespace

RestGeometry build_rest_geometry(const TriangleMesh& mesh, const Topology& topology,
                                 double thickness) {
  RestGeometry rest;
  rest.edges = topology.edges;
  rest.edge_rest_lengths.reserve(topology.edges.size());
  const auto& pos = mesh.rest();
  for (const auto& e : topology.edges)
    rest.edge_rest_lengths.push_back((pos[e[1]] - pos[e[0]]).norm());
  rest.face_rest = build_rest_states(mesh, thickness);
  return rest;
}

void MaterialField::validate(size_t nodes) const {
  if (m.size() != nodes) throw InvalidMesh("material field length mismatch");
  for (const auto& v : m)
    if ((v.array() <= 0.0).any()) throw InvalidMesh("material multipliers must be positive");
}

void save_asset(const TriangleMesh& mesh, const GaussianTexture& texture,
                const RestGeometry& rest, const MaterialField& material,
                const std::string& dir) {
  if (material.m.size() != mesh.vertices.size())
    throw InvalidMesh("material field does not match vertex count");
  if (rest.face_rest.size() != mesh.faces.size())
    throw InvalidMesh("rest geometry does not match face count");
  fs::create_directories(dir);
  save_ply(mesh, (fs::path(dir) / "mesh.ply").string());
  save_texture(texture, (fs::path(dir) / "texture.ggt").string());

  nlohmann::json rest_json;
  rest_json["edge_rest_lengths"] = rest.edge_rest_lengths;
  {
    nlohmann::json faces = nlohmann::json::array();
    for (const auto& f : rest.face_rest) {
      faces.push_back({f.inv_rest_edges(0, 0), f.inv_rest_edges(0, 1), f.inv_rest_edges(1, 0),
                       f.inv_rest_edges(1, 1), f.rest_area, f.thickness});
    }
    rest_json["face_rest"] = std::move(faces);
  }
  {
    nlohmann::json mats = nlohmann::json::array();
    for (const auto& v : material.m) mats.push_back({v[0], v[1], v[2], v[3]});
    rest_json["material"] = std::move(mats);
  }
  std::ofstream rest_out(fs::path(dir) / "rest.json");
  rest_out << rest_json.dump() << "\n";

  nlohmann::json meta;
  meta["units"] = "meters";
  meta["version"] = kFormatVersion;
  meta["channels"] = kTexelChannels;
  std::ofstream meta_out(fs::path(dir) / "meta.json");
  meta_out << meta.dump(1) << "\n";
}

GarmentAsset load_asset(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "meta.json") || !fs::exists(fs::path(dir) / "texture.ggt"))
    throw NotAnAsset(dir + " is not an asset bundle");
  GarmentAsset asset;
  asset.mesh = load_ply((fs::path(dir) / "mesh.ply").string());
  asset.texture = load_texture((fs::path(dir) / "texture.ggt").string());

  std::ifstream rest_in(fs::path(dir) / "rest.json");
  if (!rest_in) throw CorruptAsset("missing rest.json in " + dir);
  nlohmann::json rest_json;
  rest_in >> rest_json;

  const Topology topo = build_topology(asset.mesh);
  asset.rest.edges = topo.edges;
  asset.rest.edge_rest_lengths =
      rest_json.at("edge_rest_lengths").get<std::vector<double>>();
  if (asset.rest.edge_rest_lengths.size() != topo.edges.size())
    throw CorruptAsset("edge rest lengths do not match topology in " + dir);
  for (const auto& f : rest_json.at("face_rest")) {
    FaceRestState st;
    st.inv_rest_edges << f.at(0).get<double>(), f.at(1).get<double>(),
        f.at(2).get<double>(), f.at(3).get<double>();
    st.rest_area = f.at(4).get<double>();
    st.thickness = f.at(5).get<double>();
    asset.rest.face_rest.push_back(st);
  }
  if (asset.rest.face_rest.size() != asset.mesh.faces.size())
    throw CorruptAsset("face rest states do not match face count in " + dir);
  for (const auto& v : rest_json.at("material")) {
    asset.material.m.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(),
                                  v.at(2).get<double>(), v.at(3).get<double>());
  }
  asset.material.validate(asset.mesh.vertices.size());
  return asset;
}

}  // namespace ggf
