#include "ggf/mesh_io.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace ggf {

namespace {

std::string lowercase_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  return ext;
}

void write_exact(std::ostream& os, const void* data, size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  write_exact(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InvalidMesh(std::string("truncated PLY while reading ") + what);
  return v;
}

}  // namespace

TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidMesh("cannot open " + path);
  TriangleMesh mesh;
  std::vector<Vec2> texcoords;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 p;
      ls >> p.x() >> p.y() >> p.z();
      mesh.vertices.push_back(p);
    } else if (tag == "vt") {
      Vec2 t;
      ls >> t.x() >> t.y();
      texcoords.push_back(t);
    } else if (tag == "f") {
      std::vector<int> vi, ti;
      std::string corner;
      while (ls >> corner) {
        int v = 0, t = 0;
        const auto slash = corner.find('/');
        v = std::stoi(corner.substr(0, slash));
        if (slash != std::string::npos) {
          const auto rest = corner.substr(slash + 1);
          const auto slash2 = rest.find('/');
          const auto tpart = rest.substr(0, slash2);
          if (!tpart.empty()) t = std::stoi(tpart);
        }
        vi.push_back(v > 0 ? v - 1 : static_cast<int>(mesh.vertices.size()) + v);
        ti.push_back(t > 0 ? t - 1 : (t < 0 ? static_cast<int>(texcoords.size()) + t : -1));
      }
      if (vi.size() < 3) throw InvalidMesh("face with fewer than 3 corners in " + path);
      for (size_t k = 1; k + 1 < vi.size(); ++k) {
        mesh.faces.push_back({vi[0], vi[k], vi[k + 1]});
        if (ti[0] >= 0 && ti[k] >= 0 && ti[k + 1] >= 0) {
          mesh.uvs.push_back({texcoords[ti[0]], texcoords[ti[k]], texcoords[ti[k + 1]]});
        }
      }
    }
  }
  if (!mesh.uvs.empty() && mesh.uvs.size() != mesh.faces.size())
    throw InvalidMesh("OBJ mixes textured and untextured faces: " + path);
  validate_mesh(mesh);
  return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidMesh("cannot write " + path);
  char buf[96];
  auto fmt3 = [&](const char* tag, double a, double b, double c) {
    std::snprintf(buf, sizeof(buf), "%s %.17g %.17g %.17g\n", tag, a, b, c);
    out << buf;
  };
  for (const auto& v : mesh.vertices) fmt3("v", v.x(), v.y(), v.z());
  if (mesh.has_uvs()) {
    for (const auto& uv : mesh.uvs)
      for (const auto& t : uv) {
        std::snprintf(buf, sizeof(buf), "vt %.17g %.17g\n", t.x(), t.y());
        out << buf;
      }
    for (size_t i = 0; i < mesh.faces.size(); ++i) {
      const auto& f = mesh.faces[i];
      out << "f " << f[0] + 1 << '/' << 3 * i + 1 << ' ' << f[1] + 1 << '/' << 3 * i + 2
          << ' ' << f[2] + 1 << '/' << 3 * i + 3 << '\n';
    }
  } else {
    for (const auto& f : mesh.faces)
      out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

TriangleMesh load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidMesh("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw InvalidMesh(path + " is not a PLY file");

  struct Property {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
  };
  struct Element {
    std::string name;
    size_t count = 0;
    std::vector<Property> props;
  };
  std::vector<Element> elements;
  bool binary_le = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = (fmt == "binary_little_endian");
      if (!binary_le && fmt != "ascii")
        throw InvalidMesh("unsupported PLY format in " + path);
      if (!binary_le) throw InvalidMesh("ASCII PLY not supported: " + path);
    } else if (tag == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw InvalidMesh("property before element in " + path);
      Property p;
      std::string t;
      ls >> t;
      if (t == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (tag == "end_header") {
      break;
    }
  }

  auto scalar_size = [&](const std::string& t) -> size_t {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
      return 4;
    if (t == "double" || t == "float64") return 8;
    throw InvalidMesh("unsupported PLY type " + t);
  };
  auto read_scalar = [&](const std::string& t) -> double {
    switch (scalar_size(t)) {
      case 1: return static_cast<double>(read_pod<uint8_t>(in, t.c_str()));
      case 2: return static_cast<double>(read_pod<uint16_t>(in, t.c_str()));
      case 4:
        if (t == "float" || t == "float32") return read_pod<float>(in, t.c_str());
        return static_cast<double>(read_pod<int32_t>(in, t.c_str()));
      default: return read_pod<double>(in, t.c_str());
    }
  };

  TriangleMesh mesh;
  for (const auto& elem : elements) {
    if (elem.name == "vertex") {
      mesh.vertices.resize(elem.count);
      const bool has_rest = std::any_of(elem.props.begin(), elem.props.end(),
                                        [](const Property& p) { return p.name == "rx"; });
      if (has_rest) mesh.rest_positions.resize(elem.count);
      for (size_t i = 0; i < elem.count; ++i) {
        for (const auto& p : elem.props) {
          const double v = read_scalar(p.type);
          if (p.name == "x") mesh.vertices[i].x() = v;
          else if (p.name == "y") mesh.vertices[i].y() = v;
          else if (p.name == "z") mesh.vertices[i].z() = v;
          else if (p.name == "rx") mesh.rest_positions[i].x() = v;
          else if (p.name == "ry") mesh.rest_positions[i].y() = v;
          else if (p.name == "rz") mesh.rest_positions[i].z() = v;
        }
      }
    } else if (elem.name == "face") {
      for (size_t i = 0; i < elem.count; ++i) {
        std::vector<int> idx;
        std::vector<double> uv;
        for (const auto& p : elem.props) {
          if (!p.is_list) {
            read_scalar(p.type);
            continue;
          }
          const auto n = static_cast<size_t>(read_scalar(p.count_type));
          if (p.name == "vertex_indices" || p.name == "vertex_index") {
            idx.resize(n);
            for (auto& v : idx) v = static_cast<int>(read_scalar(p.type));
          } else if (p.name == "texcoord") {
            uv.resize(n);
            for (auto& v : uv) v = read_scalar(p.type);
          } else {
            for (size_t k = 0; k < n; ++k) read_scalar(p.type);
          }
        }
        if (idx.size() < 3) throw InvalidMesh("PLY face with fewer than 3 indices");
        for (size_t k = 1; k + 1 < idx.size(); ++k) {
          mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
          if (uv.size() == 2 * idx.size()) {
            mesh.uvs.push_back({Vec2(uv[0], uv[1]), Vec2(uv[2 * k], uv[2 * k + 1]),
                                Vec2(uv[2 * k + 2], uv[2 * k + 3])});
          }
        }
      }
    } else {
      // Skip unknown fixed-size elements.
      size_t row = 0;
      bool has_list = false;
      for (const auto& p : elem.props) {
        if (p.is_list) has_list = true;
        else row += scalar_size(p.type);
      }
      if (has_list) throw InvalidMesh("unsupported list property in element " + elem.name);
      in.seekg(static_cast<std::streamoff>(row * elem.count), std::ios::cur);
    }
  }
  if (!mesh.uvs.empty() && mesh.uvs.size() != mesh.faces.size()) mesh.uvs.clear();
  validate_mesh(mesh);
  return mesh;
}

void save_ply(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidMesh("cannot write " + path);
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (mesh.has_rest())
    out << "property double rx\nproperty double ry\nproperty double rz\n";
  out << "element face " << mesh.faces.size() << "\n";
  out << "property list uchar int vertex_indices\n";
  if (mesh.has_uvs()) out << "property list uchar double texcoord\n";
  out << "end_header\n";
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    write_pod(out, mesh.vertices[i].x());
    write_pod(out, mesh.vertices[i].y());
    write_pod(out, mesh.vertices[i].z());
    if (mesh.has_rest()) {
      write_pod(out, mesh.rest_positions[i].x());
      write_pod(out, mesh.rest_positions[i].y());
      write_pod(out, mesh.rest_positions[i].z());
    }
  }
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    write_pod<uint8_t>(out, 3);
    for (int k = 0; k < 3; ++k) write_pod<int32_t>(out, mesh.faces[i][k]);
    if (mesh.has_uvs()) {
      write_pod<uint8_t>(out, 6);
      for (int k = 0; k < 3; ++k) {
        write_pod(out, mesh.uvs[i][k].x());
        write_pod(out, mesh.uvs[i][k].y());
      }
    }
  }
}

TriangleMesh load_mesh(const std::string& path) {
  const auto ext = lowercase_ext(path);
  if (ext == "obj") return load_obj(path);
  if (ext == "ply") return load_ply(path);
  throw InvalidMesh("unknown mesh extension: " + path);
}

void save_mesh(const TriangleMesh& mesh, const std::string& path) {
  const auto ext = lowercase_ext(path);
  if (ext == "obj") return save_obj(mesh, path);
  if (ext == "ply") return save_ply(mesh, path);
  throw InvalidMesh("unknown mesh extension: " + path);
}

}  // namespace ggf
