#include "ggf/camera.hpp"

#include <fstream>

#include <json.hpp>

namespace ggf {

void Camera::validate() const {
  if (fx <= 0 || fy <= 0 || width <= 0 || height <= 0)
    throw Error("camera intrinsics/size invalid");
  if ((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      R.determinant() < 0)
    throw Error("camera rotation is not rigid");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                       double fy, int width, int height) {
  Camera cam;
  const Vec3 fwd = (target - eye).normalized();
  Vec3 right = fwd.cross(up).normalized();
  if (right.norm() < 1e-9) right = fwd.cross(Vec3(1, 0, 0)).normalized();
  const Vec3 down = fwd.cross(right);
  cam.R.row(0) = right;
  cam.R.row(1) = down;
  cam.R.row(2) = fwd;
  cam.t = -cam.R * eye;
  cam.fx = fx;
  cam.fy = fy;
  cam.width = width;
  cam.height = height;
  cam.cx = width * 0.5;
  cam.cy = height * 0.5;
  return cam;
}

std::vector<Camera> load_cameras(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json doc;
  in >> doc;
  std::vector<Camera> cams;
  for (const auto& j : doc) {
    Camera c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    if (j.contains("near")) c.near_plane = j.at("near").get<double>();
    const auto r = j.at("R");
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) c.R(i, k) = r.at(3 * i + k).get<double>();
    const auto t = j.at("t");
    for (int i = 0; i < 3; ++i) c.t[i] = t.at(i).get<double>();
    c.validate();
    cams.push_back(c);
  }
  return cams;
}

void save_cameras(const std::vector<Camera>& cameras, const std::string& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& c : cameras) {
    nlohmann::json j;
    j["fx"] = c.fx;
    j["fy"] = c.fy;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    j["width"] = c.width;
    j["height"] = c.height;
    j["near"] = c.near_plane;
    std::vector<double> r(9);
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) r[3 * i + k] = c.R(i, k);
    j["R"] = r;
    j["t"] = {c.t[0], c.t[1], c.t[2]};
    doc.push_back(j);
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump(1) << "\n";
}

}  // namespace ggf
