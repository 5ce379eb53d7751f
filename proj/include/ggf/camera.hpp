#pragma once

#include <string>
#include <vector>

#include "ggf/mesh.hpp"

namespace ggf {

// Pinhole camera with a rigid world-to-camera transform: x_cam = R x + t.
// Pixel (ix, iy) samples at continuous coordinate (ix + 0.5, iy + 0.5); the
// principal point (cx, cy) lives in the same convention.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  int width = 0, height = 0;
  double near_plane = 0.01;

  Vec3 center() const { return -R.transpose() * t; }
  Vec3 to_camera(const Vec3& p) const { return R * p + t; }

  void validate() const;

  // Camera at `eye` looking at `target` (camera +z toward the target).
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                        double fy, int width, int height);
};

// JSON list of {fx, fy, cx, cy, R (row-major 9), t (3), width, height}.
std::vector<Camera> load_cameras(const std::string& path);
void save_cameras(const std::vector<Camera>& cameras, const std::string& path);

}  // namespace ggf
