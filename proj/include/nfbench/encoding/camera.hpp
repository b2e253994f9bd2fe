#pragma once

// Pinhole cameras and ray parameterizations.
//
// Convention: right-handed, camera space has +x right, +y up, and the
// camera looking down -z. Pixel coordinates are continuous with +y down
// (image row 0 at the top); pass px + 0.5 for the center of pixel column px.
// Poses are camera-to-world.

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nfbench/core/tensor.hpp"

namespace nfbench {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    require(n > 0, "cannot normalize zero vector");
    return *this * (1.0 / n);
  }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit norm
};

struct Camera {
  double fx = 0, fy = 0;  // focal lengths, pixels
  double cx = 0, cy = 0;  // principal point, pixels
  int width = 0, height = 0;
  std::array<std::array<double, 3>, 3> rot{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Vec3 translation;  // camera center in world space

  Vec3 rotate(const Vec3& v) const {
    return {rot[0][0] * v.x + rot[0][1] * v.y + rot[0][2] * v.z,
            rot[1][0] * v.x + rot[1][1] * v.y + rot[1][2] * v.z,
            rot[2][0] * v.x + rot[2][1] * v.y + rot[2][2] * v.z};
  }

  bool rotation_orthonormal(double tol = 1e-6) const {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double dot = 0;
        for (int k = 0; k < 3; ++k) dot += rot[k][i] * rot[k][j];
        if (std::abs(dot - (i == j ? 1.0 : 0.0)) > tol) return false;
      }
    return true;
  }
};

// Camera positioned on a ring of given radius/elevation, looking at a target.
inline Camera look_at_camera(const Vec3& eye, const Vec3& target, double focal,
                             int width, int height) {
  Camera cam;
  cam.fx = cam.fy = focal;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.width = width;
  cam.height = height;
  Vec3 forward = (target - eye).normalized();  // camera -z axis
  Vec3 world_up{0, 1, 0};
  if (std::abs(forward.dot(world_up)) > 0.999) world_up = {1, 0, 0};
  Vec3 right = forward.cross(world_up).normalized();
  Vec3 up = right.cross(forward);
  // columns are the camera axes expressed in world space
  cam.rot = {{{right.x, up.x, -forward.x},
              {right.y, up.y, -forward.y},
              {right.z, up.z, -forward.z}}};
  cam.translation = eye;
  return cam;
}

inline Ray ray_from_pixel(const Camera& cam, double px, double py) {
  require(cam.fx != 0 && cam.fy != 0,
          "ray_from_pixel: degenerate intrinsics (zero focal length)");
  require(px >= 0 && px <= cam.width && py >= 0 && py <= cam.height,
          "ray_from_pixel: pixel (" + std::to_string(px) + "," +
              std::to_string(py) + ") outside resolution " +
              std::to_string(cam.width) + "x" + std::to_string(cam.height));
  Vec3 dir_cam{(px - cam.cx) / cam.fx, -(py - cam.cy) / cam.fy, -1.0};
  return Ray{cam.translation, cam.rotate(dir_cam).normalized()};
}

// Plucker coordinates (d, o x d): invariant to sliding the origin along the
// ray, so co-linear rays with the same direction map to the same 6-vector.
inline std::array<double, 6> plucker_from_ray(const Ray& ray) {
  require(std::abs(ray.direction.norm() - 1.0) < 1e-6,
          "plucker_from_ray: direction must be unit norm");
  Vec3 m = ray.origin.cross(ray.direction);
  return {ray.direction.x, ray.direction.y, ray.direction.z, m.x, m.y, m.z};
}

// ---------------------------------------------------------------------------
// camera fixture files: plain text, one camera per block
//
//   camera <width> <height> <fx> <fy> <cx> <cy>
//   pose   r00 r01 r02 tx   r10 r11 r12 ty   r20 r21 r22 tz
//
// (3x4 camera-to-world matrix, row-major)

inline void write_cameras(std::ostream& os, const std::vector<Camera>& cams) {
  os.precision(17);
  for (const Camera& c : cams) {
    os << "camera " << c.width << " " << c.height << " " << c.fx << " "
       << c.fy << " " << c.cx << " " << c.cy << "\n";
    os << "pose";
    const double t[3] = {c.translation.x, c.translation.y, c.translation.z};
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) os << " " << c.rot[r][k];
      os << " " << t[r];
    }
    os << "\n";
  }
}

inline std::vector<Camera> read_cameras(std::istream& is) {
  std::vector<Camera> cams;
  std::string tok;
  while (is >> tok) {
    require(tok == "camera", "camera fixture: expected 'camera', got '" + tok + "'");
    Camera c;
    require(bool(is >> c.width >> c.height >> c.fx >> c.fy >> c.cx >> c.cy),
            "camera fixture: truncated intrinsics");
    require(bool(is >> tok) && tok == "pose",
            "camera fixture: expected 'pose' record");
    double t[3];
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k)
        require(bool(is >> c.rot[r][k]), "camera fixture: truncated pose");
      require(bool(is >> t[r]), "camera fixture: truncated pose");
    }
    c.translation = {t[0], t[1], t[2]};
    require(c.rotation_orthonormal(),
            "camera fixture: rotation not orthonormal");
    cams.push_back(c);
  }
  return cams;
}

inline void write_cameras_file(const std::string& path,
                               const std::vector<Camera>& cams) {
  std::ofstream os(path);
  require(os.good(), "cannot open '" + path + "' for writing");
  write_cameras(os, cams);
}

inline std::vector<Camera> read_cameras_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open camera fixture '" + path + "'");
  return read_cameras(is);
}

}  // namespace nfbench
