#pragma once

// Pinhole camera model.
//
// Axis convention (shared by every module): camera x points right, y points
// down, z points forward. Pixels are continuous; nothing is ever rounded.

#include <cmath>

#include <Eigen/Core>

#include "ddepth/errors.hpp"

namespace ddepth {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cu = 0.0;
  double cv = 0.0;

  bool valid() const noexcept {
    return std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cu) &&
           std::isfinite(cv) && fx > 0.0 && fy > 0.0;
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cu, 0.0, fy, cv, 0.0, 0.0, 1.0;
    return k;
  }
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

struct NormalizedPixel {
  double u = 0.0;
  double v = 0.0;
};

inline Pixel project_point(const Vec3& p_cam, const CameraIntrinsics& k) {
  if (!(p_cam.z() > 0.0)) throw GeometryError("project_point: point is behind camera");
  const double inv_z = 1.0 / p_cam.z();
  return {k.fx * p_cam.x() * inv_z + k.cu, k.fy * p_cam.y() * inv_z + k.cv};
}

inline NormalizedPixel normalize_pixel(const Pixel& p, const CameraIntrinsics& k) noexcept {
  return {(p.u - k.cu) / k.fx, (p.v - k.cv) / k.fy};
}

/// Camera-frame (x, y) of a point seen at `center` with depth `z`.
inline Vec2 backproject_center(const Pixel& center, double z, const CameraIntrinsics& k) {
  if (!(z > 0.0)) throw GeometryError("backproject_center: depth must be positive");
  return {(center.u - k.cu) * z / k.fx, (center.v - k.cv) * z / k.fy};
}

}  // namespace ddepth
