#pragma once

// Cuboid geometry: object frame, yaw rotation, keypoint layout and the
// vertical-line pixel heights used by depth-from-height.
//
// Object frame: origin at the geometric center of the box, x along the
// length, y along the height (down, like the camera), z along the width.
// Roll and pitch are always zero.
//
// Vertex layout. Vertex i has
//   index = 4 * ybit + 2 * xbit + zbit,
// where a 0 bit selects the positive half-extent and a 1 bit the negative one:
//   x = (xbit ? -l/2 : +l/2), y = (ybit ? -h/2 : +h/2), z = (zbit ? -w/2 : +w/2).
// Vertices 0..3 therefore lie on the bottom face (y = +h/2) and 4..7 on the
// top face (y = -h/2). Vertex i and vertex i ^ 7 are central reflections.
//
// Corner vertical lines are numbered cyclically around the footprint, so that
// line j and line (j + 2) mod 4 are diagonal partners:
//   line 0 (H1): footprint (+x, +z)   vertices 0 / 4
//   line 1 (H2): footprint (+x, -z)   vertices 1 / 5
//   line 2 (H3): footprint (-x, -z)   vertices 3 / 7
//   line 3 (H4): footprint (-x, +z)   vertices 2 / 6
// H5 is the center vertical line from the top center (0, -h/2, 0) to the
// bottom center (0, +h/2, 0).

#include <array>
#include <cmath>
#include <numbers>
#include <utility>

#include "ddepth/camera.hpp"

namespace ddepth {

struct Dimensions {
  double h = 1.0;
  double w = 1.0;
  double l = 1.0;

  bool valid() const noexcept {
    return std::isfinite(h) && std::isfinite(w) && std::isfinite(l) && h > 0.0 && w > 0.0 &&
           l > 0.0;
  }
};

struct Box3D {
  Vec3 center = Vec3::Zero();  // geometric center, camera frame
  Dimensions dims;
  double yaw = 0.0;
};

inline constexpr std::size_t kNumVertices = 8;
inline constexpr std::size_t kNumCornerLines = 4;

struct ObjectKeypoints {
  std::array<Pixel, kNumVertices> vertices{};
  Pixel top_center;
  Pixel bottom_center;
  Pixel center;  // projection of the 3D geometric center
};

struct VerticalHeights {
  std::array<double, kNumCornerLines> corner{};  // H1..H4
  double center = 0.0;                           // H5
};

struct ProjectedBox {
  ObjectKeypoints keypoints;
  VerticalHeights heights;
};

/// Rotation about the camera y axis by `theta`.
inline Mat3 rotation_matrix(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat3 r;
  r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return r;
}

inline Vec3 box_vertex_object_frame(const Dimensions& dims, std::size_t index) {
  const double x = (index & 2U) ? -0.5 * dims.l : 0.5 * dims.l;
  const double y = (index & 4U) ? -0.5 * dims.h : 0.5 * dims.h;
  const double z = (index & 1U) ? -0.5 * dims.w : 0.5 * dims.w;
  return {x, y, z};
}

inline std::array<Vec3, kNumVertices> box_vertices_object_frame(const Dimensions& dims) {
  std::array<Vec3, kNumVertices> out;
  for (std::size_t i = 0; i < kNumVertices; ++i) out[i] = box_vertex_object_frame(dims, i);
  return out;
}

/// (top vertex, bottom vertex) of corner line `line` in [0, 4).
inline constexpr std::pair<std::size_t, std::size_t> corner_line_vertices(std::size_t line) {
  constexpr std::array<std::size_t, kNumCornerLines> footprint = {0, 1, 3, 2};
  return {footprint[line] + 4, footprint[line]};
}

inline constexpr std::size_t diagonal_corner_line(std::size_t line) { return (line + 2) % 4; }

inline Vec3 object_to_camera(const Vec3& p_obj, const Box3D& box) {
  return rotation_matrix(box.yaw) * p_obj + box.center;
}

inline std::array<Vec3, kNumVertices> box_vertices_camera_frame(const Box3D& box) {
  const Mat3 r = rotation_matrix(box.yaw);
  std::array<Vec3, kNumVertices> out;
  for (std::size_t i = 0; i < kNumVertices; ++i)
    out[i] = r * box_vertex_object_frame(box.dims, i) + box.center;
  return out;
}

inline ProjectedBox project_box(const Box3D& box, const CameraIntrinsics& k) {
  const auto cam = box_vertices_camera_frame(box);
  for (const auto& p : cam)
    if (!(p.z() > 0.0)) throw GeometryError("project_box: box not fully projectable");

  ProjectedBox out;
  auto& kp = out.keypoints;
  for (std::size_t i = 0; i < kNumVertices; ++i) kp.vertices[i] = project_point(cam[i], k);
  const double half_h = 0.5 * box.dims.h;
  kp.top_center = project_point(object_to_camera(Vec3(0.0, -half_h, 0.0), box), k);
  kp.bottom_center = project_point(object_to_camera(Vec3(0.0, half_h, 0.0), box), k);
  kp.center = project_point(box.center, k);

  for (std::size_t j = 0; j < kNumCornerLines; ++j) {
    const auto [top, bottom] = corner_line_vertices(j);
    out.heights.corner[j] = kp.vertices[bottom].v - kp.vertices[top].v;
  }
  out.heights.center = kp.bottom_center.v - kp.top_center.v;
  return out;
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

enum class AngleDirection { AlphaToYaw, YawToAlpha };

/// KITTI observation angle <-> yaw: theta = alpha + atan2(x, z).
inline double alpha_yaw_convert(double angle, double x, double z, AngleDirection dir) {
  const double ray = std::atan2(x, z);
  return wrap_angle(dir == AngleDirection::AlphaToYaw ? angle + ray : angle - ray);
}

inline double yaw_from_alpha(double alpha, double x, double z) {
  return alpha_yaw_convert(alpha, x, z, AngleDirection::AlphaToYaw);
}

inline double alpha_from_yaw(double theta, double x, double z) {
  return alpha_yaw_convert(theta, x, z, AngleDirection::YawToAlpha);
}

}  // namespace ddepth
