#pragma once

// The 20-way depth solving system.
//
// Every object yields 20 candidate depths in a fixed order, so experiment
// configs can reference strategies by index:
//    0       E    direct depth (passthrough of the observation)
//    1       H5   depth from the center vertical line
//    2       H13  mean of the depths from corner lines H1 and H3
//    3       H24  mean of the depths from corner lines H2 and H4
//    4..11   U0..U7   keypoint column equation for vertex 0..7
//    12..19  V0..V7   keypoint row equation for vertex 0..7
//
// Keypoint depths come from substituting the center back-projection
// x = u_c z, y = v_c z (normalized coordinates) into the per-keypoint
// projection constraint, leaving one unknown per equation:
//   (u - u_c) z = A u + x_o cos(theta) + z_o sin(theta)
//   (v - v_c) z = A v + y_o
//   A = x_o sin(theta) - z_o cos(theta)

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "ddepth/boxgeom.hpp"
#include "ddepth/camera.hpp"

namespace ddepth {

inline constexpr std::size_t kNumDepths = 20;

/// Degeneracy thresholds. Below these the estimate is marked invalid.
inline constexpr double kMinNormalizedOffset = 1e-6;
inline constexpr double kMinPixelHeight = 0.5;

enum class Strategy : std::uint8_t { Direct, Height, Keypoint };

/// Stable index into the 20 candidate depths.
class DepthSource {
 public:
  constexpr DepthSource() = default;
  constexpr explicit DepthSource(std::size_t index) : index_(static_cast<std::uint8_t>(index)) {}

  static constexpr DepthSource direct() { return DepthSource(0); }
  static constexpr DepthSource height_h5() { return DepthSource(1); }
  static constexpr DepthSource height_h13() { return DepthSource(2); }
  static constexpr DepthSource height_h24() { return DepthSource(3); }
  static constexpr DepthSource keypoint_u(std::size_t vertex) { return DepthSource(4 + vertex); }
  static constexpr DepthSource keypoint_v(std::size_t vertex) { return DepthSource(12 + vertex); }

  constexpr std::size_t index() const { return index_; }

  constexpr Strategy strategy() const {
    if (index_ == 0) return Strategy::Direct;
    if (index_ < 4) return Strategy::Height;
    return Strategy::Keypoint;
  }

  constexpr bool is_keypoint_u() const { return index_ >= 4 && index_ < 12; }
  constexpr bool is_keypoint_v() const { return index_ >= 12 && index_ < 20; }
  constexpr std::size_t vertex() const { return is_keypoint_u() ? index_ - 4U : index_ - 12U; }

  std::string name() const {
    switch (index_) {
      case 0: return "E";
      case 1: return "H5";
      case 2: return "H13";
      case 3: return "H24";
      default: return (is_keypoint_u() ? "U" : "V") + std::to_string(vertex());
    }
  }

  friend constexpr bool operator==(DepthSource, DepthSource) = default;
  friend constexpr auto operator<=>(DepthSource, DepthSource) = default;

 private:
  std::uint8_t index_ = 0;
};

/// Standard deviations of the observed quantities (what a detector would report).
struct ObservationSigmas {
  double center = 0.0;    // pixels
  double keypoint = 0.0;  // pixels
  double height = 0.0;    // pixels
  Dimensions dims{0.0, 0.0, 0.0};  // meters, per component
  double yaw = 0.0;           // radians
  double direct_depth = 0.0;  // meters
};

/// Per-object quantities that a monocular detector regresses.
struct ObjectObservation {
  Pixel center_px;  // projected 3D center
  ObjectKeypoints keypoints;
  VerticalHeights heights;
  Dimensions dims;
  double yaw = 0.0;
  double direct_depth = 0.0;
  ObservationSigmas sigmas;
  double heatmap_score = 1.0;
  /// Per-estimate standard deviations, when supplied directly.
  std::optional<std::array<double, kNumDepths>> estimate_sigmas;
  /// Extra per-estimate spread declared by an honest corruption (meters).
  std::array<double, kNumDepths> sigma_inflation{};
};

struct DepthEstimate {
  double value = 0.0;
  double sigma = 0.0;
  DepthSource source;
  bool valid = false;
};

using DepthEstimates = std::array<DepthEstimate, kNumDepths>;

namespace detail {
inline std::optional<double> positive_depth(double z) {
  if (std::isfinite(z) && z > 0.0) return z;
  return std::nullopt;
}
}  // namespace detail

inline std::optional<double> depth_from_keypoint_u(const NormalizedPixel& kp,
                                                   const NormalizedPixel& center,
                                                   const Vec3& vertex_obj, double theta) {
  const double denom = kp.u - center.u;
  if (!(std::abs(denom) >= kMinNormalizedOffset)) return std::nullopt;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double a = vertex_obj.x() * s - vertex_obj.z() * c;
  return detail::positive_depth((a * kp.u + vertex_obj.x() * c + vertex_obj.z() * s) / denom);
}

inline std::optional<double> depth_from_keypoint_v(const NormalizedPixel& kp,
                                                   const NormalizedPixel& center,
                                                   const Vec3& vertex_obj, double theta) {
  const double denom = kp.v - center.v;
  if (!(std::abs(denom) >= kMinNormalizedOffset)) return std::nullopt;
  const double a = vertex_obj.x() * std::sin(theta) - vertex_obj.z() * std::cos(theta);
  return detail::positive_depth((a * kp.v + vertex_obj.y()) / denom);
}

inline std::optional<double> depth_from_height(double h_phys, double h_pix, double fy) {
  if (!(h_pix >= kMinPixelHeight) || !(h_phys > 0.0)) return std::nullopt;
  return detail::positive_depth(fy * h_phys / h_pix);
}

/// Average of the depths implied by two diagonally opposite corner lines.
inline std::optional<double> depth_from_corner_pair(double h_phys, double h_pix_a,
                                                    double h_pix_b, double fy) {
  const auto za = depth_from_height(h_phys, h_pix_a, fy);
  const auto zb = depth_from_height(h_phys, h_pix_b, fy);
  if (!za || !zb) return std::nullopt;
  return 0.5 * (*za + *zb);
}

/// Placeholder spread for estimates when the observation supplies none;
/// replace via assign_sigmas before fusing.
inline constexpr double kUnassignedSigma = 1.0;

inline DepthEstimates solve_all(const ObjectObservation& obs, const CameraIntrinsics& k) {
  DepthEstimates out;
  std::array<std::optional<double>, kNumDepths> z;

  z[0] = detail::positive_depth(obs.direct_depth);
  z[1] = depth_from_height(obs.dims.h, obs.heights.center, k.fy);
  z[2] = depth_from_corner_pair(obs.dims.h, obs.heights.corner[0], obs.heights.corner[2], k.fy);
  z[3] = depth_from_corner_pair(obs.dims.h, obs.heights.corner[1], obs.heights.corner[3], k.fy);

  const NormalizedPixel c = normalize_pixel(obs.center_px, k);
  for (std::size_t i = 0; i < kNumVertices; ++i) {
    const NormalizedPixel kp = normalize_pixel(obs.keypoints.vertices[i], k);
    const Vec3 vo = box_vertex_object_frame(obs.dims, i);
    z[DepthSource::keypoint_u(i).index()] = depth_from_keypoint_u(kp, c, vo, obs.yaw);
    z[DepthSource::keypoint_v(i).index()] = depth_from_keypoint_v(kp, c, vo, obs.yaw);
  }

  for (std::size_t i = 0; i < kNumDepths; ++i) {
    auto& e = out[i];
    e.source = DepthSource(i);
    e.sigma = obs.estimate_sigmas ? (*obs.estimate_sigmas)[i] : kUnassignedSigma;
    e.valid = z[i].has_value() && std::isfinite(e.sigma) && e.sigma > 0.0;
    e.value = z[i].value_or(0.0);
  }
  return out;
}

struct KeypointCorrespondence {
  Pixel pixel;
  Vec3 object_point;
};

/// Coupled least-squares solve of the translation from keypoint correspondences
/// (the classic PnP baseline with known yaw). Uses a rank-revealing QR.
inline Vec3 pnp_least_squares(std::span<const KeypointCorrespondence> pairs, double theta,
                              const CameraIntrinsics& k) {
  if (pairs.size() < 2) throw GeometryError("degenerate PnP configuration: need >= 2 keypoints");
  const Eigen::Index rows = static_cast<Eigen::Index>(2 * pairs.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, 3);
  Eigen::VectorXd rhs(rows);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const NormalizedPixel n = normalize_pixel(pairs[i].pixel, k);
    const Vec3& p = pairs[i].object_point;
    const double a = p.x() * s - p.z() * c;
    const auto r = static_cast<Eigen::Index>(2 * i);
    m(r, 0) = -1.0;
    m(r, 2) = n.u;
    rhs(r) = n.u * a + p.x() * c + p.z() * s;
    m(r + 1, 1) = -1.0;
    m(r + 1, 2) = n.v;
    rhs(r + 1) = n.v * a + p.y();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw GeometryError("degenerate PnP configuration");
  return qr.solve(rhs);
}

/// PnP over the 8 box vertices of an observation.
inline Vec3 pnp_from_observation(const ObjectObservation& obs, const CameraIntrinsics& k) {
  std::array<KeypointCorrespondence, kNumVertices> pairs;
  for (std::size_t i = 0; i < kNumVertices; ++i)
    pairs[i] = {obs.keypoints.vertices[i], box_vertex_object_frame(obs.dims, i)};
  return pnp_least_squares(pairs, obs.yaw, k);
}

}  // namespace ddepth
