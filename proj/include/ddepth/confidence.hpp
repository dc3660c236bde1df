#pragma once

// Uncertainty-aware losses and the 3D geometry confidence.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>

#include "ddepth/camera.hpp"
#include "ddepth/combiner.hpp"

namespace ddepth {

/// |p - p*| / sigma + log(sigma). Minimized over sigma at sigma = |p - p*|.
inline double uncertainty_loss(double p, double p_star, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("uncertainty_loss: sigma must be positive");
  return std::abs(p - p_star) / sigma + std::log(sigma);
}

/// Per-vertex distance used by the box loss. L1 is the default.
enum class VertexNorm { L1, L2 };

inline double vertex_distance(const Vec3& a, const Vec3& b, VertexNorm norm = VertexNorm::L1) {
  const Vec3 d = a - b;
  return norm == VertexNorm::L1 ? d.lpNorm<1>() : d.norm();
}

inline double box_uncertainty_loss(std::span<const Vec3> vertices, std::span<const Vec3> gt,
                                   double sigma_b, VertexNorm norm = VertexNorm::L1) {
  if (!(sigma_b > 0.0)) throw std::invalid_argument("box_uncertainty_loss: sigma must be positive");
  if (vertices.size() != 8 || gt.size() != 8)
    throw std::invalid_argument("box_uncertainty_loss: expected 8 vertices");
  double total = 0.0;
  for (std::size_t i = 0; i < 8; ++i) total += vertex_distance(vertices[i], gt[i], norm);
  return total / sigma_b + std::log(sigma_b);
}

/// d = 1 - min(sigma^2, 1).
inline double confidence_from_variance(double sigma_sq) {
  if (!(sigma_sq >= 0.0)) throw std::invalid_argument("confidence_from_variance: negative variance");
  return 1.0 - std::min(sigma_sq, 1.0);
}

/// Variance-weighted blend of the combined-depth and box confidences.
inline double conditional_3d_confidence(double sigma_c_sq, double sigma_b_sq) {
  if (!(sigma_c_sq > 0.0) || !(sigma_b_sq > 0.0))
    throw std::invalid_argument("conditional_3d_confidence: variances must be positive");
  const std::array<double, 2> vars = {sigma_c_sq, sigma_b_sq};
  const auto w = fusion_weights(vars);
  const double p = w[0] * confidence_from_variance(sigma_c_sq) + w[1] * confidence_from_variance(sigma_b_sq);
  return std::clamp(p, 0.0, 1.0);
}

inline double detection_confidence(double p_3d_given_2d, double p_2d) {
  const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(p_3d_given_2d) || !in_unit(p_2d))
    throw std::invalid_argument("detection_confidence: probabilities must lie in [0, 1]");
  return p_3d_given_2d * p_2d;
}

struct ConfidenceBreakdown {
  double d_c = 0.0;
  double d_b = 0.0;
  double p_3d_given_2d = 0.0;
  double p_2d = 0.0;
  double p_m = 0.0;
};

inline ConfidenceBreakdown geometry_confidence(double sigma_c_sq, double sigma_b_sq, double p_2d) {
  ConfidenceBreakdown c;
  c.d_c = confidence_from_variance(sigma_c_sq);
  c.d_b = confidence_from_variance(sigma_b_sq);
  c.p_3d_given_2d = conditional_3d_confidence(sigma_c_sq, sigma_b_sq);
  c.p_2d = p_2d;
  c.p_m = detection_confidence(c.p_3d_given_2d, p_2d);
  return c;
}

}  // namespace ddepth
