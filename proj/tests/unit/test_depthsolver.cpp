#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "ddepth/depthsolver.hpp"

using namespace ddepth;

namespace {
const CameraIntrinsics kK{721.5377, 721.5377, 609.5593, 172.854};
constexpr double kPi = std::numbers::pi;

Box3D random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> z(4, 60), yaw(-kPi, kPi), u(0, 1);
  std::uniform_real_distribution<double> h(1.4, 1.8), w(1.5, 1.9), l(3.2, 4.8);
  for (;;) {
    const double zz = z(rng);
    Box3D b{Vec3((u(rng) - 0.5) * 0.8 * zz, 0.6 + 0.5 * u(rng), zz), {h(rng), w(rng), l(rng)}, yaw(rng)};
    bool ok = true;
    for (const auto& v : box_vertices_camera_frame(b)) ok = ok && v.z() > 0.1;
    if (ok) return b;
  }
}

// Noiseless observation assembled straight from the projection.
ObjectObservation observe(const Box3D& b, const CameraIntrinsics& k = kK) {
  const ProjectedBox pb = project_box(b, k);
  ObjectObservation o;
  o.center_px = pb.keypoints.center;
  o.keypoints = pb.keypoints;
  o.heights = pb.heights;
  o.dims = b.dims;
  o.yaw = b.yaw;
  o.direct_depth = b.center.z();
  return o;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }
}  // namespace

TEST(DepthSource, StableOrderAndNames) {
  EXPECT_EQ(DepthSource::direct().index(), 0U);
  EXPECT_EQ(DepthSource::height_h5().index(), 1U);
  EXPECT_EQ(DepthSource::height_h13().index(), 2U);
  EXPECT_EQ(DepthSource::height_h24().index(), 3U);
  EXPECT_EQ(DepthSource::keypoint_u(0).index(), 4U);
  EXPECT_EQ(DepthSource::keypoint_v(7).index(), 19U);
  std::set<std::string> names;
  for (std::size_t i = 0; i < kNumDepths; ++i) names.insert(DepthSource(i).name());
  EXPECT_EQ(names.size(), kNumDepths);
  EXPECT_EQ(DepthSource(0).name(), "E");
  EXPECT_EQ(DepthSource(5).name(), "U1");
  EXPECT_EQ(DepthSource(12).name(), "V0");
  EXPECT_EQ(DepthSource(2).strategy(), Strategy::Height);
  EXPECT_EQ(DepthSource(9).strategy(), Strategy::Keypoint);
}

TEST(KeypointU, HandEvaluated) {
  const NormalizedPixel kp{2.0 / 11, 1.0 / 11}, c{0, 0};
  const auto z = depth_from_keypoint_u(kp, c, Vec3(2, 1, 1), 0);
  ASSERT_TRUE(z);
  EXPECT_NEAR(*z, 10, 1e-12);
}

TEST(KeypointU, CenterColumnIsDegenerate) {
  const NormalizedPixel c{0.1, 0.2};
  EXPECT_FALSE(depth_from_keypoint_u({0.1, 0.5}, c, Vec3(0, 1, 0), 0.4));
  EXPECT_FALSE(depth_from_keypoint_u({0.1, 0.5}, c, Vec3(0, 1, 0), -2.0));
}

TEST(KeypointV, HandEvaluated) {
  const NormalizedPixel kp{2.0 / 11, 1.0 / 11}, c{0, 0};
  const auto z = depth_from_keypoint_v(kp, c, Vec3(2, 1, 1), 0);
  ASSERT_TRUE(z);
  EXPECT_NEAR(*z, 10, 1e-12);
  EXPECT_FALSE(depth_from_keypoint_v({0.3, 0.0}, c, Vec3(2, 0, 1), 0.0));
}

TEST(KeypointUV, NoiselessRoundTripAllVertices) {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 2000; ++n) {
    const Box3D b = random_box(rng);
    const ProjectedBox pb = project_box(b, kK);
    const auto c = normalize_pixel(pb.keypoints.center, kK);
    for (std::size_t i = 0; i < kNumVertices; ++i) {
      const auto kp = normalize_pixel(pb.keypoints.vertices[i], kK);
      const Vec3 vo = box_vertex_object_frame(b.dims, i);
      if (const auto z = depth_from_keypoint_u(kp, c, vo, b.yaw)) EXPECT_LT(rel(*z, b.center.z()), 1e-6);
      if (const auto z = depth_from_keypoint_v(kp, c, vo, b.yaw)) EXPECT_LT(rel(*z, b.center.z()), 1e-6);
    }
  }
}

TEST(Height, Examples) {
  EXPECT_NEAR(*depth_from_height(2, 140, 700), 10, 1e-12);
  EXPECT_NEAR(*depth_from_height(1.5, 70, 700), 15, 1e-12);
  EXPECT_NEAR(*depth_from_height(1.5, 140, 700), 0.5 * *depth_from_height(1.5, 70, 700), 1e-12);
  EXPECT_FALSE(depth_from_height(1.5, 0.4, 700));
  EXPECT_FALSE(depth_from_height(1.5, -10, 700));
}

TEST(Height, Monotonicity) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> hp(1, 500), hh(0.5, 4);
  for (int i = 0; i < 1000; ++i) {
    const double a = hp(rng), h = hh(rng);
    EXPECT_GT(*depth_from_height(h, a, 700), *depth_from_height(h, a * 1.01, 700));
    EXPECT_LT(*depth_from_height(h, a, 700), *depth_from_height(h * 1.01, a, 700));
  }
}

TEST(CornerPair, Examples) {
  EXPECT_NEAR(*depth_from_corner_pair(2, 140, 140, 700), *depth_from_height(2, 140, 700), 1e-12);
  EXPECT_NEAR(*depth_from_corner_pair(2, 175, 116.6667, 700), 10, 1e-5);
  EXPECT_FALSE(depth_from_corner_pair(2, 175, 0, 700));
}

TEST(CornerPair, NoiselessAnyYaw) {
  std::mt19937_64 rng(13);
  for (int n = 0; n < 2000; ++n) {
    const Box3D b = random_box(rng);
    const auto pb = project_box(b, kK);
    const auto z13 = depth_from_corner_pair(b.dims.h, pb.heights.corner[0], pb.heights.corner[2], kK.fy);
    const auto z24 = depth_from_corner_pair(b.dims.h, pb.heights.corner[1], pb.heights.corner[3], kK.fy);
    ASSERT_TRUE(z13 && z24);
    EXPECT_LT(rel(*z13, b.center.z()), 1e-12);
    EXPECT_LT(rel(*z24, b.center.z()), 1e-12);
  }
}

TEST(SolveAll, NoiselessAllValidEstimatesExact) {
  std::mt19937_64 rng(14);
  for (int n = 0; n < 5000; ++n) {
    const Box3D b = random_box(rng);
    const auto est = solve_all(observe(b), kK);
    ASSERT_EQ(est.size(), kNumDepths);
    for (std::size_t i = 0; i < kNumDepths; ++i) {
      EXPECT_EQ(est[i].source.index(), i);
      if (est[i].valid) EXPECT_LT(rel(est[i].value, b.center.z()), 1e-6) << DepthSource(i).name();
    }
  }
}

TEST(SolveAll, CenterColumnOnVertexInvalidatesOnlyThatU) {
  const Box3D b{Vec3(1.2, 1.0, 20), {1.5, 1.6, 4.0}, 0.6};
  ObjectObservation o = observe(b);
  const auto before = solve_all(o, kK);
  o.keypoints.vertices[3].u = o.center_px.u;
  const auto after = solve_all(o, kK);
  ASSERT_EQ(after.size(), kNumDepths);
  for (std::size_t i = 0; i < kNumDepths; ++i) {
    if (i == DepthSource::keypoint_u(3).index()) {
      EXPECT_FALSE(after[i].valid);
    } else if (i == DepthSource::keypoint_v(3).index()) {
      continue;  // same keypoint, different coordinate
    } else {
      EXPECT_EQ(after[i].valid, before[i].valid);
      EXPECT_EQ(after[i].value, before[i].value);
    }
  }
}

TEST(SolveAll, DegeneracyIsolation) {
  const Box3D b{Vec3(-2.0, 1.0, 25), {1.6, 1.7, 4.2}, -0.9};
  const ObjectObservation base = observe(b);
  const auto ref = solve_all(base, kK);
  for (std::size_t i = 0; i < kNumDepths; ++i) ASSERT_TRUE(ref[i].valid);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t v = 0; v < kNumVertices; ++v) {
    ObjectObservation o = base;
    o.keypoints.vertices[v] = {nan, nan};
    const auto e = solve_all(o, kK);
    for (std::size_t i = 0; i < kNumDepths; ++i) {
      const bool depends = i == DepthSource::keypoint_u(v).index() || i == DepthSource::keypoint_v(v).index();
      EXPECT_EQ(e[i].valid, !depends);
      if (!depends) EXPECT_EQ(e[i].value, ref[i].value);
    }
  }
  for (std::size_t line = 0; line < kNumCornerLines; ++line) {
    ObjectObservation o = base;
    o.heights.corner[line] = 0.0;
    const auto e = solve_all(o, kK);
    const std::size_t hit = (line % 2 == 0) ? 2 : 3;
    for (std::size_t i = 0; i < kNumDepths; ++i) {
      EXPECT_EQ(e[i].valid, i != hit);
      if (i != hit) EXPECT_EQ(e[i].value, ref[i].value);
    }
  }
  {
    ObjectObservation o = base;
    o.heights.center = 0.1;
    const auto e = solve_all(o, kK);
    for (std::size_t i = 0; i < kNumDepths; ++i) EXPECT_EQ(e[i].valid, i != 1);
  }
  {
    ObjectObservation o = base;
    o.direct_depth = -3;
    const auto e = solve_all(o, kK);
    for (std::size_t i = 0; i < kNumDepths; ++i) EXPECT_EQ(e[i].valid, i != 0);
  }
}

TEST(SolveAll, SuppliedSigmasAreCarried) {
  const Box3D b{Vec3(0.5, 1.0, 15), {1.5, 1.6, 4.0}, 0.2};
  ObjectObservation o = observe(b);
  std::array<double, kNumDepths> s{};
  for (std::size_t i = 0; i < kNumDepths; ++i) s[i] = 0.1 * static_cast<double>(i + 1);
  s[7] = 0.0;
  o.estimate_sigmas = s;
  const auto e = solve_all(o, kK);
  for (std::size_t i = 0; i < kNumDepths; ++i) {
    EXPECT_EQ(e[i].sigma, s[i]);
    EXPECT_EQ(e[i].valid, i != 7);
  }
}

TEST(Pnp, NoiselessEightVertices) {
  std::mt19937_64 rng(15);
  for (int n = 0; n < 2000; ++n) {
    const Box3D b = random_box(rng);
    const Vec3 t = pnp_from_observation(observe(b), kK);
    EXPECT_LT((t - b.center).norm() / b.center.norm(), 1e-8);
  }
}

TEST(Pnp, TwoKeypointsExact) {
  const Box3D b{Vec3(-1.5, 1.1, 18), {1.5, 1.6, 4.0}, 1.1};
  const auto pb = project_box(b, kK);
  std::array<KeypointCorrespondence, 2> pairs = {
      KeypointCorrespondence{pb.keypoints.vertices[0], box_vertex_object_frame(b.dims, 0)},
      KeypointCorrespondence{pb.keypoints.vertices[6], box_vertex_object_frame(b.dims, 6)}};
  const Vec3 t = pnp_least_squares(pairs, b.yaw, kK);
  EXPECT_LT((t - b.center).norm(), 1e-9 * b.center.norm());
}

TEST(Pnp, SingleKeypointIsDegenerate) {
  const Box3D b{Vec3(0, 1, 18), {1.5, 1.6, 4.0}, 0.0};
  const auto pb = project_box(b, kK);
  std::array<KeypointCorrespondence, 1> one = {
      KeypointCorrespondence{pb.keypoints.vertices[0], box_vertex_object_frame(b.dims, 0)}};
  try {
    pnp_least_squares(one, b.yaw, kK);
    FAIL() << "expected an error";
  } catch (const GeometryError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate PnP configuration"), std::string::npos);
  }
}

TEST(Pnp, AgreesWithPerKeypointDepthsOnNoiselessData) {
  std::mt19937_64 rng(16);
  for (int n = 0; n < 500; ++n) {
    const Box3D b = random_box(rng);
    const auto o = observe(b);
    const double z_pnp = pnp_from_observation(o, kK).z();
    for (const auto& e : solve_all(o, kK))
      if (e.valid && e.source.strategy() == Strategy::Keypoint) EXPECT_LT(rel(e.value, z_pnp), 1e-6);
  }
}
