// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "voxfuse/losses.hpp"
#include "voxfuse/synth.hpp"

using namespace voxfuse;

namespace {

Camera axis_camera() {
  Mat3d k;
  k << 500, 0, 320, 0, 500, 240, 0, 0, 1;
  return Camera(k, Mat3d::Identity(), Vec3d(0, 0, 0), 640, 480);
}

std::vector<Keypoints> project_all(const Pose& pose, const std::vector<Camera>& cams) {
  std::vector<Keypoints> out;
  for (const Camera& c : cams) {
    Keypoints kp;
    for (int k = 0; k < kNumJoints; ++k) kp.pixels.col(k) = project(c, Vec3d(pose.joints.col(k)));
    out.push_back(kp);
  }
  return out;
}

// Pose with bones 0->1->2 along x, used with a one- or two-bone spec.
BoneSpec chain_spec() {
  BoneSpec s;
  s.bones = {{0, 1}, {1, 2}};
  return s;
}

Pose chain(double a, double b) {
  Pose p;
  p.joints.col(1) = Vec3d(a, 0, 0);
  p.joints.col(2) = Vec3d(a + b, 0, 0);
  for (int k = 3; k < kNumJoints; ++k) p.joints.col(k) = Vec3d(0, 0, 0.1 * k);
  return p;
}

double rel_error(const JointGradient& a, const JointGradient& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-8);
}

// Central differences at two step sizes agree unless a kink lies within reach.
bool smooth_at(LossId id, const Pose& p, const LossContext& ctx, const JointGradient& num) {
  const JointGradient wide = numeric_grad(id, p, ctx, 2e-5);
  return (wide - num).norm() <= 1e-6 * num.norm() + 1e-12;
}

}  // namespace

TEST_CASE("L1 pose loss") {
  const Pose gt = oracle::plausible_pose();
  CHECK(l_pose(gt, gt) == 0.0);
  Pose shifted = gt;
  shifted.joints.colwise() += Vec3d(0.1, 0, 0);
  CHECK(l_pose(shifted, gt) == doctest::Approx(1.7).epsilon(1e-12));
  Pose one = gt;
  one.joints.col(5) += Vec3d(0.1, -0.2, 0.3);
  CHECK(l_pose(one, gt) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(l_pose(one, gt) == l_pose(gt, one));

  Pose none = gt;
  none.valid.fill(false);
  CHECK_THROWS_AS(l_pose(none, gt), Error);
}

TEST_CASE("pseudo 3D loss shares the L1 definition") {
  const Pose gt = oracle::plausible_pose();
  Pose one = gt;
  one.joints.col(5) += Vec3d(0.1, -0.2, 0.3);
  CHECK(l_3d(gt, gt) == 0.0);
  CHECK(l_3d(one, gt) == l_pose(one, gt));
  Pose pseudo = gt;
  pseudo.valid[5] = false;
  CHECK(l_3d(one, pseudo) == 0.0);
}

TEST_CASE("reprojection loss") {
  const std::vector<Camera> cams{axis_camera()};
  Pose p = oracle::plausible_pose();
  p.joints.colwise() += Vec3d(0, 0, 4);
  auto kps = project_all(p, cams);
  CHECK(l_2d<double>(p, kps, cams).value == 0.0);

  kps[0].visible.fill(false);
  kps[0].visible[0] = true;
  kps[0].pixels.col(0) += Vec2d(3, 4);
  const auto r = l_2d<double>(p, kps, cams);
  CHECK(r.value == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(r.terms == 1);

  kps[0].visible[1] = true;
  p.joints.col(1) = Vec3d(0, 0, -1);
  const auto behind = l_2d<double>(p, kps, cams);
  CHECK(behind.behind_camera == 1);
  CHECK(behind.terms == 1);

  kps[0].visible.fill(false);
  try {
    l_2d<double>(p, kps, cams);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoVisibleJoints);
  }
}

TEST_CASE("bone length limits") {
  const BoneSpec one{{{0, 1}}, {}, 0.05, 0.7};
  CHECK(l_length(chain(0.3, 0.3), chain_spec()) == 0.0);
  CHECK(l_length(chain(0.8, 0.3), one) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(l_length(chain(0.02, 0.3), one) == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(l_length(oracle::plausible_pose(), default_bone_spec()) == 0.0);
}

TEST_CASE("symmetry of mirrored bones") {
  const BoneSpec spec = default_bone_spec();
  Pose p = oracle::plausible_pose();
  CHECK(l_symm(p, spec) == 0.0);
  const Vec3d dir = Vec3d(0.1, 0, -0.24).normalized();
  p[Joint::LeftWrist] = p[Joint::LeftElbow] + 0.30 * dir;
  p[Joint::RightWrist] = p[Joint::RightElbow] + 0.25 * dir;
  CHECK(l_symm(p, spec) == doctest::Approx(0.05).epsilon(1e-12));
  Pose doubled = p;
  doubled.joints *= 2.0;
  CHECK(l_symm(doubled, spec) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("angle prior on a plausible pose") {
  const Pose p = oracle::plausible_pose();
  CHECK((forward_direction(p) - Vec3d(1, 0, 0)).norm() < 1e-12);
  CHECK(l_angle(p) == 0.0);
  const auto literal = l_angle_terms(p, AngleMode::Literal);
  CHECK(literal.head == doctest::Approx(0.08 / std::sqrt(0.08 * 0.08 + 0.17 * 0.17)).epsilon(1e-12));
  CHECK(literal.left_leg == 0.0);
  CHECK(literal.right_leg == 0.0);
}

TEST_CASE("straight and hyperextended legs") {
  Pose p = oracle::plausible_pose();
  p[Joint::LeftKnee] = (p[Joint::LeftHip] + p[Joint::LeftAnkle]) / 2;
  CHECK(l_angle_terms(p).left_leg == 0.0);

  p[Joint::LeftKnee] = Vec3d(-0.05, 0.1, 0.5);
  // Midpoint of hip and ankle is (0, 0.1, 0.505); knee-to-midpoint is (0.05, 0, 0.005).
  const double expected = 0.05 / std::sqrt(0.05 * 0.05 + 0.005 * 0.005);
  CHECK(l_angle_terms(p).left_leg == doctest::Approx(expected).epsilon(1e-12));
  CHECK(l_angle_terms(p, AngleMode::Literal).left_leg == doctest::Approx(expected).epsilon(1e-12));
  CHECK(l_angle(p) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("collinear torso is degenerate") {
  Pose p = oracle::plausible_pose();
  p[Joint::LeftShoulder] = Vec3d(0, 0, 1.6);
  p[Joint::RightShoulder] = Vec3d(0, 0, 1.3);
  try {
    l_angle(p);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateFrame);
  }
}

TEST_CASE("prior composition") {
  CHECK(combine_prior(0.1, 0.05, 0.2, PriorWeights{}) == doctest::Approx(0.35).epsilon(1e-12));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 0.2);
  Pose messy = oracle::plausible_pose();
  messy.joints += Eigen::Matrix<double, 3, kNumJoints>::NullaryExpr([&] { return n(rng); });
  const auto terms = l_prior(messy, default_bone_spec());
  CHECK(terms.total == terms.length + terms.symm + terms.angle);
  CHECK(l_prior(messy, default_bone_spec(), PriorWeights{0, 0, 0}).total == 0.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK(l_prior(sample_pose(seed), default_bone_spec()).total < 1e-9);
}

TEST_CASE("unsupervised objective") {
  const LossWeights w;  // 0.02, 1, 10, lambda 6
  CHECK(compose_unsup({10, 2.0, 0.3, 4.0}, w) == doctest::Approx(5.2).epsilon(1e-12));
  CHECK(compose_unsup({10, 2.0, 0.3, 7.0}, w) == doctest::Approx(3.2).epsilon(1e-12));
  CHECK_FALSE(pseudo3d_active({10, 2.0, 0.3, 7.0}, w));
  CHECK_FALSE(pseudo3d_active({10, std::nullopt, 0.3, 4.0}, w));
  CHECK(compose_unsup({0, 0.0, 0, 0}, w) == 0.0);
}

TEST_CASE("full objective equals its weighted components") {
  const auto cams = oracle::ring_rig(3);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 0.03);
  const Pose gt = oracle::plausible_pose();
  const auto kps = project_all(gt, cams);
  for (double unc : {2.0, 9.0}) {
    Pose pred = gt;
    pred.joints += Eigen::Matrix<double, 3, kNumJoints>::NullaryExpr([&] { return n(rng); });
    const LossWeights w;
    const UnsupReport r = l_unsup(pred, kps, cams, gt, unc, w);
    const double twod = l_2d<double>(pred, kps, cams).value;
    const double threed = l_3d(pred, gt);
    const double prior = l_prior(pred, default_bone_spec()).total;
    const double expect = w.w_2d * twod + (unc < w.lambda ? w.w_3d * threed : 0.0) + w.w_prior * prior;
    CHECK(r.l_unsup == expect);
    CHECK(r.indicator_active == (unc < w.lambda));
  }
}

TEST_CASE("rigid motions leave the prior unchanged") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 0.1);
  const BoneSpec spec = default_bone_spec();
  for (int trial = 0; trial < 50; ++trial) {
    Pose p = oracle::plausible_pose();
    p.joints += Eigen::Matrix<double, 3, kNumJoints>::NullaryExpr([&] { return n(rng); });
    const SimilarityTransform<double> t{1.0, oracle::random_rotation(rng), Vec3d(n(rng), n(rng), n(rng)) * 20};
    const Pose q = apply_similarity(t, p);
    CHECK(l_length(q, spec) == doctest::Approx(l_length(p, spec)).epsilon(1e-9));
    CHECK(l_symm(q, spec) == doctest::Approx(l_symm(p, spec)).epsilon(1e-9));
    CHECK(l_angle(q) == doctest::Approx(l_angle(p)).epsilon(1e-9));
    CHECK(l_length(p, spec) >= 0);
    CHECK(l_symm(p, spec) >= 0);
    CHECK(l_angle(p) >= 0);
  }
}

TEST_CASE("gradients vanish on flat regions") {
  const auto cams = oracle::ring_rig(3);
  const Pose p = oracle::plausible_pose();
  const auto kps = project_all(p, cams);
  LossContext ctx;
  ctx.observed = kps;
  ctx.cameras = cams;
  // Zero residuals are kinks: the central-difference fallback is only O(h) from zero.
  const GradientResult twod = grad(LossId::TwoD, p, ctx);
  CHECK(twod.used_fallback);
  CHECK(twod.gradient.cwiseAbs().maxCoeff() < 1e-3);
  CHECK(grad(LossId::Length, p, ctx).gradient.isZero(0));
  CHECK(grad(LossId::Angle, p, ctx).gradient.isZero(0));
}

TEST_CASE("analytic gradients match central differences") {
  const auto cams = oracle::ring_rig(4);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  const Pose base = oracle::plausible_pose();
  const auto kps = project_all(base, cams);

  const LossId ids[] = {LossId::Pose, LossId::TwoD, LossId::ThreeD, LossId::Length, LossId::Symm,
                        LossId::Angle, LossId::Prior, LossId::Unsup};
  for (LossId id : ids) {
    int checked = 0, fallbacks = 0;
    double worst = 0;
    for (int trial = 0; checked < 100 && trial < 400; ++trial) {
      // Large distortions so that length and angle terms are active.
      Pose p = base;
      const double spread = id == LossId::Length ? 0.35 : (id == LossId::Angle ? 0.15 : 0.05);
      p.joints += spread * Eigen::Matrix<double, 3, kNumJoints>::NullaryExpr([&] { return n(rng); });
      if (id == LossId::Length) p.joints *= 0.5 + u(rng);
      Pose target = base;
      target.joints += 0.05 * Eigen::Matrix<double, 3, kNumJoints>::NullaryExpr([&] { return n(rng); });
      LossContext ctx;
      ctx.target = &target;
      ctx.observed = kps;
      ctx.cameras = cams;
      ctx.uncertainty = u(rng) * 10;
      if (id == LossId::Angle || id == LossId::Prior || id == LossId::Unsup) ctx.mode = trial % 2 ? AngleMode::Literal : AngleMode::Corrected;
      double value;
      try {
        value = evaluate(id, p, ctx);
      } catch (const Error&) {
        continue;
      }
      if (!(value > 0)) continue;
      const GradientResult g = grad(id, p, ctx);
      if (g.used_fallback) {
        ++fallbacks;
        continue;
      }
      const JointGradient num = numeric_grad(id, p, ctx, 1e-5);
      if (!smooth_at(id, p, ctx, num)) continue;
      worst = std::max(worst, rel_error(g.gradient, num));
      ++checked;
    }
    INFO("loss " << static_cast<int>(id) << " fallbacks " << fallbacks);
    CHECK(checked == 100);
    CHECK(worst < 1e-4);
  }
}
