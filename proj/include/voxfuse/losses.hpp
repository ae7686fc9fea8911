// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Supervised, unsupervised and human-prior losses over SkeletonPose.
//
// Evaluators are templated on the scalar type. Analytic gradients for double
// live in losses.cpp.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>

#include "voxfuse/error.hpp"
#include "voxfuse/geom.hpp"
#include "voxfuse/skeleton.hpp"

namespace voxfuse {

/// Weights of the unsupervised objective.
struct LossWeights {
  double w_2d = 0.02;
  double w_3d = 1.0;
  double w_prior = 10.0;
  double lambda = 6.0;  // entropy threshold, nats

  void validate() const {
    if (w_2d < 0 || w_3d < 0 || w_prior < 0 || lambda < 0)
      throw Error(Errc::InvalidArgument, "loss weights must be nonnegative");
  }
};

/// Sub-weights of the prior: length, symmetry, angle.
struct PriorWeights {
  double length = 1.0;
  double symm = 1.0;
  double angle = 1.0;
};

/// Sign convention for the head term of the angle prior.
///
/// The forward vector (neck->midhip) x (neck->left shoulder) points out of the
/// chest. `Corrected` penalises a nose behind the torso plane; `Literal`
/// penalises the nose in front of it, as the formula is commonly printed.
/// The leg terms are identical in both modes: forward . unit(knee -> midpoint of
/// hip and ankle), which is nonpositive whenever the knee bends forward.
enum class AngleMode { Corrected, Literal };

namespace detail {

template <typename Scalar>
Scalar clip01(Scalar x) {
  return std::min(std::max(x, Scalar(0)), Scalar(1));
}

template <typename Scalar>
Scalar l1_sum(const SkeletonPose<Scalar>& a, const SkeletonPose<Scalar>& b) {
  using std::abs;
  Scalar total(0);
  int used = 0;
  for (int k = 0; k < kNumJoints; ++k) {
    if (!a.valid[k] || !b.valid[k]) continue;
    total += (a.joints.col(k) - b.joints.col(k)).cwiseAbs().sum();
    ++used;
  }
  if (used == 0) throw Error(Errc::NoValidJoints, "no mutually valid joints");
  return total;
}

}  // namespace detail

/// Sum over valid joints of the per-joint L1 distance.
template <typename Scalar>
Scalar l_pose(const SkeletonPose<Scalar>& pred, const SkeletonPose<Scalar>& gt) {
  return detail::l1_sum(pred, gt);
}

/// Same contract as l_pose with a pseudo-label target.
template <typename Scalar>
Scalar l_3d(const SkeletonPose<Scalar>& pred, const SkeletonPose<Scalar>& pseudo) {
  return detail::l1_sum(pred, pseudo);
}

template <typename Scalar>
struct ReprojectionLoss {
  Scalar value = Scalar(0);
  int terms = 0;           // (view, joint) pairs summed
  int behind_camera = 0;   // visible pairs skipped because of non-positive depth
};

/// Sum over views and visible joints of the Euclidean pixel residual.
template <typename Scalar>
ReprojectionLoss<Scalar> l_2d(const SkeletonPose<Scalar>& pred, std::span<const Keypoints2D<Scalar>> observed,
                              std::span<const CameraModel<Scalar>> cameras) {
  if (observed.empty()) throw Error(Errc::NoViews, "l_2d needs at least one view");
  if (observed.size() != cameras.size()) throw Error(Errc::InvalidArgument, "views and cameras differ in count");
  ReprojectionLoss<Scalar> out;
  for (std::size_t v = 0; v < observed.size(); ++v) {
    for (int k = 0; k < kNumJoints; ++k) {
      if (!observed[v].visible[k] || !pred.valid[k]) continue;
      auto px = try_project(cameras[v], Vec3<Scalar>(pred.joints.col(k)));
      if (!px) {
        ++out.behind_camera;
        continue;
      }
      out.value += (*px - observed[v].pixels.col(k)).norm();
      ++out.terms;
    }
  }
  if (out.terms == 0) throw Error(Errc::NoVisibleJoints, "no visible (view, joint) pair");
  return out;
}

template <typename Scalar>
Scalar bone_length(const SkeletonPose<Scalar>& pose, std::pair<int, int> bone) {
  return (pose.point(bone.second) - pose.point(bone.first)).norm();
}

template <typename Scalar>
bool bone_valid(const SkeletonPose<Scalar>& pose, std::pair<int, int> bone) {
  return pose.point_valid(bone.first) && pose.point_valid(bone.second);
}

/// Penalises bone lengths outside [l_min, l_max].
template <typename Scalar>
Scalar l_length(const SkeletonPose<Scalar>& pose, const BoneSpec& spec) {
  Scalar total(0);
  for (const auto& bone : spec.bones) {
    if (!bone_valid(pose, bone)) continue;
    const Scalar len = bone_length(pose, bone);
    total += std::max(len - Scalar(spec.l_max), Scalar(0)) + std::max(Scalar(spec.l_min) - len, Scalar(0));
  }
  return total;
}

/// Absolute length difference summed once per mirrored bone pair.
template <typename Scalar>
Scalar l_symm(const SkeletonPose<Scalar>& pose, const BoneSpec& spec) {
  using std::abs;
  Scalar total(0);
  for (auto [i, j] : spec.symmetric) {
    const auto& a = spec.bones[i];
    const auto& b = spec.bones[j];
    if (!bone_valid(pose, a) || !bone_valid(pose, b)) continue;
    total += abs(bone_length(pose, a) - bone_length(pose, b));
  }
  return total;
}

template <typename Scalar>
struct AngleTerms {
  Scalar head = Scalar(0);
  Scalar left_leg = Scalar(0);
  Scalar right_leg = Scalar(0);
  Scalar total() const { return head + left_leg + right_leg; }
};

/// Forward direction of the torso: unit(neck->midhip) x unit(neck->left shoulder).
template <typename Scalar>
Vec3<Scalar> forward_direction(const SkeletonPose<Scalar>& pose) {
  const Vec3<Scalar> neck = pose.neck();
  const Vec3<Scalar> down = pose.midhip() - neck;
  const Vec3<Scalar> left = pose[Joint::LeftShoulder] - neck;
  const Scalar dn = down.norm();
  const Scalar ln = left.norm();
  if (!(dn > Scalar(0)) || !(ln > Scalar(0))) throw Error(Errc::DegenerateFrame, "torso vectors have zero length");
  const Vec3<Scalar> f = (down / dn).cross(left / ln);
  if (!(f.norm() >= Scalar(1e-9))) throw Error(Errc::DegenerateFrame, "collinear torso");
  return f;
}

template <typename Scalar>
AngleTerms<Scalar> l_angle_terms(const SkeletonPose<Scalar>& pose, AngleMode mode = AngleMode::Corrected) {
  using J = Joint;
  if (!pose.point_valid(kNeck) || !pose.point_valid(kMidHip))
    throw Error(Errc::InvalidArgument, "angle prior needs valid shoulders and hips");
  const Vec3<Scalar> fwd = forward_direction(pose);
  const Vec3<Scalar> neck = pose.neck();
  AngleTerms<Scalar> out;

  if (pose.valid[idx(J::Nose)]) {
    const Vec3<Scalar> n = pose[J::Nose] - neck;
    const Scalar len = n.norm();
    if (len > Scalar(0)) {
      const Scalar dot = fwd.dot(n / len);
      out.head = detail::clip01(mode == AngleMode::Corrected ? Scalar(-dot) : dot);
    }
  }

  auto leg = [&](J hip, J knee, J ankle) -> Scalar {
    if (!pose.valid[idx(hip)] || !pose.valid[idx(knee)] || !pose.valid[idx(ankle)]) return Scalar(0);
    const Vec3<Scalar> e = (pose[hip] + pose[ankle]) / Scalar(2) - pose[knee];
    const Scalar len = e.norm();
    if (!(len > Scalar(0))) return Scalar(0);
    return detail::clip01(Scalar(fwd.dot(e / len)));
  };
  out.left_leg = leg(J::LeftHip, J::LeftKnee, J::LeftAnkle);
  out.right_leg = leg(J::RightHip, J::RightKnee, J::RightAnkle);
  return out;
}

template <typename Scalar>
Scalar l_angle(const SkeletonPose<Scalar>& pose, AngleMode mode = AngleMode::Corrected) {
  return l_angle_terms(pose, mode).total();
}

template <typename Scalar>
struct PriorTerms {
  Scalar length = Scalar(0);
  Scalar symm = Scalar(0);
  Scalar angle = Scalar(0);
  Scalar total = Scalar(0);
};

template <typename Scalar>
Scalar combine_prior(Scalar length, Scalar symm, Scalar angle, const PriorWeights& g) {
  return Scalar(g.length) * length + Scalar(g.symm) * symm + Scalar(g.angle) * angle;
}

template <typename Scalar>
PriorTerms<Scalar> l_prior(const SkeletonPose<Scalar>& pose, const BoneSpec& spec, const PriorWeights& g = {},
                           AngleMode mode = AngleMode::Corrected) {
  PriorTerms<Scalar> out;
  out.length = l_length(pose, spec);
  out.symm = l_symm(pose, spec);
  out.angle = l_angle(pose, mode);
  out.total = combine_prior(out.length, out.symm, out.angle, g);
  return out;
}

/// Component values feeding the unsupervised objective.
struct UnsupComponents {
  double l_2d = 0.0;
  std::optional<double> l_3d;  // present only when a pseudo-3D label exists
  double l_prior = 0.0;
  double uncertainty = 0.0;    // nats
};

/// The indicator gating the pseudo-3D term: label present and uncertainty < lambda.
inline bool pseudo3d_active(const UnsupComponents& c, const LossWeights& w) {
  return c.l_3d.has_value() && c.uncertainty < w.lambda;
}

inline double compose_unsup(const UnsupComponents& c, const LossWeights& w) {
  double total = w.w_2d * c.l_2d;
  if (pseudo3d_active(c, w)) total += w.w_3d * *c.l_3d;
  total += w.w_prior * c.l_prior;
  return total;
}

struct UnsupReport {
  double l_2d = 0.0;
  std::optional<double> l_3d;
  PriorTerms<double> prior;
  double l_unsup = 0.0;
  bool indicator_active = false;
  int behind_camera = 0;
};

/// Evaluates every component and their weighted sum.
UnsupReport l_unsup(const Pose& pred, std::span<const Keypoints> pseudo2d, std::span<const Camera> cameras,
                    const std::optional<Pose>& pseudo3d, double uncertainty, const LossWeights& weights,
                    const BoneSpec& bones = default_bone_spec(), const PriorWeights& gamma = {},
                    AngleMode mode = AngleMode::Corrected);

// ---------------------------------------------------------------------------
// Gradients

enum class LossId { Pose, TwoD, ThreeD, Length, Symm, Angle, Prior, Unsup };

/// Everything a loss may need besides the pose being differentiated.
struct LossContext {
  const Pose* target = nullptr;  // ground truth for Pose, pseudo label for ThreeD/Unsup
  std::span<const Keypoints> observed;
  std::span<const Camera> cameras;
  BoneSpec bones = default_bone_spec();
  PriorWeights gamma;
  AngleMode mode = AngleMode::Corrected;
  LossWeights weights;
  double uncertainty = 0.0;
};

/// d loss / d joint, one column per COCO joint.
using JointGradient = Eigen::Matrix<double, 3, kNumJoints>;

struct GradientResult {
  JointGradient gradient = JointGradient::Zero();
  bool used_fallback = false;  // central differences were used because of a kink
};

/// Scalar value of the selected loss.
double evaluate(LossId id, const Pose& pose, const LossContext& ctx);

/// Analytic gradient; falls back to central differences when the pose sits on
/// an L1 kink, a clip boundary or a zero-length vector. sign(0) = 0.
GradientResult grad(LossId id, const Pose& pose, const LossContext& ctx);

/// Central-difference gradient of `evaluate`.
JointGradient numeric_grad(LossId id, const Pose& pose, const LossContext& ctx, double h = 1e-5);

}  // namespace voxfuse
