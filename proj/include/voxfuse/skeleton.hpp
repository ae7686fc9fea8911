// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <array>
#include <string_view>
#include <utility>
#include <vector>

#include "voxfuse/error.hpp"
#include "voxfuse/geom.hpp"
#include "voxfuse/types.hpp"

namespace voxfuse {

/// COCO17 joint order.
enum class Joint : int {
  Nose = 0,
  LeftEye,
  RightEye,
  LeftEar,
  RightEar,
  LeftShoulder,
  RightShoulder,
  LeftElbow,
  RightElbow,
  LeftWrist,
  RightWrist,
  LeftHip,
  RightHip,
  LeftKnee,
  RightKnee,
  LeftAnkle,
  RightAnkle,
};

inline constexpr int kNumJoints = 17;
// Extended indices for the derived joints, usable wherever a bone endpoint is expected.
inline constexpr int kNeck = 17;
inline constexpr int kMidHip = 18;
inline constexpr int kNumExtendedJoints = 19;

constexpr int idx(Joint j) { return static_cast<int>(j); }

inline constexpr std::array<std::string_view, kNumExtendedJoints> kJointNames = {
    "nose",       "left_eye",    "right_eye",  "left_ear",    "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist",
    "right_wrist", "left_hip",   "right_hip",  "left_knee",   "right_knee",
    "left_ankle", "right_ankle", "neck",       "midhip"};

using JointMask = std::array<bool, kNumJoints>;

inline JointMask all_joints() {
  JointMask m;
  m.fill(true);
  return m;
}

/// 17 COCO joints in meters, stored column-wise, plus a validity mask.
/// Neck and midhip are derived on demand and never stored.
template <typename Scalar>
struct SkeletonPose {
  using Joints = Eigen::Matrix<Scalar, 3, kNumJoints>;

  Joints joints = Joints::Zero();
  JointMask valid = all_joints();

  SkeletonPose() = default;
  explicit SkeletonPose(const Joints& j, const JointMask& v = all_joints()) : joints(j), valid(v) {}

  Vec3<Scalar> operator[](Joint j) const { return joints.col(idx(j)); }
  auto operator[](Joint j) { return joints.col(idx(j)); }

  Vec3<Scalar> neck() const {
    return (joints.col(idx(Joint::LeftShoulder)) + joints.col(idx(Joint::RightShoulder))) / Scalar(2);
  }
  Vec3<Scalar> midhip() const {
    return (joints.col(idx(Joint::LeftHip)) + joints.col(idx(Joint::RightHip))) / Scalar(2);
  }

  /// Any of the 19 extended joints.
  Vec3<Scalar> point(int ext) const {
    if (ext == kNeck) return neck();
    if (ext == kMidHip) return midhip();
    return joints.col(ext);
  }

  bool point_valid(int ext) const {
    if (ext == kNeck) return valid[idx(Joint::LeftShoulder)] && valid[idx(Joint::RightShoulder)];
    if (ext == kMidHip) return valid[idx(Joint::LeftHip)] && valid[idx(Joint::RightHip)];
    return valid[ext];
  }

  int valid_count() const {
    int n = 0;
    for (bool b : valid) n += b ? 1 : 0;
    return n;
  }

  bool all_finite() const { return joints.allFinite(); }
};

using Pose = SkeletonPose<double>;

template <typename Scalar>
SkeletonPose<Scalar> apply_similarity(const SimilarityTransform<Scalar>& t, const SkeletonPose<Scalar>& pose) {
  SkeletonPose<Scalar> out = pose;
  out.joints = (t.scale * (t.rotation * pose.joints)).colwise() + t.translation;
  return out;
}

/// Per-view 2D keypoints with a visibility mask and optional confidences.
template <typename Scalar>
struct Keypoints2D {
  Eigen::Matrix<Scalar, 2, kNumJoints> pixels = Eigen::Matrix<Scalar, 2, kNumJoints>::Zero();
  JointMask visible = all_joints();
  std::array<Scalar, kNumJoints> confidence = filled(Scalar(1));

 private:
  static std::array<Scalar, kNumJoints> filled(Scalar v) {
    std::array<Scalar, kNumJoints> a;
    a.fill(v);
    return a;
  }
};

using Keypoints = Keypoints2D<double>;

/// Bones as extended-joint index pairs, mirrored bone pairs and the admissible length range.
struct BoneSpec {
  std::vector<std::pair<int, int>> bones;
  std::vector<std::pair<int, int>> symmetric;  // indices into `bones`
  double l_min = 0.05;
  double l_max = 0.7;

  void validate() const {
    for (auto [a, b] : bones)
      if (a < 0 || b < 0 || a >= kNumExtendedJoints || b >= kNumExtendedJoints || a == b)
        throw Error(Errc::InvalidArgument, "bone endpoint out of range");
    const int n = static_cast<int>(bones.size());
    for (auto [i, j] : symmetric)
      if (i < 0 || j < 0 || i >= n || j >= n) throw Error(Errc::InvalidArgument, "symmetric pair references unknown bone");
    if (!(l_min > 0.0 && l_min < l_max)) throw Error(Errc::InvalidArgument, "need 0 < l_min < l_max");
  }
};

/// 18 bones: face, shoulder girdle, arms, spine, head stalk, hip girdle and legs.
inline BoneSpec default_bone_spec() {
  using J = Joint;
  BoneSpec s;
  s.bones = {
      {idx(J::Nose), idx(J::LeftEye)},          {idx(J::Nose), idx(J::RightEye)},
      {idx(J::LeftEye), idx(J::LeftEar)},       {idx(J::RightEye), idx(J::RightEar)},
      {kNeck, idx(J::LeftShoulder)},            {kNeck, idx(J::RightShoulder)},
      {idx(J::LeftShoulder), idx(J::LeftElbow)}, {idx(J::RightShoulder), idx(J::RightElbow)},
      {idx(J::LeftElbow), idx(J::LeftWrist)},   {idx(J::RightElbow), idx(J::RightWrist)},
      {kMidHip, idx(J::LeftHip)},               {kMidHip, idx(J::RightHip)},
      {idx(J::LeftHip), idx(J::LeftKnee)},      {idx(J::RightHip), idx(J::RightKnee)},
      {idx(J::LeftKnee), idx(J::LeftAnkle)},    {idx(J::RightKnee), idx(J::RightAnkle)},
      {kNeck, kMidHip},                         {kNeck, idx(J::Nose)},
  };
  s.symmetric = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}, {12, 13}, {14, 15}};
  return s;
}

}  // namespace voxfuse
