// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "voxfuse/geom.hpp"
#include "voxfuse/skeleton.hpp"

namespace voxfuse {

/// Mean joint distance over mutually valid joints, millimeters. With `cap_mm`
/// set, joints whose error exceeds the cap are left out of the mean.
double mpjpe(const Pose& pred, const Pose& gt, std::optional<double> cap_mm = std::nullopt);

/// Similarity transform T minimizing sum |T(src_k) - dst_k|^2 over mutually valid joints.
/// Throws DegenerateConfiguration for fewer than three joints or collinear joints.
SimilarityTransform<double> procrustes(const Pose& src, const Pose& dst);

/// MPJPE after aligning pred to gt with `procrustes`.
double pa_mpjpe(const Pose& pred, const Pose& gt);

/// Upright box; the footprint is w across and l along the yaw direction.
struct Box3D {
  Vec3d center = Vec3d::Zero();
  Vec3d size = Vec3d::Ones();  // (w, l, h)
  double yaw = 0.0;
  double score = 0.0;

  void validate() const;
};

/// Box around the valid joints padded by `pad` on every side, yaw 0.
Box3D box_from_pose(const Pose& pose, double pad = 0.1);

/// 0.8 m x 0.8 m x 1.9 m box standing on the lowest joint under the midhip.
Box3D constant_box_from_pose(const Pose& pose);

/// Footprint corners in counter-clockwise order.
std::vector<Vec2d> footprint(const Box3D& box);

double iou3d(const Box3D& a, const Box3D& b);

/// All-point interpolated area under the precision-recall curve. Detections are
/// taken by descending score and each claims the unmatched ground truth of highest
/// IoU when that IoU reaches the threshold.
double average_precision(const std::vector<Box3D>& detections, const std::vector<Box3D>& gts, double iou_threshold);

/// Same curve pooled over frames; detections only match ground truth of their own frame.
double average_precision(const std::vector<std::vector<Box3D>>& detections,
                         const std::vector<std::vector<Box3D>>& gts, double iou_threshold);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace voxfuse
