// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Non-learned single-person estimators: occupancy-gated volumetric fusion,
// DLT triangulation, the entropy gate on pseudo labels and a reprojection refiner.

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "voxfuse/geom.hpp"
#include "voxfuse/image.hpp"
#include "voxfuse/lidar.hpp"
#include "voxfuse/losses.hpp"
#include "voxfuse/skeleton.hpp"
#include "voxfuse/voxel.hpp"

namespace voxfuse {

struct FusionParams {
  double side = 2.0;
  int resolution = 64;
  int dilation = 3;           // occupancy dilation radius, voxels
  double gating = 0.8;        // g in g * occ + (1 - g)
  double epsilon = 1e-12;
  double sharpness = 12.0;    // exponent applied to max-scaled back-projected channels; 1 disables
  std::optional<Vec3d> fallback_center;  // grid center when there is no cloud

  void validate() const;
};

struct PersonEstimate {
  int person_id = 0;
  Pose pose;
  std::shared_ptr<const VoxelHeatmap> heatmap;  // normalized
  double uncertainty = 0.0;                    // nats
};

/// Back-projects, sharpens, gates by dilated occupancy, normalizes and takes the soft-argmax.
/// With gating 0 the cloud only positions the grid.
PersonEstimate fuse_estimate(std::span<const ViewHeatmaps> views, std::span<const Camera> cameras,
                             const PointCloud& cloud, const FusionParams& params = {}, int person_id = 0);

/// Argmax of each channel with a separable quadratic sub-pixel fit over the 3x3 neighbourhood.
/// Confidence is the peak value; all-zero channels are invisible.
Keypoints heatmap_peaks(const ViewHeatmaps& maps, double min_confidence = 0.1);

/// Per-joint homogeneous least squares over the views that see the joint.
/// Joints seen in fewer than two views come back invalid.
Pose dlt_triangulate(std::span<const Keypoints> peaks, std::span<const Camera> cameras);

/// Estimates whose uncertainty is strictly below lambda, order kept.
std::vector<PersonEstimate> filter_pseudo_labels(const std::vector<PersonEstimate>& estimates, double lambda);

struct RefineParams {
  double w_2d = 0.02;
  double w_prior = 10.0;
  PriorWeights gamma;
  BoneSpec bones = default_bone_spec();
  AngleMode mode = AngleMode::Corrected;
  int iterations = 200;
  double initial_step = 0.1;   // meters, length of the first trial step
  double shrink = 0.5;
  int max_backtracks = 50;
  double armijo = 1e-4;

  void validate() const;
};

struct RefineResult {
  Pose pose;
  double initial_objective = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool underconstrained = false;  // prior off and some joint seen by fewer than two views
};

/// Minimizes w_2d * L_2D + w_prior * L_prior. Directions come from reweighted Gauss-Newton
/// (steepest descent when that is not a descent direction), steps from Armijo backtracking.
RefineResult refine_pose(const Pose& init, std::span<const Keypoints> pseudo2d, std::span<const Camera> cameras,
                         const RefineParams& params = {});

}  // namespace voxfuse
