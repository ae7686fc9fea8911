// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Glue between the simulator and the estimators, shared by the CLI and the tests.

#pragma once

#include <optional>
#include <vector>

#include "voxfuse/estimate.hpp"
#include "voxfuse/synth.hpp"

namespace voxfuse {

std::vector<Camera> cameras_of(const SceneConfig& config);

/// Pattern of one sensor for one frame. Rose curves continue where the previous
/// frame stopped; random patterns draw a fresh seed per frame.
std::vector<Vec2d> frame_pattern(const ScanPatternParams& params, int frame_index);

/// Scans every sensor that carries LiDAR parameters and merges the clouds.
PointCloud scan_frame(const SceneConfig& config, const SceneFrame& frame);

/// Points inside the axis-aligned joint box grown by `pad` meters.
PointCloud crop_cloud(const PointCloud& cloud, const Pose& pose, double pad = 0.3);

/// Redraws every person's heatmaps from the stored 2D ground truth with new noise.
void redraw_heatmaps(SceneFrame& frame, const SceneConfig& config, const HeatmapNoise& noise, std::uint64_t seed);

/// Dense heatmaps of one person, one entry per sensor.
std::vector<ViewHeatmaps> person_views(const SceneFrame& frame, std::size_t person);

/// Heatmap peaks of one person, one entry per sensor.
std::vector<Keypoints> person_peaks(const SceneFrame& frame, std::size_t person, double min_confidence = 0.1);

/// Fusion with the cloud cropped around the person. Without cloud points the grid is
/// centered on the triangulated peaks; empty when that fails too.
std::optional<PersonEstimate> estimate_person(const SceneConfig& config, const SceneFrame& frame,
                                              const PointCloud& cloud, std::size_t person,
                                              const FusionParams& params = {}, double crop_pad = 0.3);

}  // namespace voxfuse
