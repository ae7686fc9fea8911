// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

// On-disk formats. Binary files are little-endian with IEEE-754 floats.
//
//   depth_<sensor>.f32           u32 width, u32 height, f32[height][width] (row-major, +inf = no hit)
//   heatmap_<sensor>_<joint>.f32 u32 width, u32 height, i32 x0, i32 y0, u32 crop_w, u32 crop_h,
//                                f32[crop_h][crop_w]; the full map is zero outside the crop
//   cloud .f32                   u64 count, f32[count][3]
//   volume .f32                  u32 K, X, Y, Z, f64 center[3], f64 side, f32[K][Z][Y][X]

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "voxfuse/estimate.hpp"
#include "voxfuse/synth.hpp"

namespace voxfuse::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Missing files, short reads and malformed documents.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json to_json(const Camera& camera);
Camera camera_from_json(const json& j);
json to_json(const ScanPatternParams& p);
ScanPatternParams scan_params_from_json(const json& j);

/// {"convention": ..., "sensors": [{id, K, R, t, width, height, lidar?}]}
json calibration_to_json(const std::vector<Sensor>& sensors);
std::vector<Sensor> calibration_from_json(const json& j);

/// Scene configuration without the sensors, which live in the calibration file.
json scene_to_json(const SceneConfig& config);
SceneConfig scene_from_json(const json& scene, const json& calibration);

json pose_to_json(const Pose& pose);
Pose pose_from_json(const json& j);

json read_json(const fs::path& path);
/// Two-space indent and a trailing newline.
void write_json(const fs::path& path, const json& j);
void write_text(const fs::path& path, const std::string& text);

void write_depth(const fs::path& path, const DepthMap& depth);
DepthMap read_depth(const fs::path& path);

void write_patch(const fs::path& path, const HeatmapPatch& patch);
HeatmapPatch read_patch(const fs::path& path);

void write_cloud_ply(const fs::path& path, const PointCloud& cloud);
void write_cloud_f32(const fs::path& path, const PointCloud& cloud);
/// By extension: .ply or .f32.
PointCloud read_cloud(const fs::path& path);

void write_volume(const fs::path& path, const VoxelHeatmap& vh);

std::string frame_dir_name(int index);

/// poses.json, depth maps and per-person heatmap directories.
void write_frame(const fs::path& dir, const SceneFrame& frame, const SceneConfig& config);
SceneFrame read_frame(const fs::path& dir, const SceneConfig& config);

/// A generated bundle: scene.json, calibration.json, frame_NNNNNN/.
struct Bundle {
  fs::path root;
  SceneConfig config;
  std::vector<fs::path> frames;  // sorted

  static Bundle open(const fs::path& root);
};

struct EstimateRecord {
  int frame = 0;
  int person_id = 0;
  Pose pose;
  std::optional<double> uncertainty;  // absent for estimators without a volume
};

json estimates_to_json(const std::vector<EstimateRecord>& records);
std::vector<EstimateRecord> estimates_from_json(const json& j);

}  // namespace voxfuse::io
