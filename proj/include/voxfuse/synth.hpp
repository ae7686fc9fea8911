// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic multi-person scenes: capsule avatars, depth rendering and
// Gaussian 2D heatmaps standing in for an off-the-shelf 2D pose estimator.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "voxfuse/geom.hpp"
#include "voxfuse/image.hpp"
#include "voxfuse/lidar.hpp"
#include "voxfuse/skeleton.hpp"

namespace voxfuse {

/// Segment between two extended joints swept by a sphere. a == b gives a sphere.
struct Capsule {
  int a = 0;
  int b = 0;
  double radius = 0.05;
};

struct AvatarBody {
  Pose pose;
  std::vector<Capsule> capsules;

  void validate() const;
};

/// Limb, torso and head capsules over the COCO joints.
std::vector<Capsule> default_capsules();
AvatarBody make_avatar(const Pose& pose);

/// Articulation of one body. Angles in radians, lengths in meters.
struct PoseParams {
  double scale = 1.0;
  Vec3d root = Vec3d::Zero();  // x, y of the midhip; z is set so the lowest ankle sits at ground height
  double yaw = 0.0;
  double lean = 0.0;           // whole-body forward tilt
  double hip_flex[2] = {0.0, 0.0};  // [left, right]
  double hip_abd[2] = {0.0, 0.0};
  double knee[2] = {0.3, 0.3};
  double shoulder_flex[2] = {0.0, 0.0};
  double shoulder_abd[2] = {0.2, 0.2};
  double elbow[2] = {0.3, 0.3};
  double head_pitch = 0.3;
  double head_yaw = 0.0;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Sampling ranges per articulation parameter; left and right share ranges.
struct AngleRanges {
  Range scale{0.85, 1.15};
  Range yaw{-3.14159265358979, 3.14159265358979};
  Range lean{-0.15, 0.25};
  Range hip_flex{-0.3, 0.9};
  Range hip_abd{0.0, 0.35};
  Range knee{0.1, 1.4};
  Range shoulder_flex{-0.5, 1.6};
  Range shoulder_abd{0.0, 1.2};
  Range elbow{0.0, 2.0};
  Range head_pitch{0.1, 0.6};
  Range head_yaw{-0.9, 0.9};

  /// Throws InfeasibleConstraints for empty ranges or ranges outside the
  /// region where the human prior is guaranteed to vanish.
  void validate() const;
};

/// Forward kinematics of the capsule avatar.
Pose build_pose(const PoseParams& params);

/// Draws parameters until the built pose has zero length and angle prior.
PoseParams sample_pose_params(std::mt19937_64& rng, const AngleRanges& ranges);
Pose sample_pose(std::uint64_t seed, const AngleRanges& ranges = {});

/// Distance along the unit ray to the nearest capsule surface hit in front of the origin.
std::optional<double> intersect_capsule(const Ray<double>& ray, const Vec3d& a, const Vec3d& b, double radius);

/// Nearest ray-capsule hit per pixel (range along the ray), kNoHit elsewhere.
DepthMap render_depth(const std::vector<AvatarBody>& bodies, const Camera& camera);

/// Projects joints and marks those inside the image whose rendered range lies
/// within `threshold` of the joint range.
Keypoints project_visible(const Pose& pose, const Camera& camera, const DepthMap& depth, double threshold = 0.15);

struct HeatmapNoise {
  double jitter_sigma = 0.0;       // pixels
  double dropout = 0.0;            // per-channel probability of an all-zero channel
  double false_peak = 0.0;         // per-channel probability of a spurious Gaussian

  void validate() const;
};

/// One Gaussian (peak 1, std sigma px) per visible joint. Gaussians are truncated
/// at 4 sigma, overlapping ones combine by max.
ViewHeatmaps synth_heatmaps(const Keypoints& joints2d, int width, int height, double sigma,
                            const HeatmapNoise& noise, std::uint64_t seed);

/// A heatmap stored as its nonzero bounding box inside a full-size image.
struct HeatmapPatch {
  int width = 0;
  int height = 0;
  int x0 = 0;
  int y0 = 0;
  Image values;  // empty for an all-zero channel

  static HeatmapPatch from_dense(const Heatmap2D& dense);
  Heatmap2D to_dense() const;
};

ViewHeatmaps densify(const std::vector<HeatmapPatch>& patches);

struct Sensor {
  std::string id;
  Camera camera;
  std::optional<ScanPatternParams> lidar;
};

struct SceneConfig {
  std::string name = "custom";
  double extent_x = 5.0;
  double extent_y = 5.0;
  std::vector<Sensor> sensors;
  int persons = 1;
  std::uint64_t seed = 0;
  double frame_rate = 10.0;
  double duration = 1.0;
  double heatmap_sigma = 3.0;
  HeatmapNoise noise;
  double visibility_threshold = 0.15;
  double margin = 0.6;        // keep roots this far from the extent border
  double walk_scale = 1.0;    // scales the per-frame random-walk step sizes
  AngleRanges ranges;

  void validate() const;
  int frame_count() const;
};

/// 5 m x 5 m indoor studio with 5 LiDAR-camera groups.
SceneConfig panoptic_preset();
/// 35 m x 17 m court with 4 LiDAR-camera groups.
SceneConfig basketball_preset();

struct PersonTruth {
  int id = 0;
  Pose pose;
  std::vector<Keypoints> views;  // ground-truth projections and visibility per sensor
};

struct SceneFrame {
  int index = 0;
  double timestamp = 0.0;
  std::vector<PersonTruth> persons;
  std::vector<DepthMap> depth;                                 // per sensor
  std::vector<std::vector<std::vector<HeatmapPatch>>> heatmaps;  // [person][sensor][joint]
};

/// Deterministic 64-bit mixing of a seed with stream coordinates.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Per-frame person articulation; sequential because of the random walk.
std::vector<std::vector<PoseParams>> simulate_motion(const SceneConfig& config);

/// Renders one frame from its person parameters. Pure, so frames can be rendered concurrently.
SceneFrame render_frame(const SceneConfig& config, int index, const std::vector<PoseParams>& people);

/// Frames one at a time; identical config and seed give identical frames.
class SequenceGenerator {
 public:
  explicit SequenceGenerator(SceneConfig config);

  bool done() const { return next_ >= static_cast<int>(motion_.size()); }
  int size() const { return static_cast<int>(motion_.size()); }
  SceneFrame next();
  SceneFrame frame(int index) const;
  const SceneConfig& config() const { return config_; }

 private:
  SceneConfig config_;
  std::vector<std::vector<PoseParams>> motion_;
  int next_ = 0;
};

std::vector<SceneFrame> generate_sequence(const SceneConfig& config);

}  // namespace voxfuse
