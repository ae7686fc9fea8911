// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

// LiDAR scan-pattern simulation over rendered depth maps.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "voxfuse/geom.hpp"
#include "voxfuse/image.hpp"

namespace voxfuse {

enum class ScanKind { Rose, RoseTrisection, HorizontalLines, Random };

ScanKind parse_scan_kind(std::string_view name);  // throws UnknownKind
std::string_view to_string(ScanKind kind);

/// Rose-curve sample spacing in radians per sample and petal frequency.
inline constexpr double kRoseAngleStep = 0.0017;
inline constexpr double kRoseFrequency = 3.825;
inline constexpr double kRoseSampleRate = 1e5;  // samples per second

struct ScanPatternParams {
  ScanKind kind = ScanKind::Rose;
  double alpha = 100.0;     // scanning radius, pixels
  double theta0 = 0.0;      // initial angle, radians
  double duration = 0.1;    // seconds
  std::vector<Vec2d> centers;  // empty: image center (rose) or trisection defaults
  int width = 0;            // image size, needed for default centers and non-rose kinds
  int height = 0;
  int line_count = 16;      // horizontal-lines
  int sample_count = 10000; // horizontal-lines, random
  std::uint64_t seed = 0;   // random

  void validate() const;
  /// Rose centers actually used (defaults filled in).
  std::vector<Vec2d> resolved_centers() const;
};

/// Number of rose samples for a duration: floor(t * 1e5) + 1 (both ends inclusive).
int rose_sample_count(double duration);

/// r_n = alpha * cos(3.825 * theta_n), theta_n = theta0 + 0.0017 n, n = 0..floor(t*1e5).
std::vector<Vec2d> rose_pattern(const ScanPatternParams& params);

/// Any pattern kind. Rose-trisection is the union of three rose curves centered at
/// (W/3, H/2), (W/2, H/2) and (2W/3, H/2). Horizontal lines sit at rows
/// y_i = (i + 1) * H / (L + 1) with samples evenly spread across each row.
std::vector<Vec2d> pattern(const ScanPatternParams& params);

struct PointCloud {
  std::vector<Vec3d> points;
  std::vector<int> sensor;  // optional, parallel to points when non-empty

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  Vec3d centroid() const;
  void append(const PointCloud& other);
};

struct ScanResult {
  PointCloud cloud;
  int out_of_bounds = 0;
  int no_hit = 0;
};

/// Samples the depth map at the nearest pixel of every pattern point and
/// back-projects finite ranges along the pixel-center ray.
ScanResult scan(const DepthMap& depth, const Camera& camera, const std::vector<Vec2d>& points, int sensor_id = -1);

}  // namespace voxfuse
