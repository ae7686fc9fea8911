// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Volumetric representation: occupancy, heatmap back-projection,
// normalisation, soft-argmax and entropy.
//
// Voxel (ix, iy, iz) has linear index ix + X * (iy + Y * iz) and its center at
// center - side/2 + (i + 0.5) * pitch on each axis.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "voxfuse/geom.hpp"
#include "voxfuse/image.hpp"
#include "voxfuse/lidar.hpp"
#include "voxfuse/skeleton.hpp"

namespace voxfuse {

struct VoxelGridSpec {
  Vec3d center = Vec3d::Zero();
  double side = 2.0;
  Eigen::Vector3i resolution{64, 64, 64};

  void validate() const;
  Vec3d pitch() const { return Vec3d::Constant(side).cwiseQuotient(resolution.cast<double>()); }
  Vec3d min_corner() const { return center - Vec3d::Constant(side / 2.0); }
  long voxel_count() const { return static_cast<long>(resolution.x()) * resolution.y() * resolution.z(); }
  long index(int ix, int iy, int iz) const {
    return ix + static_cast<long>(resolution.x()) * (iy + static_cast<long>(resolution.y()) * iz);
  }
  Eigen::Vector3i coords(long i) const;
  Vec3d voxel_center(int ix, int iy, int iz) const;
  Vec3d voxel_center(long i) const;
  /// Voxel containing p, or empty when p lies outside the cube (upper faces excluded).
  std::optional<Eigen::Vector3i> locate(const Vec3d& p) const;
};

class OccupancyGrid {
 public:
  explicit OccupancyGrid(const VoxelGridSpec& spec) : spec_(spec), values_(spec.voxel_count(), 0) {}

  const VoxelGridSpec& spec() const { return spec_; }
  std::uint8_t operator[](long i) const { return values_[i]; }
  void set(long i) { values_[i] = 1; }
  long occupied_count() const;
  const std::vector<std::uint8_t>& values() const { return values_; }

 private:
  VoxelGridSpec spec_;
  std::vector<std::uint8_t> values_;
};

/// K channels over the grid, one column per channel.
class VoxelHeatmap {
 public:
  VoxelHeatmap(const VoxelGridSpec& spec, int channels)
      : spec_(spec), data_(Eigen::MatrixXd::Zero(spec.voxel_count(), channels)) {}

  const VoxelGridSpec& spec() const { return spec_; }
  int channels() const { return static_cast<int>(data_.cols()); }
  bool normalized() const { return normalized_; }
  void set_normalized(bool n) { normalized_ = n; }

  Eigen::MatrixXd& data() { return data_; }
  const Eigen::MatrixXd& data() const { return data_; }
  auto channel(int k) { return data_.col(k); }
  auto channel(int k) const { return data_.col(k); }

 private:
  VoxelGridSpec spec_;
  Eigen::MatrixXd data_;
  bool normalized_ = false;
};

struct CloudGrid {
  VoxelGridSpec spec;
  OccupancyGrid occupancy;
};

/// Grid centered at the cloud centroid; a voxel is 1 iff it holds a point.
CloudGrid grid_from_cloud(const PointCloud& cloud, double side, const Eigen::Vector3i& resolution);
OccupancyGrid occupancy_from_cloud(const PointCloud& cloud, const VoxelGridSpec& spec);

/// Binary dilation with a Euclidean ball of `radius` voxels.
OccupancyGrid dilate(const OccupancyGrid& grid, int radius);

/// Mean over views of the bilinearly sampled view heatmap at each projected voxel center.
/// Projections behind a camera or outside its image contribute 0.
VoxelHeatmap backproject(std::span<const ViewHeatmaps> views, std::span<const Camera> cameras,
                         const VoxelGridSpec& spec);

/// Per channel: divide by the channel max and raise to `exponent`. Zero channels stay zero.
void sharpen(VoxelHeatmap& vh, double exponent);

/// Per channel: add eps to every voxel and divide by the channel sum.
VoxelHeatmap normalize(const VoxelHeatmap& vh, double eps = 1e-12);

/// Expected voxel-center coordinate of each channel.
Pose soft_argmax(const VoxelHeatmap& vh);

/// -sum h log h in nats, 0 log 0 := 0.
double entropy(const VoxelHeatmap& vh, int channel);

/// Max channel entropy.
double person_uncertainty(const VoxelHeatmap& vh);

}  // namespace voxfuse
