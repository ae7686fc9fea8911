// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxfuse/voxel.hpp"

#include <algorithm>
#include <cmath>

#include "voxfuse/error.hpp"

namespace voxfuse {

void VoxelGridSpec::validate() const {
  if (!(side > 0.0)) throw Error(Errc::InvalidArgument, "grid side must be positive");
  if ((resolution.array() < 2).any()) throw Error(Errc::InvalidArgument, "grid resolution must be >= 2");
  if (!center.allFinite()) throw Error(Errc::InvalidArgument, "grid center not finite");
}

Eigen::Vector3i VoxelGridSpec::coords(long i) const {
  const int ix = static_cast<int>(i % resolution.x());
  const long rest = i / resolution.x();
  return {ix, static_cast<int>(rest % resolution.y()), static_cast<int>(rest / resolution.y())};
}

Vec3d VoxelGridSpec::voxel_center(int ix, int iy, int iz) const {
  return min_corner() + (Vec3d(ix, iy, iz).array() + 0.5).matrix().cwiseProduct(pitch());
}

Vec3d VoxelGridSpec::voxel_center(long i) const {
  const Eigen::Vector3i c = coords(i);
  return voxel_center(c.x(), c.y(), c.z());
}

std::optional<Eigen::Vector3i> VoxelGridSpec::locate(const Vec3d& p) const {
  const Vec3d rel = (p - min_corner()).cwiseQuotient(pitch());
  Eigen::Vector3i c;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(rel[a]);
    if (!(f >= 0.0) || f >= resolution[a]) return std::nullopt;
    c[a] = static_cast<int>(f);
  }
  return c;
}

long OccupancyGrid::occupied_count() const {
  return static_cast<long>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

OccupancyGrid occupancy_from_cloud(const PointCloud& cloud, const VoxelGridSpec& spec) {
  OccupancyGrid grid(spec);
  for (const Vec3d& p : cloud.points)
    if (auto c = spec.locate(p)) grid.set(spec.index(c->x(), c->y(), c->z()));
  return grid;
}

CloudGrid grid_from_cloud(const PointCloud& cloud, double side, const Eigen::Vector3i& resolution) {
  if (cloud.empty()) throw Error(Errc::EmptyCloud, "cannot center a grid on an empty cloud");
  VoxelGridSpec spec{cloud.centroid(), side, resolution};
  spec.validate();
  return {spec, occupancy_from_cloud(cloud, spec)};
}

OccupancyGrid dilate(const OccupancyGrid& grid, int radius) {
  if (radius <= 0) return grid;
  const VoxelGridSpec& spec = grid.spec();
  std::vector<Eigen::Vector3i> offsets;
  for (int dz = -radius; dz <= radius; ++dz)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dx * dx + dy * dy + dz * dz <= radius * radius) offsets.emplace_back(dx, dy, dz);

  OccupancyGrid out(spec);
  const Eigen::Vector3i& res = spec.resolution;
  for (long i = 0; i < spec.voxel_count(); ++i) {
    if (!grid[i]) continue;
    const Eigen::Vector3i c = spec.coords(i);
    for (const auto& o : offsets) {
      const Eigen::Vector3i n = c + o;
      if ((n.array() < 0).any() || (n.array() >= res.array()).any()) continue;
      out.set(spec.index(n.x(), n.y(), n.z()));
    }
  }
  return out;
}

VoxelHeatmap backproject(std::span<const ViewHeatmaps> views, std::span<const Camera> cameras,
                         const VoxelGridSpec& spec) {
  if (views.empty()) throw Error(Errc::NoViews, "back-projection needs at least one view");
  if (views.size() != cameras.size()) throw Error(Errc::InvalidArgument, "views and cameras differ in count");
  spec.validate();
  const int channels = static_cast<int>(views.front().size());
  for (const auto& v : views)
    if (static_cast<int>(v.size()) != channels) throw Error(Errc::InvalidArgument, "views differ in channel count");

  VoxelHeatmap out(spec, channels);
  Eigen::MatrixXd& data = out.data();
  const long n = spec.voxel_count();
  const double inv_views = 1.0 / static_cast<double>(views.size());

  for (std::size_t v = 0; v < views.size(); ++v) {
    const Camera& cam = cameras[v];
    const ViewHeatmaps& maps = views[v];
    const double w = static_cast<double>(cam.width());
    const double h = static_cast<double>(cam.height());
    for (const auto& m : maps)
      if (m.cols() != cam.width() || m.rows() != cam.height())
        throw Error(Errc::InvalidArgument, "heatmap size differs from the camera image size");
    for (long i = 0; i < n; ++i) {
      const auto px = try_project(cam, spec.voxel_center(i));
      if (!px) continue;
      const double u = px->x();
      const double vv = px->y();
      if (!(u >= 0.0) || !(vv >= 0.0) || u > w - 1 || vv > h - 1) continue;
      for (int k = 0; k < channels; ++k) {
        if (maps[k].size() == 0) continue;
        data(i, k) += sample_bilinear(maps[k], u, vv);
      }
    }
  }
  data *= inv_views;
  return out;
}

void sharpen(VoxelHeatmap& vh, double exponent) {
  if (!(exponent > 0.0)) throw Error(Errc::InvalidArgument, "sharpening exponent must be positive");
  for (int k = 0; k < vh.channels(); ++k) {
    auto ch = vh.channel(k);
    const double peak = ch.maxCoeff();
    if (!(peak > 0.0)) continue;
    ch /= peak;
    if (exponent == 1.0) continue;
    const double whole = std::round(exponent);
    if (whole == exponent && whole <= 64.0) {
      // Square-and-multiply is much cheaper than pow on millions of entries.
      Eigen::ArrayXd base = ch.array(), acc = Eigen::ArrayXd::Ones(ch.size());
      for (auto e = static_cast<unsigned>(whole); e != 0; e >>= 1) {
        if (e & 1u) acc *= base;
        base *= base;
      }
      ch = acc.matrix();
    } else {
      ch = ch.array().pow(exponent).matrix();
    }
  }
  vh.set_normalized(false);
}

VoxelHeatmap normalize(const VoxelHeatmap& vh, double eps) {
  if (!(eps > 0.0)) throw Error(Errc::InvalidArgument, "normalisation floor must be positive");
  if ((vh.data().array() < 0.0).any() || !vh.data().allFinite())
    throw Error(Errc::InvalidArgument, "heatmap entries must be finite and nonnegative");
  VoxelHeatmap out = vh;
  for (int k = 0; k < out.channels(); ++k) {
    auto ch = out.channel(k);
    ch.array() += eps;
    ch /= ch.sum();
  }
  out.set_normalized(true);
  return out;
}

namespace {

void require_normalized(const VoxelHeatmap& vh) {
  if (!vh.normalized()) throw Error(Errc::NotNormalized, "heatmap must be normalized");
}

}  // namespace

Pose soft_argmax(const VoxelHeatmap& vh) {
  require_normalized(vh);
  if (vh.channels() != kNumJoints) throw Error(Errc::InvalidArgument, "soft-argmax expects 17 channels");
  const VoxelGridSpec& spec = vh.spec();
  const Eigen::Vector3i& res = spec.resolution;
  const Vec3d lo = spec.min_corner();
  const Vec3d pitch = spec.pitch();
  Pose pose;
  for (int k = 0; k < kNumJoints; ++k) {
    const auto ch = vh.channel(k);
    // Marginals along each axis.
    Eigen::VectorXd mx = Eigen::VectorXd::Zero(res.x()), my = Eigen::VectorXd::Zero(res.y()),
                    mz = Eigen::VectorXd::Zero(res.z());
    long i = 0;
    for (int iz = 0; iz < res.z(); ++iz)
      for (int iy = 0; iy < res.y(); ++iy)
        for (int ix = 0; ix < res.x(); ++ix, ++i) {
          const double p = ch[i];
          mx[ix] += p;
          my[iy] += p;
          mz[iz] += p;
        }
    auto expect = [](const Eigen::VectorXd& m, double origin, double step) {
      double s = 0.0, mass = 0.0;
      for (int j = 0; j < m.size(); ++j) {
        s += m[j] * (origin + (j + 0.5) * step);
        mass += m[j];
      }
      return s / mass;
    };
    pose.joints.col(k) = Vec3d(expect(mx, lo.x(), pitch.x()), expect(my, lo.y(), pitch.y()), expect(mz, lo.z(), pitch.z()));
  }
  return pose;
}

double entropy(const VoxelHeatmap& vh, int channel) {
  require_normalized(vh);
  double h = 0.0;
  for (double p : vh.channel(channel))
    if (p > 0.0) h -= p * std::log(p);
  return std::max(h, 0.0);
}

double person_uncertainty(const VoxelHeatmap& vh) {
  require_normalized(vh);
  double best = 0.0;
  for (int k = 0; k < vh.channels(); ++k) best = std::max(best, entropy(vh, k));
  return best;
}

}  // namespace voxfuse
