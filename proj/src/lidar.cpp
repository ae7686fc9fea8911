// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxfuse/lidar.hpp"

#include <cmath>
#include <random>

#include "voxfuse/error.hpp"

namespace voxfuse {

ScanKind parse_scan_kind(std::string_view name) {
  if (name == "rose") return ScanKind::Rose;
  if (name == "rose-trisection") return ScanKind::RoseTrisection;
  if (name == "horizontal-lines") return ScanKind::HorizontalLines;
  if (name == "random") return ScanKind::Random;
  throw Error(Errc::UnknownKind, "unknown scan pattern '" + std::string(name) + "'");
}

std::string_view to_string(ScanKind kind) {
  switch (kind) {
    case ScanKind::Rose: return "rose";
    case ScanKind::RoseTrisection: return "rose-trisection";
    case ScanKind::HorizontalLines: return "horizontal-lines";
    case ScanKind::Random: return "random";
  }
  return "unknown";
}

void ScanPatternParams::validate() const {
  const bool rose = kind == ScanKind::Rose || kind == ScanKind::RoseTrisection;
  if (rose) {
    if (!(alpha > 0.0)) throw Error(Errc::InvalidArgument, "scan radius must be positive");
    if (!(duration > 0.0)) throw Error(Errc::InvalidArgument, "scan duration must be positive");
  }
  const bool need_size = kind != ScanKind::Rose || centers.empty();
  if (need_size && (width < 1 || height < 1)) throw Error(Errc::InvalidArgument, "pattern needs the image size");
  if (width > 0 && height > 0) {
    for (const Vec2d& c : centers)
      if (c.x() < 0 || c.y() < 0 || c.x() > width || c.y() > height)
        throw Error(Errc::InvalidArgument, "pattern center outside the image");
  }
  if (kind == ScanKind::HorizontalLines && line_count < 1) throw Error(Errc::InvalidArgument, "need >= 1 line");
  if ((kind == ScanKind::HorizontalLines || kind == ScanKind::Random) && sample_count < 0)
    throw Error(Errc::InvalidArgument, "negative sample count");
}

std::vector<Vec2d> ScanPatternParams::resolved_centers() const {
  if (!centers.empty()) return centers;
  const double w = width, h = height;
  if (kind == ScanKind::RoseTrisection) return {Vec2d(w / 3.0, h / 2.0), Vec2d(w / 2.0, h / 2.0), Vec2d(2.0 * w / 3.0, h / 2.0)};
  return {Vec2d((w - 1) / 2.0, (h - 1) / 2.0)};
}

int rose_sample_count(double duration) {
  // The epsilon keeps e.g. 0.001 * 1e5 from flooring to 99.
  return static_cast<int>(std::floor(duration * kRoseSampleRate + 1e-9)) + 1;
}

namespace {

void append_rose(std::vector<Vec2d>& out, const Vec2d& center, double alpha, double theta0, int count) {
  for (int n = 0; n < count; ++n) {
    const double theta = theta0 + kRoseAngleStep * n;
    const double r = alpha * std::cos(kRoseFrequency * theta);
    out.emplace_back(center.x() + r * std::cos(theta), center.y() + r * std::sin(theta));
  }
}

}  // namespace

std::vector<Vec2d> rose_pattern(const ScanPatternParams& params) {
  if (params.kind != ScanKind::Rose) throw Error(Errc::InvalidArgument, "rose_pattern needs kind = rose");
  params.validate();
  std::vector<Vec2d> out;
  const int count = rose_sample_count(params.duration);
  out.reserve(count);
  append_rose(out, params.resolved_centers().front(), params.alpha, params.theta0, count);
  return out;
}

std::vector<Vec2d> pattern(const ScanPatternParams& params) {
  params.validate();
  std::vector<Vec2d> out;
  switch (params.kind) {
    case ScanKind::Rose: return rose_pattern(params);
    case ScanKind::RoseTrisection: {
      const int count = rose_sample_count(params.duration);
      const auto centers = params.resolved_centers();
      out.reserve(count * centers.size());
      for (const Vec2d& c : centers) append_rose(out, c, params.alpha, params.theta0, count);
      return out;
    }
    case ScanKind::HorizontalLines: {
      const int lines = params.line_count;
      out.reserve(params.sample_count);
      for (int i = 0; i < lines; ++i) {
        const double y = (i + 1) * static_cast<double>(params.height) / (lines + 1);
        const int m = params.sample_count / lines + (i < params.sample_count % lines ? 1 : 0);
        for (int j = 0; j < m; ++j) out.emplace_back((j + 0.5) * params.width / m - 0.5, y);
      }
      return out;
    }
    case ScanKind::Random: {
      std::mt19937_64 rng(params.seed);
      std::uniform_real_distribution<double> ux(-0.5, params.width - 0.5);
      std::uniform_real_distribution<double> uy(-0.5, params.height - 0.5);
      out.reserve(params.sample_count);
      for (int i = 0; i < params.sample_count; ++i) {
        const double x = ux(rng);
        out.emplace_back(x, uy(rng));
      }
      return out;
    }
  }
  throw Error(Errc::UnknownKind, "unhandled scan kind");
}

Vec3d PointCloud::centroid() const {
  if (points.empty()) throw Error(Errc::EmptyCloud, "centroid of an empty cloud");
  Vec3d sum = Vec3d::Zero();
  for (const Vec3d& p : points) sum += p;
  return sum / static_cast<double>(points.size());
}

void PointCloud::append(const PointCloud& other) {
  const bool tagged = !sensor.empty() || points.empty();
  points.insert(points.end(), other.points.begin(), other.points.end());
  if (tagged && other.sensor.size() == other.points.size()) {
    sensor.insert(sensor.end(), other.sensor.begin(), other.sensor.end());
  } else {
    sensor.clear();
  }
}

ScanResult scan(const DepthMap& depth, const Camera& camera, const std::vector<Vec2d>& points, int sensor_id) {
  ScanResult out;
  const int w = static_cast<int>(depth.cols());
  const int h = static_cast<int>(depth.rows());
  for (const Vec2d& p : points) {
    const long u = std::lround(p.x());
    const long v = std::lround(p.y());
    if (u < 0 || v < 0 || u >= w || v >= h) {
      ++out.out_of_bounds;
      continue;
    }
    const float d = depth(v, u);
    if (!std::isfinite(d)) {
      ++out.no_hit;
      continue;
    }
    const auto ray = cast_ray(camera, Vec2d(static_cast<double>(u), static_cast<double>(v)));
    out.cloud.points.push_back(ray.at(static_cast<double>(d)));
    if (sensor_id >= 0) out.cloud.sensor.push_back(sensor_id);
  }
  return out;
}

}  // namespace voxfuse
