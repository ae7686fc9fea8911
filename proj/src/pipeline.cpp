// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxfuse/pipeline.hpp"

#include "voxfuse/error.hpp"

namespace voxfuse {

std::vector<Camera> cameras_of(const SceneConfig& config) {
  std::vector<Camera> out;
  for (const Sensor& s : config.sensors) out.push_back(s.camera);
  return out;
}

std::vector<Vec2d> frame_pattern(const ScanPatternParams& params, int frame_index) {
  ScanPatternParams p = params;
  if (p.kind == ScanKind::Rose || p.kind == ScanKind::RoseTrisection)
    p.theta0 += static_cast<double>(frame_index) * rose_sample_count(p.duration) * kRoseAngleStep;
  if (p.kind == ScanKind::Random) p.seed = mix_seed(p.seed, static_cast<std::uint64_t>(frame_index));
  return pattern(p);
}

PointCloud scan_frame(const SceneConfig& config, const SceneFrame& frame) {
  PointCloud cloud;
  for (std::size_t s = 0; s < config.sensors.size(); ++s) {
    const Sensor& sensor = config.sensors[s];
    if (!sensor.lidar) continue;
    const auto pts = frame_pattern(*sensor.lidar, frame.index);
    cloud.append(scan(frame.depth[s], sensor.camera, pts, static_cast<int>(s)).cloud);
  }
  return cloud;
}

PointCloud crop_cloud(const PointCloud& cloud, const Pose& pose, double pad) {
  Vec3d lo = Vec3d::Constant(1e300), hi = Vec3d::Constant(-1e300);
  for (int k = 0; k < kNumJoints; ++k) {
    if (!pose.valid[k]) continue;
    lo = lo.cwiseMin(Vec3d(pose.joints.col(k)));
    hi = hi.cwiseMax(Vec3d(pose.joints.col(k)));
  }
  lo.array() -= pad;
  hi.array() += pad;
  PointCloud out;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3d& p = cloud.points[i];
    if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) continue;
    out.points.push_back(p);
    if (!cloud.sensor.empty()) out.sensor.push_back(cloud.sensor[i]);
  }
  return out;
}

void redraw_heatmaps(SceneFrame& frame, const SceneConfig& config, const HeatmapNoise& noise, std::uint64_t seed) {
  for (std::size_t i = 0; i < frame.persons.size(); ++i) {
    for (std::size_t s = 0; s < config.sensors.size(); ++s) {
      const Camera& cam = config.sensors[s].camera;
      const ViewHeatmaps dense = synth_heatmaps(frame.persons[i].views[s], cam.width(), cam.height(),
                                                config.heatmap_sigma, noise, mix_seed(seed, i + 1, s + 1));
      for (int k = 0; k < kNumJoints; ++k) frame.heatmaps[i][s][k] = HeatmapPatch::from_dense(dense[k]);
    }
  }
}

std::vector<ViewHeatmaps> person_views(const SceneFrame& frame, std::size_t person) {
  std::vector<ViewHeatmaps> out;
  for (const auto& patches : frame.heatmaps.at(person)) out.push_back(densify(patches));
  return out;
}

std::vector<Keypoints> person_peaks(const SceneFrame& frame, std::size_t person, double min_confidence) {
  std::vector<Keypoints> out;
  for (const auto& patches : frame.heatmaps.at(person)) out.push_back(heatmap_peaks(densify(patches), min_confidence));
  return out;
}

std::optional<PersonEstimate> estimate_person(const SceneConfig& config, const SceneFrame& frame,
                                              const PointCloud& cloud, std::size_t person,
                                              const FusionParams& params, double crop_pad) {
  const auto cams = cameras_of(config);
  const auto views = person_views(frame, person);
  const PointCloud local = crop_cloud(cloud, frame.persons.at(person).pose, crop_pad);
  FusionParams p = params;
  if (local.empty()) {
    const Pose tri = dlt_triangulate(person_peaks(frame, person), cams);
    if (tri.valid_count() == 0) return std::nullopt;
    Vec3d c = Vec3d::Zero();
    for (int k = 0; k < kNumJoints; ++k)
      if (tri.valid[k]) c += tri.joints.col(k);
    p.fallback_center = c / tri.valid_count();
    if (views.size() < 2) return std::nullopt;
  }
  return fuse_estimate(views, cams, local, p, frame.persons.at(person).id);
}

}  // namespace voxfuse
