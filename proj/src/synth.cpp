// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxfuse/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "voxfuse/error.hpp"
#include "voxfuse/losses.hpp"

namespace voxfuse {

namespace {

using J = Joint;

// Body dimensions at scale 1, meters.
constexpr double kTorso = 0.52;
constexpr double kShoulderHalf = 0.18;
constexpr double kHipHalf = 0.10;
constexpr double kUpperArm = 0.30;
constexpr double kForearm = 0.26;
constexpr double kThigh = 0.44;
constexpr double kShin = 0.42;
constexpr double kHeadStalk = 0.20;
constexpr double kAnkleHeight = 0.08;

Mat3d rot_x(double a) { return Eigen::AngleAxisd(a, Vec3d::UnitX()).toRotationMatrix(); }
Mat3d rot_y(double a) { return Eigen::AngleAxisd(a, Vec3d::UnitY()).toRotationMatrix(); }
Mat3d rot_z(double a) { return Eigen::AngleAxisd(a, Vec3d::UnitZ()).toRotationMatrix(); }

// Limb direction: swing `flex` forward from hanging straight down, then
// abduct outward by `abd` (side = +1 left, -1 right).
Vec3d limb_dir(double flex, double abd, double side) {
  return rot_x(side * abd) * Vec3d(std::sin(flex), 0.0, -std::cos(flex));
}

bool contains(const Range& outer, const Range& inner) { return inner.lo >= outer.lo && inner.hi <= outer.hi; }

double uniform(std::mt19937_64& rng, const Range& r) {
  return r.lo == r.hi ? r.lo : std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

// Reflects x into [lo, hi].
double reflect(double x, const Range& r) {
  if (r.hi <= r.lo) return r.lo;
  const double span = r.hi - r.lo;
  double y = std::fmod(x - r.lo, 2.0 * span);
  if (y < 0) y += 2.0 * span;
  return y <= span ? r.lo + y : r.hi - (y - span);
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  return a - 2.0 * pi * std::floor((a + pi) / (2.0 * pi));
}

bool prior_vanishes(const Pose& pose) {
  const BoneSpec bones = default_bone_spec();
  return l_length(pose, bones) == 0.0 && l_angle(pose) == 0.0 && l_symm(pose, bones) < 1e-9;
}

}  // namespace

// ---------------------------------------------------------------------------
// Avatars

void AvatarBody::validate() const {
  for (const Capsule& c : capsules) {
    if (c.a < 0 || c.b < 0 || c.a >= kNumExtendedJoints || c.b >= kNumExtendedJoints)
      throw Error(Errc::InvalidArgument, "capsule endpoint is not a joint");
    if (!(c.radius > 0.0 && c.radius <= 0.3)) throw Error(Errc::InvalidArgument, "capsule radius outside (0, 0.3]");
  }
}

std::vector<Capsule> default_capsules() {
  return {
      {idx(J::LeftEar), idx(J::RightEar), 0.09},
      {kNeck, idx(J::Nose), 0.05},
      {idx(J::LeftShoulder), idx(J::RightShoulder), 0.07},
      {idx(J::LeftShoulder), idx(J::LeftHip), 0.09},
      {idx(J::RightShoulder), idx(J::RightHip), 0.09},
      {kNeck, kMidHip, 0.12},
      {idx(J::LeftHip), idx(J::RightHip), 0.09},
      {idx(J::LeftShoulder), idx(J::LeftElbow), 0.05},
      {idx(J::RightShoulder), idx(J::RightElbow), 0.05},
      {idx(J::LeftElbow), idx(J::LeftWrist), 0.04},
      {idx(J::RightElbow), idx(J::RightWrist), 0.04},
      {idx(J::LeftHip), idx(J::LeftKnee), 0.08},
      {idx(J::RightHip), idx(J::RightKnee), 0.08},
      {idx(J::LeftKnee), idx(J::LeftAnkle), 0.055},
      {idx(J::RightKnee), idx(J::RightAnkle), 0.055},
  };
}

AvatarBody make_avatar(const Pose& pose) {
  AvatarBody body{pose, default_capsules()};
  body.validate();
  return body;
}

void AngleRanges::validate() const {
  const Range* all[] = {&scale, &yaw, &lean, &hip_flex, &hip_abd, &knee, &shoulder_flex,
                        &shoulder_abd, &elbow, &head_pitch, &head_yaw};
  for (const Range* r : all)
    if (!(r->lo <= r->hi)) throw Error(Errc::InfeasibleConstraints, "empty sampling range");
  // Outside these the bone-length or angle prior can become positive.
  if (!contains({0.8, 1.2}, scale) || !contains({0.05, 1.6}, knee) || !contains({-0.5, 1.2}, hip_flex) ||
      !contains({0.05, 1.2}, head_pitch) || !contains({-1.2, 1.2}, head_yaw) || !contains({-0.5, 0.5}, lean))
    throw Error(Errc::InfeasibleConstraints, "ranges admit poses with a nonzero human prior");
}

Pose build_pose(const PoseParams& p) {
  const double s = p.scale;
  Pose pose;
  auto set = [&pose](J j, const Vec3d& x) { pose.joints.col(idx(j)) = x; };

  // Body frame: x forward, y left, z up, midhip at the origin.
  const Vec3d neck(0.0, 0.0, kTorso * s);
  for (int side = 0; side < 2; ++side) {
    const double sgn = side == 0 ? 1.0 : -1.0;
    const Vec3d hip(0.0, sgn * kHipHalf * s, 0.0);
    const Vec3d knee = hip + kThigh * s * limb_dir(p.hip_flex[side], p.hip_abd[side], sgn);
    const Vec3d ankle = knee + kShin * s * limb_dir(p.hip_flex[side] - p.knee[side], p.hip_abd[side], sgn);
    const Vec3d shoulder = neck + Vec3d(0.0, sgn * kShoulderHalf * s, 0.0);
    const Vec3d elbow = shoulder + kUpperArm * s * limb_dir(p.shoulder_flex[side], p.shoulder_abd[side], sgn);
    const Vec3d wrist =
        elbow + kForearm * s * limb_dir(p.shoulder_flex[side] + p.elbow[side], p.shoulder_abd[side], sgn);
    set(side == 0 ? J::LeftHip : J::RightHip, hip);
    set(side == 0 ? J::LeftKnee : J::RightKnee, knee);
    set(side == 0 ? J::LeftAnkle : J::RightAnkle, ankle);
    set(side == 0 ? J::LeftShoulder : J::RightShoulder, shoulder);
    set(side == 0 ? J::LeftElbow : J::RightElbow, elbow);
    set(side == 0 ? J::LeftWrist : J::RightWrist, wrist);
  }

  const Mat3d head = rot_z(p.head_yaw) * rot_y(p.head_pitch);
  const Vec3d nose = neck + head * Vec3d(0.0, 0.0, kHeadStalk * s);
  set(J::Nose, nose);
  for (int side = 0; side < 2; ++side) {
    const double sgn = side == 0 ? 1.0 : -1.0;
    const Vec3d eye = nose + head * (s * Vec3d(-0.03, sgn * 0.04, 0.035));
    const Vec3d ear = eye + head * (s * Vec3d(-0.07, sgn * 0.04, -0.01));
    set(side == 0 ? J::LeftEye : J::RightEye, eye);
    set(side == 0 ? J::LeftEar : J::RightEar, ear);
  }

  const Mat3d world = rot_z(p.yaw) * rot_y(p.lean);
  pose.joints = world * pose.joints;
  const double lowest = std::min(pose[J::LeftAnkle].z(), pose[J::RightAnkle].z());
  const Vec3d shift(p.root.x(), p.root.y(), kAnkleHeight * s - lowest);
  pose.joints.colwise() += shift;
  return pose;
}

PoseParams sample_pose_params(std::mt19937_64& rng, const AngleRanges& r) {
  r.validate();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    PoseParams p;
    p.scale = uniform(rng, r.scale);
    p.yaw = uniform(rng, r.yaw);
    p.lean = uniform(rng, r.lean);
    for (int side = 0; side < 2; ++side) {
      p.hip_flex[side] = uniform(rng, r.hip_flex);
      p.hip_abd[side] = uniform(rng, r.hip_abd);
      p.knee[side] = uniform(rng, r.knee);
      p.shoulder_flex[side] = uniform(rng, r.shoulder_flex);
      p.shoulder_abd[side] = uniform(rng, r.shoulder_abd);
      p.elbow[side] = uniform(rng, r.elbow);
    }
    p.head_pitch = uniform(rng, r.head_pitch);
    p.head_yaw = uniform(rng, r.head_yaw);
    if (prior_vanishes(build_pose(p))) return p;
  }
  throw Error(Errc::InfeasibleConstraints, "could not sample a pose with zero prior");
}

Pose sample_pose(std::uint64_t seed, const AngleRanges& ranges) {
  std::mt19937_64 rng(seed);
  return build_pose(sample_pose_params(rng, ranges));
}

// ---------------------------------------------------------------------------
// Rendering

std::optional<double> intersect_capsule(const Ray<double>& ray, const Vec3d& a, const Vec3d& b, double radius) {
  const Vec3d& ro = ray.origin;
  const Vec3d& rd = ray.direction;
  auto sphere = [&](const Vec3d& c) -> std::optional<double> {
    const Vec3d oc = ro - c;
    const double bb = rd.dot(oc);
    const double h = bb * bb - (oc.squaredNorm() - radius * radius);
    if (h < 0.0) return std::nullopt;
    const double t = -bb - std::sqrt(h);
    if (t > 0.0) return t;
    return std::nullopt;
  };

  const Vec3d ba = b - a;
  const double baba = ba.squaredNorm();
  if (baba < 1e-18) return sphere(a);

  const Vec3d oa = ro - a;
  const double bard = ba.dot(rd);
  const double baoa = ba.dot(oa);
  const double rdoa = rd.dot(oa);
  const double oaoa = oa.squaredNorm();
  const double qa = baba - bard * bard;
  const double qb = baba * rdoa - baoa * bard;
  const double qc = baba * oaoa - baoa * baoa - radius * radius * baba;
  std::optional<double> best;
  if (qa > 1e-12 * baba) {
    const double h = qb * qb - qa * qc;
    if (h >= 0.0) {
      const double t = (-qb - std::sqrt(h)) / qa;
      const double y = baoa + t * bard;
      if (t > 0.0 && y > 0.0 && y < baba) best = t;
    }
  }
  for (const Vec3d* cap : {&a, &b}) {
    if (auto t = sphere(*cap); t && (!best || *t < *best)) best = t;
  }
  return best;
}

DepthMap render_depth(const std::vector<AvatarBody>& bodies, const Camera& camera) {
  DepthMap depth = empty_depth(camera.width(), camera.height());
  if (bodies.empty()) return depth;

  struct Prepared {
    Vec3d center;
    double radius;
    std::vector<std::pair<Vec3d, Vec3d>> segments;
    std::vector<double> radii;
  };
  std::vector<Prepared> prepared;
  for (const AvatarBody& body : bodies) {
    Prepared p;
    Vec3d lo = Vec3d::Constant(1e300), hi = Vec3d::Constant(-1e300);
    double rmax = 0.0;
    for (const Capsule& c : body.capsules) {
      const Vec3d a = body.pose.point(c.a), b = body.pose.point(c.b);
      p.segments.emplace_back(a, b);
      p.radii.push_back(c.radius);
      lo = lo.cwiseMin(a).cwiseMin(b);
      hi = hi.cwiseMax(a).cwiseMax(b);
      rmax = std::max(rmax, c.radius);
    }
    if (p.segments.empty()) continue;
    p.center = (lo + hi) / 2.0;
    p.radius = (hi - lo).norm() / 2.0 + rmax;
    prepared.push_back(std::move(p));
  }

  for (int v = 0; v < camera.height(); ++v) {
    for (int u = 0; u < camera.width(); ++u) {
      const Ray<double> ray = cast_ray(camera, Vec2d(u, v));
      double best = std::numeric_limits<double>::infinity();
      for (const Prepared& p : prepared) {
        const Vec3d oc = ray.origin - p.center;
        const double bb = ray.direction.dot(oc);
        if (bb * bb - (oc.squaredNorm() - p.radius * p.radius) < 0.0) continue;
        for (std::size_t i = 0; i < p.segments.size(); ++i) {
          if (auto t = intersect_capsule(ray, p.segments[i].first, p.segments[i].second, p.radii[i]); t && *t < best)
            best = *t;
        }
      }
      if (std::isfinite(best)) depth(v, u) = static_cast<float>(best);
    }
  }
  return depth;
}

Keypoints project_visible(const Pose& pose, const Camera& camera, const DepthMap& depth, double threshold) {
  Keypoints kp;
  const Vec3d c = camera.center();
  for (int k = 0; k < kNumJoints; ++k) {
    kp.visible[k] = false;
    kp.confidence[k] = 0.0;
    if (!pose.valid[k]) continue;
    const auto px = try_project(camera, Vec3d(pose.joints.col(k)));
    if (!px) continue;
    kp.pixels.col(k) = *px;
    if (!camera.contains(*px)) continue;
    const long u = std::lround(px->x()), v = std::lround(px->y());
    const double range = (Vec3d(pose.joints.col(k)) - c).norm();
    const double rendered = depth(v, u);
    if (range - rendered <= threshold) {
      kp.visible[k] = true;
      kp.confidence[k] = 1.0;
    }
  }
  return kp;
}

// ---------------------------------------------------------------------------
// Heatmaps

void HeatmapNoise::validate() const {
  if (jitter_sigma < 0.0) throw Error(Errc::InvalidArgument, "jitter sigma must be nonnegative");
  for (double p : {dropout, false_peak})
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::InvalidArgument, "probabilities must lie in [0, 1]");
}

namespace {

void splat_gaussian(Heatmap2D& map, double cx, double cy, double sigma) {
  const int w = static_cast<int>(map.cols()), h = static_cast<int>(map.rows());
  const double reach = 4.0 * sigma;
  const int x0 = std::max(0, static_cast<int>(std::ceil(cx - reach)));
  const int x1 = std::min(w - 1, static_cast<int>(std::floor(cx + reach)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(cy - reach)));
  const int y1 = std::min(h - 1, static_cast<int>(std::floor(cy + reach)));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      if (d2 > reach * reach) continue;
      const float val = static_cast<float>(std::exp(-d2 * inv));
      map(y, x) = std::max(map(y, x), val);
    }
}

}  // namespace

ViewHeatmaps synth_heatmaps(const Keypoints& joints2d, int width, int height, double sigma,
                            const HeatmapNoise& noise, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw Error(Errc::InvalidArgument, "heatmap sigma must be positive");
  noise.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Spurious peaks land near the person: visible-joint bbox padded by 20 px.
  double bx0 = 0, by0 = 0, bx1 = width - 1, by1 = height - 1;
  bool any = false;
  for (int k = 0; k < kNumJoints; ++k) {
    if (!joints2d.visible[k]) continue;
    const Vec2d p = joints2d.pixels.col(k);
    if (!any) {
      bx0 = bx1 = p.x();
      by0 = by1 = p.y();
      any = true;
    }
    bx0 = std::min(bx0, p.x()), bx1 = std::max(bx1, p.x());
    by0 = std::min(by0, p.y()), by1 = std::max(by1, p.y());
  }
  if (any) {
    bx0 = std::max(0.0, bx0 - 20), by0 = std::max(0.0, by0 - 20);
    bx1 = std::min(width - 1.0, bx1 + 20), by1 = std::min(height - 1.0, by1 + 20);
  }

  ViewHeatmaps maps(kNumJoints, Heatmap2D::Zero(height, width));
  for (int k = 0; k < kNumJoints; ++k) {
    // Draw every variate for every channel so the stream does not depend on visibility.
    const double jx = gauss(rng) * noise.jitter_sigma;
    const double jy = gauss(rng) * noise.jitter_sigma;
    const bool drop = unit(rng) < noise.dropout;
    const bool spurious = unit(rng) < noise.false_peak;
    const double fx = bx0 + unit(rng) * (bx1 - bx0);
    const double fy = by0 + unit(rng) * (by1 - by0);
    if (drop) continue;
    if (joints2d.visible[k]) splat_gaussian(maps[k], joints2d.pixels(0, k) + jx, joints2d.pixels(1, k) + jy, sigma);
    if (spurious) splat_gaussian(maps[k], fx, fy, sigma);
  }
  return maps;
}

HeatmapPatch HeatmapPatch::from_dense(const Heatmap2D& dense) {
  HeatmapPatch p;
  p.width = static_cast<int>(dense.cols());
  p.height = static_cast<int>(dense.rows());
  int x0 = p.width, y0 = p.height, x1 = -1, y1 = -1;
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x)
      if (dense(y, x) != 0.0f) {
        x0 = std::min(x0, x), x1 = std::max(x1, x);
        y0 = std::min(y0, y), y1 = std::max(y1, y);
      }
  if (x1 < 0) return p;
  p.x0 = x0;
  p.y0 = y0;
  p.values = dense.block(y0, x0, y1 - y0 + 1, x1 - x0 + 1);
  return p;
}

Heatmap2D HeatmapPatch::to_dense() const {
  Heatmap2D dense = Heatmap2D::Zero(height, width);
  if (values.size() > 0) dense.block(y0, x0, values.rows(), values.cols()) = values;
  return dense;
}

ViewHeatmaps densify(const std::vector<HeatmapPatch>& patches) {
  ViewHeatmaps out;
  out.reserve(patches.size());
  for (const auto& p : patches) out.push_back(p.to_dense());
  return out;
}

// ---------------------------------------------------------------------------
// Scenes

void SceneConfig::validate() const {
  if (!(extent_x > 0.0 && extent_y > 0.0)) throw Error(Errc::InvalidArgument, "scene extent must be positive");
  if (persons < 1) throw Error(Errc::InvalidArgument, "need at least one person");
  if (sensors.empty()) throw Error(Errc::InvalidArgument, "need at least one sensor");
  if (!(frame_rate > 0.0) || !(duration >= 0.0)) throw Error(Errc::InvalidArgument, "bad frame rate or duration");
  if (!(heatmap_sigma > 0.0)) throw Error(Errc::InvalidArgument, "heatmap sigma must be positive");
  if (!(2.0 * margin < std::min(extent_x, extent_y)))
    throw Error(Errc::InvalidArgument, "margin leaves no room inside the extent");
  noise.validate();
  ranges.validate();
  for (const Sensor& s : sensors)
    if (s.lidar) s.lidar->validate();
}

int SceneConfig::frame_count() const { return static_cast<int>(std::lround(duration * frame_rate)); }

namespace {

Sensor make_sensor(const std::string& id, const Vec3d& eye, const Vec3d& target, double fov_deg, int w, int h,
                   double frame_rate) {
  const double focal = (w / 2.0) / std::tan(fov_deg * std::numbers::pi / 360.0);
  Camera cam = look_at<double>(eye, target, Vec3d::UnitZ(), focal, w, h);
  ScanPatternParams lidar;
  lidar.kind = ScanKind::Rose;
  lidar.alpha = 0.6 * h;
  lidar.duration = 1.0 / frame_rate;
  lidar.width = w;
  lidar.height = h;
  return {id, cam, lidar};
}

}  // namespace

SceneConfig panoptic_preset() {
  SceneConfig c;
  c.name = "panoptic";
  c.extent_x = 5.0;
  c.extent_y = 5.0;
  c.persons = 3;
  for (int i = 0; i < 5; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 5.0 + 0.3;
    const Vec3d eye(4.5 * std::cos(a), 4.5 * std::sin(a), 2.2);
    c.sensors.push_back(make_sensor("s" + std::to_string(i), eye, Vec3d(0, 0, 0.9), 70.0, 256, 192, c.frame_rate));
  }
  return c;
}

SceneConfig basketball_preset() {
  SceneConfig c;
  c.name = "basketball";
  c.extent_x = 35.0;
  c.extent_y = 17.0;
  c.persons = 10;
  c.margin = 1.0;
  const Vec3d corners[] = {{20, 11, 5}, {-20, 11, 5}, {-20, -11, 5}, {20, -11, 5}};
  for (int i = 0; i < 4; ++i)
    c.sensors.push_back(make_sensor("s" + std::to_string(i), corners[i], Vec3d(0, 0, 1.0), 80.0, 480, 270, c.frame_rate));
  return c;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ a);
  h = splitmix(h ^ b);
  return splitmix(h ^ c);
}

std::vector<std::vector<PoseParams>> simulate_motion(const SceneConfig& config) {
  config.validate();
  std::mt19937_64 rng(mix_seed(config.seed, 0x6d6f74696f6eULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Range xr{-config.extent_x / 2 + config.margin, config.extent_x / 2 - config.margin};
  const Range yr{-config.extent_y / 2 + config.margin, config.extent_y / 2 - config.margin};
  const AngleRanges& r = config.ranges;
  const double dt = 1.0 / config.frame_rate;
  const double ws = config.walk_scale;

  struct State {
    PoseParams params;
    Vec2d velocity = Vec2d::Zero();
  };
  std::vector<State> people;
  for (int i = 0; i < config.persons; ++i) {
    State s;
    s.params = sample_pose_params(rng, r);
    // Keep roots apart where the extent allows it.
    for (int attempt = 0; attempt < 100; ++attempt) {
      s.params.root = Vec3d(uniform(rng, xr), uniform(rng, yr), 0.0);
      bool clear = true;
      for (const State& o : people) clear = clear && (o.params.root - s.params.root).norm() > 1.0;
      if (clear) break;
    }
    people.push_back(s);
  }

  std::vector<std::vector<PoseParams>> frames;
  const int n = config.frame_count();
  for (int f = 0; f < n; ++f) {
    std::vector<PoseParams> snapshot;
    for (const State& s : people) snapshot.push_back(s.params);
    frames.push_back(std::move(snapshot));

    for (State& s : people) {
      PoseParams& p = s.params;
      // Bounded random walk in articulation space, with rejection if the prior would break.
      for (int attempt = 0; attempt < 20; ++attempt) {
        PoseParams q = p;
        auto step = [&](double& x, const Range& range, double sd) { x = reflect(x + ws * sd * gauss(rng), range); };
        step(q.lean, r.lean, 0.02);
        for (int side = 0; side < 2; ++side) {
          step(q.hip_flex[side], r.hip_flex, 0.08);
          step(q.hip_abd[side], r.hip_abd, 0.03);
          step(q.knee[side], r.knee, 0.1);
          step(q.shoulder_flex[side], r.shoulder_flex, 0.1);
          step(q.shoulder_abd[side], r.shoulder_abd, 0.08);
          step(q.elbow[side], r.elbow, 0.12);
        }
        step(q.head_pitch, r.head_pitch, 0.04);
        step(q.head_yaw, r.head_yaw, 0.06);
        q.yaw = wrap_angle(q.yaw + ws * 0.1 * gauss(rng));
        if (prior_vanishes(build_pose(q))) {
          p = q;
          break;
        }
      }
      s.velocity += ws * 0.3 * Vec2d(gauss(rng), gauss(rng));
      if (s.velocity.norm() > 1.5) s.velocity *= 1.5 / s.velocity.norm();
      const Vec2d next = p.root.head<2>() + dt * s.velocity;
      const double nx = reflect(next.x(), xr), ny = reflect(next.y(), yr);
      if (nx != next.x()) s.velocity.x() = -s.velocity.x();
      if (ny != next.y()) s.velocity.y() = -s.velocity.y();
      p.root = Vec3d(nx, ny, 0.0);
    }
  }
  return frames;
}

SceneFrame render_frame(const SceneConfig& config, int index, const std::vector<PoseParams>& people) {
  SceneFrame frame;
  frame.index = index;
  frame.timestamp = index / config.frame_rate;
  std::vector<AvatarBody> bodies;
  for (std::size_t i = 0; i < people.size(); ++i) {
    PersonTruth t;
    t.id = static_cast<int>(i);
    t.pose = build_pose(people[i]);
    bodies.push_back(make_avatar(t.pose));
    frame.persons.push_back(std::move(t));
  }
  for (std::size_t s = 0; s < config.sensors.size(); ++s) {
    const Camera& cam = config.sensors[s].camera;
    frame.depth.push_back(render_depth(bodies, cam));
    for (PersonTruth& t : frame.persons)
      t.views.push_back(project_visible(t.pose, cam, frame.depth.back(), config.visibility_threshold));
  }
  frame.heatmaps.resize(frame.persons.size());
  for (std::size_t i = 0; i < frame.persons.size(); ++i) {
    for (std::size_t s = 0; s < config.sensors.size(); ++s) {
      const Camera& cam = config.sensors[s].camera;
      const auto seed = mix_seed(config.seed, static_cast<std::uint64_t>(index) + 1, s + 1, i + 1);
      const ViewHeatmaps dense =
          synth_heatmaps(frame.persons[i].views[s], cam.width(), cam.height(), config.heatmap_sigma, config.noise, seed);
      std::vector<HeatmapPatch> patches;
      for (const auto& m : dense) patches.push_back(HeatmapPatch::from_dense(m));
      frame.heatmaps[i].push_back(std::move(patches));
    }
  }
  return frame;
}

SequenceGenerator::SequenceGenerator(SceneConfig config) : config_(std::move(config)) {
  motion_ = simulate_motion(config_);
}

SceneFrame SequenceGenerator::frame(int index) const {
  if (index < 0 || index >= size()) throw Error(Errc::InvalidArgument, "frame index out of range");
  return render_frame(config_, index, motion_[index]);
}

SceneFrame SequenceGenerator::next() { return frame(next_++); }

std::vector<SceneFrame> generate_sequence(const SceneConfig& config) {
  SequenceGenerator gen(config);
  std::vector<SceneFrame> frames;
  while (!gen.done()) frames.push_back(gen.next());
  return frames;
}

}  // namespace voxfuse
