// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "voxfuse/lidar.hpp"
#include "voxfuse/synth.hpp"

using namespace voxfuse;

namespace {

ScanPatternParams rose(double alpha, double theta0, double t) {
  ScanPatternParams p;
  p.alpha = alpha;
  p.theta0 = theta0;
  p.duration = t;
  p.centers = {Vec2d(320, 240)};
  p.width = 640;
  p.height = 480;
  return p;
}

Camera axis_camera(int w = 201, int h = 151) {
  Mat3d k;
  k << 250, 0, (w - 1) / 2.0, 0, 250, (h - 1) / 2.0, 0, 0, 1;
  return Camera(k, Mat3d::Identity(), Vec3d::Zero(), w, h);
}

}  // namespace

TEST_CASE("first rose sample sits alpha to the right of the center") {
  const auto pts = rose_pattern(rose(100, 0, 0.001));
  CHECK(pts.front().x() == doctest::Approx(420));
  CHECK(pts.front().y() == doctest::Approx(240));
}

TEST_CASE("zero radius at a quarter period of the petal") {
  const auto pts = rose_pattern(rose(100, std::numbers::pi / (2 * kRoseFrequency), 0.001));
  CHECK((pts.front() - Vec2d(320, 240)).norm() < 1e-12);
}

TEST_CASE("one millisecond gives 101 samples inside the radius") {
  const auto pts = rose_pattern(rose(100, 0.7, 0.001));
  CHECK(pts.size() == 101);
  for (const Vec2d& p : pts) CHECK((p - Vec2d(320, 240)).norm() <= 100 + 1e-9);
  for (double t : {0.0001, 0.01, 0.1, 0.025, 1.0}) CHECK(rose_pattern(rose(50, 0, t)).size() == std::size_t(std::floor(t * 1e5 + 1e-9)) + 1);
}

TEST_CASE("maximum radius is reached when the cosine hits one") {
  const auto pts = rose_pattern(rose(80, 0, 0.05));
  double best = 0;
  for (const Vec2d& p : pts) best = std::max(best, (p - Vec2d(320, 240)).norm());
  CHECK(std::abs(best - 80) < 1e-9);
}

TEST_CASE("trisection triples the single lobe") {
  ScanPatternParams p = rose(60, 0.2, 0.002);
  p.centers.clear();
  const auto single = rose_pattern(p);
  p.kind = ScanKind::RoseTrisection;
  const auto tri = pattern(p);
  CHECK(tri.size() == 3 * single.size());
  const Vec2d centers[3] = {{640 / 3.0, 240}, {320, 240}, {1280 / 3.0, 240}};
  for (int lobe = 0; lobe < 3; ++lobe)
    for (std::size_t n = 0; n < single.size(); ++n) {
      const Vec2d off = tri[lobe * single.size() + n] - centers[lobe];
      CHECK((off - (single[n] - Vec2d(319.5, 239.5))).norm() < 1e-9);
    }
}

TEST_CASE("horizontal lines are equidistant rows") {
  ScanPatternParams p;
  p.kind = ScanKind::HorizontalLines;
  p.line_count = 2;
  p.sample_count = 50;
  p.width = 80;
  p.height = 100;
  const auto pts = pattern(p);
  CHECK(pts.size() == 50);
  int top = 0, bottom = 0;
  for (const Vec2d& q : pts) {
    if (std::abs(q.y() - 100.0 / 3) < 1e-12) ++top;
    if (std::abs(q.y() - 200.0 / 3) < 1e-12) ++bottom;
    CHECK(q.x() >= -0.5);
    CHECK(q.x() < 79.5);
  }
  CHECK(top == 25);
  CHECK(bottom == 25);
}

TEST_CASE("random pattern is reproducible") {
  ScanPatternParams p;
  p.kind = ScanKind::Random;
  p.sample_count = 1000;
  p.width = 64;
  p.height = 48;
  p.seed = 12;
  const auto a = pattern(p), b = pattern(p);
  CHECK(a.size() == 1000);
  CHECK(a == b);
  p.seed = 13;
  CHECK(pattern(p) != a);
}

TEST_CASE("unknown kinds are rejected") {
  CHECK(parse_scan_kind("rose-trisection") == ScanKind::RoseTrisection);
  try {
    parse_scan_kind("spiral");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownKind);
  }
}

TEST_CASE("scanning an empty depth map yields nothing") {
  const Camera cam = axis_camera();
  ScanPatternParams p = rose(60, 0, 0.01);
  p.centers = {Vec2d(100, 75)};
  const auto pts = rose_pattern(p);
  const ScanResult r = scan(empty_depth(201, 151), cam, pts);
  CHECK(r.cloud.empty());
  CHECK(r.no_hit + r.out_of_bounds == static_cast<int>(pts.size()));
}

TEST_CASE("principal point sample lands on the optical axis") {
  const Camera cam = axis_camera();
  DepthMap d = empty_depth(201, 151);
  d(75, 100) = 4.5f;
  const ScanResult r = scan(d, cam, {Vec2d(100, 75)}, 3);
  REQUIRE(r.cloud.size() == 1);
  CHECK((r.cloud.points[0] - Vec3d(0, 0, 4.5)).norm() < 1e-12);
  CHECK(r.cloud.sensor == std::vector<int>{3});
}

TEST_CASE("out-of-bounds samples are counted") {
  const Camera cam = axis_camera();
  DepthMap d = DepthMap::Constant(151, 201, 2.0f);
  const ScanResult r = scan(d, cam, {Vec2d(-3, 10), Vec2d(10, 10), Vec2d(500, 10)});
  CHECK(r.out_of_bounds == 2);
  CHECK(r.cloud.size() == 1);
}

TEST_CASE("scanned sphere points lie on the sphere") {
  const Camera cam = axis_camera();
  AvatarBody ball;
  const Vec3d center(0.2, -0.1, 3.0);
  ball.pose.joints.col(0) = center;
  ball.capsules = {{0, 0, 0.6}};
  const DepthMap d = render_depth({ball}, cam);
  ScanPatternParams p = rose(70, 0.4, 0.02);
  p.centers = {Vec2d(110, 70)};
  p.width = 201;
  p.height = 151;
  const auto pts = rose_pattern(p);
  const ScanResult a = scan(d, cam, pts);
  CHECK(a.cloud.size() > 100);
  CHECK(a.cloud.size() + a.no_hit + a.out_of_bounds == pts.size());
  double worst = 0;
  for (const Vec3d& x : a.cloud.points) worst = std::max(worst, std::abs((x - center).norm() - 0.6));
  CHECK(worst < 1e-4);
  const ScanResult b = scan(d, cam, pts);
  CHECK(a.cloud.points == b.cloud.points);
}
