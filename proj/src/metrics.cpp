// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxfuse/metrics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "voxfuse/error.hpp"

namespace voxfuse {

double mpjpe(const Pose& pred, const Pose& gt, std::optional<double> cap_mm) {
  double sum = 0.0;
  int n = 0, valid = 0;
  for (int k = 0; k < kNumJoints; ++k) {
    if (!pred.valid[k] || !gt.valid[k]) continue;
    ++valid;
    const double e = 1000.0 * (pred.joints.col(k) - gt.joints.col(k)).norm();
    if (cap_mm && e > *cap_mm) continue;
    sum += e;
    ++n;
  }
  if (valid == 0) throw Error(Errc::NoValidJoints, "no mutually valid joints");
  return n == 0 ? 0.0 : sum / n;
}

SimilarityTransform<double> procrustes(const Pose& src, const Pose& dst) {
  std::vector<int> ids;
  for (int k = 0; k < kNumJoints; ++k)
    if (src.valid[k] && dst.valid[k]) ids.push_back(k);
  if (ids.size() < 3) throw Error(Errc::DegenerateConfiguration, "alignment needs three joints");
  const auto n = static_cast<Eigen::Index>(ids.size());
  Eigen::Matrix3Xd x(3, n), y(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.col(i) = src.joints.col(ids[i]);
    y.col(i) = dst.joints.col(ids[i]);
  }
  const Vec3d mx = x.rowwise().mean(), my = y.rowwise().mean();
  x.colwise() -= mx;
  y.colwise() -= my;

  const Eigen::Vector3d sx = Eigen::JacobiSVD<Eigen::Matrix3Xd>(x).singularValues();
  const Eigen::Vector3d sy = Eigen::JacobiSVD<Eigen::Matrix3Xd>(y).singularValues();
  if (!(sx[1] > 1e-9 * std::max(1.0, sx[0])) || !(sy[1] > 1e-9 * std::max(1.0, sy[0])))
    throw Error(Errc::DegenerateConfiguration, "joints are collinear or coincident");

  const Mat3d cov = y * x.transpose() / static_cast<double>(n);
  Eigen::JacobiSVD<Mat3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3d d = Vec3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d.z() = -1.0;
  SimilarityTransform<double> t;
  t.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  const double var = x.squaredNorm() / static_cast<double>(n);
  t.scale = svd.singularValues().dot(d) / var;
  t.translation = my - t.scale * t.rotation * mx;
  return t;
}

double pa_mpjpe(const Pose& pred, const Pose& gt) { return mpjpe(apply_similarity(procrustes(pred, gt), pred), gt); }

void Box3D::validate() const {
  if (!(size.array() > 0.0).all()) throw Error(Errc::InvalidArgument, "box sizes must be positive");
  if (!center.allFinite() || !std::isfinite(yaw)) throw Error(Errc::InvalidArgument, "box must be finite");
}

Box3D box_from_pose(const Pose& pose, double pad) {
  Vec3d lo = Vec3d::Constant(1e300), hi = Vec3d::Constant(-1e300);
  for (int k = 0; k < kNumJoints; ++k) {
    if (!pose.valid[k]) continue;
    lo = lo.cwiseMin(Vec3d(pose.joints.col(k)));
    hi = hi.cwiseMax(Vec3d(pose.joints.col(k)));
  }
  if (pose.valid_count() == 0) throw Error(Errc::NoValidJoints, "pose has no valid joints");
  lo.array() -= pad;
  hi.array() += pad;
  Box3D b;
  b.center = (lo + hi) / 2.0;
  const Vec3d ext = hi - lo;
  b.size = Vec3d(ext.y(), ext.x(), ext.z());
  return b;
}

Box3D constant_box_from_pose(const Pose& pose) {
  if (pose.valid_count() == 0) throw Error(Errc::NoValidJoints, "pose has no valid joints");
  double floor = 1e300;
  for (int k = 0; k < kNumJoints; ++k)
    if (pose.valid[k]) floor = std::min(floor, pose.joints(2, k));
  Vec3d c = Vec3d::Zero();
  int n = 0;
  for (int k = 0; k < kNumJoints; ++k)
    if (pose.valid[k]) c += pose.joints.col(k), ++n;
  c /= n;
  Box3D b;
  b.size = Vec3d(0.8, 0.8, 1.9);
  b.center = Vec3d(c.x(), c.y(), floor - 0.1 + 0.95);
  return b;
}

std::vector<Vec2d> footprint(const Box3D& box) {
  const Vec2d along(std::cos(box.yaw), std::sin(box.yaw));
  const Vec2d across(-along.y(), along.x());
  const double hl = box.size.y() / 2.0, hw = box.size.x() / 2.0;
  const Vec2d c = box.center.head<2>();
  return {c - hl * along - hw * across, c + hl * along - hw * across, c + hl * along + hw * across,
          c - hl * along + hw * across};
}

namespace {

double cross2(const Vec2d& a, const Vec2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double polygon_area(const std::vector<Vec2d>& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) a += cross2(p[i], p[(i + 1) % p.size()]);
  return std::abs(a) / 2.0;
}

// Sutherland-Hodgman clipping of `subject` against the convex counter-clockwise `clip`.
std::vector<Vec2d> clip_polygon(std::vector<Vec2d> subject, const std::vector<Vec2d>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec2d a = clip[e], b = clip[(e + 1) % clip.size()];
    auto side = [&](const Vec2d& p) { return cross2(b - a, p - a); };
    std::vector<Vec2d> out;
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vec2d p = subject[i], q = subject[(i + 1) % subject.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace

double iou3d(const Box3D& a, const Box3D& b) {
  a.validate();
  b.validate();
  const double za0 = a.center.z() - a.size.z() / 2.0, za1 = a.center.z() + a.size.z() / 2.0;
  const double zb0 = b.center.z() - b.size.z() / 2.0, zb1 = b.center.z() + b.size.z() / 2.0;
  const double dz = std::min(za1, zb1) - std::max(za0, zb0);
  if (dz <= 0.0) return 0.0;
  const auto poly = clip_polygon(footprint(a), footprint(b));
  const double inter = poly.size() < 3 ? 0.0 : polygon_area(poly) * dz;
  const double va = a.size.prod(), vb = b.size.prod();
  const double uni = va + vb - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double average_precision(const std::vector<Box3D>& detections, const std::vector<Box3D>& gts, double iou_threshold) {
  return average_precision(std::vector<std::vector<Box3D>>{detections}, std::vector<std::vector<Box3D>>{gts},
                           iou_threshold);
}

double average_precision(const std::vector<std::vector<Box3D>>& detections,
                         const std::vector<std::vector<Box3D>>& gts, double iou_threshold) {
  if (detections.size() != gts.size()) throw Error(Errc::InvalidArgument, "detections and ground truth differ in frames");
  std::size_t total_gt = 0;
  struct Ref {
    std::size_t frame, index;
    double score;
  };
  std::vector<Ref> order;
  for (std::size_t f = 0; f < gts.size(); ++f) {
    total_gt += gts[f].size();
    for (std::size_t i = 0; i < detections[f].size(); ++i) order.push_back({f, i, detections[f][i].score});
  }
  if (total_gt == 0 || order.empty()) return 0.0;
  std::stable_sort(order.begin(), order.end(), [](const Ref& a, const Ref& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> taken;
  for (const auto& g : gts) taken.emplace_back(g.size(), false);
  std::vector<double> precision, recall;
  int tp = 0, fp = 0;
  for (const Ref& r : order) {
    const auto& frame_gts = gts[r.frame];
    double best = -1.0;
    std::size_t best_j = frame_gts.size();
    for (std::size_t j = 0; j < frame_gts.size(); ++j) {
      if (taken[r.frame][j]) continue;
      const double iou = iou3d(detections[r.frame][r.index], frame_gts[j]);
      if (iou > best) best = iou, best_j = j;
    }
    if (best_j < frame_gts.size() && best >= iou_threshold) {
      taken[r.frame][best_j] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }
  // Precision envelope, then area over recall steps.
  for (std::size_t i = precision.size() - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(Errc::InvalidArgument, "need two equal-length samples");
  const auto rx = ranks(x), ry = ranks(y);
  const Eigen::Map<const Eigen::VectorXd> a(rx.data(), static_cast<Eigen::Index>(rx.size()));
  const Eigen::Map<const Eigen::VectorXd> b(ry.data(), static_cast<Eigen::Index>(ry.size()));
  const Eigen::VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
  const double den = ca.norm() * cb.norm();
  return den > 0.0 ? ca.dot(cb) / den : 0.0;
}

}  // namespace voxfuse
