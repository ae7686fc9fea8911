// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxfuse/estimate.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "voxfuse/error.hpp"

namespace voxfuse {

void FusionParams::validate() const {
  if (!(side > 0.0)) throw Error(Errc::InvalidArgument, "grid side must be positive");
  if (resolution < 2) throw Error(Errc::InvalidArgument, "grid resolution must be >= 2");
  if (dilation < 0) throw Error(Errc::InvalidArgument, "dilation radius must be nonnegative");
  if (!(gating >= 0.0 && gating <= 1.0)) throw Error(Errc::InvalidArgument, "gating strength must lie in [0, 1]");
  if (!(epsilon > 0.0)) throw Error(Errc::InvalidArgument, "epsilon must be positive");
  if (!(sharpness > 0.0)) throw Error(Errc::InvalidArgument, "sharpness must be positive");
}

PersonEstimate fuse_estimate(std::span<const ViewHeatmaps> views, std::span<const Camera> cameras,
                             const PointCloud& cloud, const FusionParams& params, int person_id) {
  params.validate();
  if (views.empty()) throw Error(Errc::NoViews, "fusion needs at least one view");
  if (views.size() == 1 && cloud.empty()) throw Error(Errc::NoViews, "a single view needs a point cloud");

  Vec3d center;
  if (!cloud.empty()) {
    center = cloud.centroid();
  } else if (params.fallback_center) {
    center = *params.fallback_center;
  } else {
    throw Error(Errc::EmptyCloud, "no cloud and no fallback center");
  }
  const VoxelGridSpec spec{center, params.side, Eigen::Vector3i::Constant(params.resolution)};

  VoxelHeatmap vh = backproject(views, cameras, spec);
  if (params.sharpness != 1.0) sharpen(vh, params.sharpness);

  if (params.gating > 0.0 && !cloud.empty()) {
    const OccupancyGrid occ = dilate(occupancy_from_cloud(cloud, spec), params.dilation);
    const double g = params.gating;
    Eigen::VectorXd gate(spec.voxel_count());
    for (long i = 0; i < spec.voxel_count(); ++i) gate[i] = g * occ[i] + (1.0 - g);
    vh.data() = gate.asDiagonal() * vh.data();
  }

  auto normalized = std::make_shared<VoxelHeatmap>(normalize(vh, params.epsilon));
  PersonEstimate out;
  out.person_id = person_id;
  out.pose = soft_argmax(*normalized);
  out.uncertainty = person_uncertainty(*normalized);
  out.heatmap = std::move(normalized);
  return out;
}

Keypoints heatmap_peaks(const ViewHeatmaps& maps, double min_confidence) {
  if (static_cast<int>(maps.size()) != kNumJoints) throw Error(Errc::InvalidArgument, "expected 17 heatmap channels");
  Keypoints kp;
  for (int k = 0; k < kNumJoints; ++k) {
    const Heatmap2D& m = maps[k];
    kp.visible[k] = false;
    kp.confidence[k] = 0.0;
    if (m.size() == 0) continue;
    Eigen::Index r = 0, c = 0;
    const double peak = m.maxCoeff(&r, &c);
    if (!(peak > 0.0)) continue;
    auto offset = [](double lo, double mid, double hi) {
      const double curv = lo - 2.0 * mid + hi;
      if (!(curv < 0.0)) return 0.0;
      return std::clamp(0.5 * (lo - hi) / curv, -0.5, 0.5);
    };
    double dx = 0.0, dy = 0.0;
    if (c > 0 && c + 1 < m.cols()) dx = offset(m(r, c - 1), peak, m(r, c + 1));
    if (r > 0 && r + 1 < m.rows()) dy = offset(m(r - 1, c), peak, m(r + 1, c));
    kp.pixels.col(k) = Vec2d(c + dx, r + dy);
    kp.confidence[k] = peak;
    kp.visible[k] = peak >= min_confidence;
  }
  return kp;
}

Pose dlt_triangulate(std::span<const Keypoints> peaks, std::span<const Camera> cameras) {
  if (peaks.size() != cameras.size()) throw Error(Errc::InvalidArgument, "views and cameras differ in count");
  std::vector<Mat3d> kinv;
  std::vector<Mat34d> ext;
  for (const Camera& cam : cameras) {
    if (std::abs(cam.intrinsics().determinant()) <= 1e-12) throw Error(Errc::SingularIntrinsics, "singular intrinsics");
    kinv.push_back(cam.intrinsics().inverse());
    Mat34d p;
    p << cam.rotation(), cam.translation();
    ext.push_back(p);
  }

  Pose pose;
  for (int k = 0; k < kNumJoints; ++k) {
    std::vector<int> seen;
    for (std::size_t v = 0; v < peaks.size(); ++v)
      if (peaks[v].visible[k]) seen.push_back(static_cast<int>(v));
    pose.valid[k] = false;
    pose.joints.col(k).setZero();
    if (seen.size() < 2) continue;

    Eigen::MatrixXd a(2 * seen.size(), 4);
    for (std::size_t i = 0; i < seen.size(); ++i) {
      const int v = seen[i];
      const Vec3d x = kinv[v] * peaks[v].pixels.col(k).homogeneous();
      const double w = peaks[v].confidence[k];
      a.row(2 * i) = w * (x.x() / x.z() * ext[v].row(2) - ext[v].row(0));
      a.row(2 * i + 1) = w * (x.y() / x.z() * ext[v].row(2) - ext[v].row(1));
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Vec4d h = svd.matrixV().col(3);
    if (std::abs(h.w()) <= 1e-12 * h.norm()) continue;  // point at infinity
    pose.joints.col(k) = h.hnormalized();
    pose.valid[k] = true;
  }
  return pose;
}

std::vector<PersonEstimate> filter_pseudo_labels(const std::vector<PersonEstimate>& estimates, double lambda) {
  std::vector<PersonEstimate> out;
  std::copy_if(estimates.begin(), estimates.end(), std::back_inserter(out),
               [lambda](const PersonEstimate& e) { return e.uncertainty < lambda; });
  return out;
}

void RefineParams::validate() const {
  if (!(w_2d >= 0.0 && w_prior >= 0.0)) throw Error(Errc::InvalidArgument, "refinement weights must be nonnegative");
  if (iterations < 0 || max_backtracks < 0) throw Error(Errc::InvalidArgument, "iteration counts must be nonnegative");
  if (!(initial_step > 0.0) || !(shrink > 0.0 && shrink < 1.0) || !(armijo > 0.0 && armijo < 1.0))
    throw Error(Errc::InvalidArgument, "bad line-search constants");
}

namespace {

// The refinement objective as weighted norms of residual blocks:
// sum_i weight_i * |r_i|. Blocks mirror the terms of the unsupervised loss.
struct ResidualBlocks {
  std::vector<double> values;
  std::vector<int> offsets;  // block i spans [offsets[i], offsets[i + 1])
  std::vector<double> weights;

  void add(std::initializer_list<double> r, double w) {
    if (offsets.empty()) offsets.push_back(0);
    values.insert(values.end(), r);
    offsets.push_back(static_cast<int>(values.size()));
    weights.push_back(w);
  }
};

ResidualBlocks residuals(const Pose& pose, std::span<const Keypoints> obs, std::span<const Camera> cams,
                         const RefineParams& p) {
  ResidualBlocks out;
  for (std::size_t v = 0; v < obs.size(); ++v)
    for (int k = 0; k < kNumJoints; ++k) {
      if (!obs[v].visible[k] || !pose.valid[k]) continue;
      const auto px = try_project(cams[v], Vec3d(pose.joints.col(k)));
      const Vec2d r = px ? Vec2d(*px - obs[v].pixels.col(k)) : Vec2d::Zero();
      out.add({r.x(), r.y()}, px ? p.w_2d : 0.0);
    }
  const double wl = p.w_prior * p.gamma.length;
  for (const auto& bone : p.bones.bones) {
    const double len = bone_valid(pose, bone) ? bone_length(pose, bone) : 0.5 * (p.bones.l_min + p.bones.l_max);
    out.add({std::max(len - p.bones.l_max, 0.0) + std::max(p.bones.l_min - len, 0.0)}, wl);
  }
  const double ws = p.w_prior * p.gamma.symm;
  for (auto [i, j] : p.bones.symmetric) {
    const auto& a = p.bones.bones[i];
    const auto& b = p.bones.bones[j];
    const bool ok = bone_valid(pose, a) && bone_valid(pose, b);
    out.add({ok ? bone_length(pose, a) - bone_length(pose, b) : 0.0}, ws);
  }
  AngleTerms<double> t;
  try {
    t = l_angle_terms(pose, p.mode);
  } catch (const Error&) {
  }
  const double wa = p.w_prior * p.gamma.angle;
  out.add({t.head}, wa);
  out.add({t.left_leg}, wa);
  out.add({t.right_leg}, wa);
  return out;
}

// Reweighted Gauss-Newton direction: each norm |r_i| is replaced by
// |r_i|^2 / (2 |r_i|) at the current point, which shares its gradient.
std::optional<JointGradient> reweighted_direction(const Pose& pose, std::span<const Keypoints> obs,
                                                  std::span<const Camera> cams, const RefineParams& p) {
  constexpr int n = 3 * kNumJoints;
  const ResidualBlocks r0 = residuals(pose, obs, cams, p);
  const int m = static_cast<int>(r0.values.size());
  Eigen::MatrixXd jac(m, n);
  constexpr double h = 1e-6;
  Pose q = pose;
  for (int c = 0; c < n; ++c) {
    const double x0 = q.joints(c % 3, c / 3);
    q.joints(c % 3, c / 3) = x0 + h;
    const ResidualBlocks rp = residuals(q, obs, cams, p);
    q.joints(c % 3, c / 3) = x0 - h;
    const ResidualBlocks rm = residuals(q, obs, cams, p);
    q.joints(c % 3, c / 3) = x0;
    if (rp.values.size() != r0.values.size() || rm.values.size() != r0.values.size()) return std::nullopt;
    for (int i = 0; i < m; ++i) jac(i, c) = (rp.values[i] - rm.values[i]) / (2.0 * h);
  }
  Eigen::MatrixXd jtwj = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd jtwr = Eigen::VectorXd::Zero(n);
  for (std::size_t b = 0; b + 1 < r0.offsets.size(); ++b) {
    if (r0.weights[b] == 0.0) continue;
    const int lo = r0.offsets[b], len = r0.offsets[b + 1] - lo;
    const Eigen::Map<const Eigen::VectorXd> rb(r0.values.data() + lo, len);
    const double w = r0.weights[b] / std::max(rb.norm(), 1e-9);
    const auto jb = jac.middleRows(lo, len);
    jtwj.noalias() += w * jb.transpose() * jb;
    jtwr.noalias() += w * jb.transpose() * rb;
  }
  const double damping = 1e-9 * std::max(jtwj.diagonal().maxCoeff(), 1e-12);
  jtwj.diagonal().array() += damping;
  const Eigen::VectorXd dx = jtwj.ldlt().solve(-jtwr);
  if (!dx.allFinite()) return std::nullopt;
  return JointGradient(Eigen::Map<const JointGradient>(dx.data()));
}

}  // namespace

RefineResult refine_pose(const Pose& init, std::span<const Keypoints> pseudo2d, std::span<const Camera> cameras,
                         const RefineParams& params) {
  params.validate();
  LossContext ctx;
  ctx.observed = pseudo2d;
  ctx.cameras = cameras;
  ctx.bones = params.bones;
  ctx.gamma = params.gamma;
  ctx.mode = params.mode;
  ctx.weights = LossWeights{params.w_2d, 0.0, params.w_prior, 0.0};

  RefineResult out;
  out.pose = init;
  if (params.w_prior == 0.0) {
    for (int k = 0; k < kNumJoints; ++k) {
      if (!init.valid[k]) continue;
      int views = 0;
      for (const auto& kp : pseudo2d) views += kp.visible[k] ? 1 : 0;
      if (views < 2) out.underconstrained = true;
    }
  }

  double f = evaluate(LossId::Unsup, init, ctx);
  if (!std::isfinite(f) || !init.all_finite())
    throw Error(Errc::NonFiniteObjective, "objective is not finite at the initial pose");
  out.initial_objective = f;

  for (int it = 0; it < params.iterations && f > 0.0; ++it) {
    const JointGradient g = grad(LossId::Unsup, out.pose, ctx).gradient;
    if (!g.allFinite() || g.isZero(0.0)) break;
    JointGradient dir;
    const auto gn_dir = reweighted_direction(out.pose, pseudo2d, cameras, params);
    if (gn_dir && (g.array() * gn_dir->array()).sum() < 0.0) {
      dir = *gn_dir;
    } else {
      dir = -g / g.norm();
    }
    // No joint moves more than the initial step on the first trial.
    const double longest = dir.colwise().norm().maxCoeff();
    if (longest > params.initial_step) dir *= params.initial_step / longest;
    const double slope = (g.array() * dir.array()).sum();

    bool accepted = false;
    double t = 1.0;
    for (int b = 0; b <= params.max_backtracks; ++b, t *= params.shrink) {
      Pose trial = out.pose;
      trial.joints += t * dir;
      double ft;
      try {
        ft = evaluate(LossId::Unsup, trial, ctx);
      } catch (const Error&) {
        continue;  // e.g. trial pushed a joint behind every camera
      }
      if (std::isfinite(ft) && ft <= f + params.armijo * t * slope && ft < f) {
        out.pose = trial;
        f = ft;
        accepted = true;
        break;
      }
    }
    out.iterations = it + 1;
    if (!accepted) break;
  }
  out.objective = f;
  return out;
}

}  // namespace voxfuse
