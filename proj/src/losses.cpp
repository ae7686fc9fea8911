// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxfuse/losses.hpp"

#include <cmath>

namespace voxfuse {

namespace {

constexpr double kKinkTol = 1e-12;

double sign0(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

// Accumulates a gradient on an extended joint onto the stored joints.
void add_point_grad(JointGradient& g, int ext, const Vec3d& v) {
  if (ext == kNeck) {
    g.col(idx(Joint::LeftShoulder)) += 0.5 * v;
    g.col(idx(Joint::RightShoulder)) += 0.5 * v;
  } else if (ext == kMidHip) {
    g.col(idx(Joint::LeftHip)) += 0.5 * v;
    g.col(idx(Joint::RightHip)) += 0.5 * v;
  } else {
    g.col(ext) += v;
  }
}

// Gradient of |x| / d x pulled back through a unit normalisation: d(x/|x|)^T g.
Vec3d unit_backprop(const Vec3d& x, const Vec3d& g) {
  const double n = x.norm();
  const Vec3d u = x / n;
  return (g - u * u.dot(g)) / n;
}

bool l1_grad(const Pose& pred, const Pose& target, JointGradient& g) {
  bool kink = false;
  for (int k = 0; k < kNumJoints; ++k) {
    if (!pred.valid[k] || !target.valid[k]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = pred.joints(c, k) - target.joints(c, k);
      if (std::abs(d) <= kKinkTol) kink = true;
      g(c, k) += sign0(d);
    }
  }
  return kink;
}

bool twod_grad(const Pose& pred, std::span<const Keypoints> obs, std::span<const Camera> cams, JointGradient& g,
               double weight) {
  bool kink = false;
  for (std::size_t v = 0; v < obs.size(); ++v) {
    const Camera& cam = cams[v];
    const Mat3d& k = cam.intrinsics();
    for (int j = 0; j < kNumJoints; ++j) {
      if (!obs[v].visible[j] || !pred.valid[j]) continue;
      const Vec3d pc = cam.to_camera(pred.joints.col(j));
      if (!(pc.z() > kMinDepth)) continue;
      const Vec3d h = k * pc;
      const Vec2d px(h.x() / h.z(), h.y() / h.z());
      const Vec2d r = px - obs[v].pixels.col(j);
      const double rn = r.norm();
      if (rn <= kKinkTol) {
        kink = true;
        continue;
      }
      Eigen::Matrix<double, 2, 3> jac;
      jac.row(0) = (k.row(0) - px.x() * k.row(2)) / h.z();
      jac.row(1) = (k.row(1) - px.y() * k.row(2)) / h.z();
      g.col(j) += weight * (cam.rotation().transpose() * (jac.transpose() * (r / rn)));
    }
  }
  return kink;
}

bool length_grad(const Pose& pose, const BoneSpec& spec, JointGradient& g, double weight) {
  bool kink = false;
  for (const auto& bone : spec.bones) {
    if (!bone_valid(pose, bone)) continue;
    const Vec3d v = pose.point(bone.second) - pose.point(bone.first);
    const double len = v.norm();
    if (len <= kKinkTol || std::abs(len - spec.l_max) <= kKinkTol || std::abs(len - spec.l_min) <= kKinkTol) {
      kink = true;
      continue;
    }
    double d = 0.0;
    if (len > spec.l_max) d = 1.0;
    if (len < spec.l_min) d = -1.0;
    if (d == 0.0) continue;
    const Vec3d u = weight * d * v / len;
    add_point_grad(g, bone.second, u);
    add_point_grad(g, bone.first, -u);
  }
  return kink;
}

bool halves_of_midpoint(int mid, int p, int q) {
  using J = Joint;
  auto is = [&](J x, J y) { return (p == idx(x) && q == idx(y)) || (p == idx(y) && q == idx(x)); };
  if (mid == kNeck) return is(J::LeftShoulder, J::RightShoulder);
  if (mid == kMidHip) return is(J::LeftHip, J::RightHip);
  return false;
}

bool symm_grad(const Pose& pose, const BoneSpec& spec, JointGradient& g, double weight) {
  bool kink = false;
  for (auto [i, j] : spec.symmetric) {
    const auto& a = spec.bones[i];
    const auto& b = spec.bones[j];
    if (!bone_valid(pose, a) || !bone_valid(pose, b)) continue;
    // Both halves of a midpoint joint: equal lengths by construction.
    if (a.first == b.first && halves_of_midpoint(a.first, a.second, b.second)) continue;
    const Vec3d va = pose.point(a.second) - pose.point(a.first);
    const Vec3d vb = pose.point(b.second) - pose.point(b.first);
    const double la = va.norm();
    const double lb = vb.norm();
    if (la <= kKinkTol || lb <= kKinkTol || std::abs(la - lb) <= kKinkTol) {
      kink = true;
      continue;
    }
    const double s = weight * sign0(la - lb);
    add_point_grad(g, a.second, s * va / la);
    add_point_grad(g, a.first, -s * va / la);
    add_point_grad(g, b.second, -s * vb / lb);
    add_point_grad(g, b.first, s * vb / lb);
  }
  return kink;
}

bool angle_grad(const Pose& pose, AngleMode mode, JointGradient& g, double weight) {
  using J = Joint;
  const Vec3d neck = pose.neck();
  const Vec3d a = pose.midhip() - neck;
  const Vec3d b = pose[J::LeftShoulder] - neck;
  const Vec3d u = a.normalized();
  const Vec3d w = b.normalized();
  const Vec3d fwd = forward_direction(pose);  // throws on degenerate torso
  bool kink = false;
  Vec3d g_fwd = Vec3d::Zero();

  // A clipped term contributes d/d(fwd) = sign * dir and d/d(dir) = sign * fwd.
  auto clip_active = [&](double s) {
    if (std::abs(s) <= kKinkTol || std::abs(s - 1.0) <= kKinkTol) kink = true;
    return s > 0.0 && s < 1.0;
  };

  if (pose.valid[idx(J::Nose)]) {
    const Vec3d n = pose[J::Nose] - neck;
    if (n.norm() <= kKinkTol) {
      kink = true;
    } else {
      const double sgn = mode == AngleMode::Corrected ? -1.0 : 1.0;
      const Vec3d nh = n.normalized();
      if (clip_active(sgn * fwd.dot(nh))) {
        g_fwd += weight * sgn * nh;
        const Vec3d gn = unit_backprop(n, weight * sgn * fwd);
        add_point_grad(g, idx(J::Nose), gn);
        add_point_grad(g, kNeck, -gn);
      }
    }
  }

  auto leg = [&](J hip, J knee, J ankle) {
    if (!pose.valid[idx(hip)] || !pose.valid[idx(knee)] || !pose.valid[idx(ankle)]) return;
    const Vec3d e = (pose[hip] + pose[ankle]) / 2.0 - pose[knee];
    if (e.norm() <= kKinkTol) {
      kink = true;
      return;
    }
    const Vec3d eh = e.normalized();
    if (!clip_active(fwd.dot(eh))) return;
    g_fwd += weight * eh;
    const Vec3d ge = unit_backprop(e, weight * fwd);
    g.col(idx(hip)) += 0.5 * ge;
    g.col(idx(ankle)) += 0.5 * ge;
    g.col(idx(knee)) -= ge;
  };
  leg(J::LeftHip, J::LeftKnee, J::LeftAnkle);
  leg(J::RightHip, J::RightKnee, J::RightAnkle);

  // fwd = u x w
  const Vec3d gu = w.cross(g_fwd);
  const Vec3d gw = g_fwd.cross(u);
  const Vec3d ga = unit_backprop(a, gu);
  const Vec3d gb = unit_backprop(b, gw);
  add_point_grad(g, kMidHip, ga);
  add_point_grad(g, idx(J::LeftShoulder), gb);
  add_point_grad(g, kNeck, -ga - gb);
  return kink;
}

const Pose& require_target(const LossContext& ctx) {
  if (ctx.target == nullptr) throw Error(Errc::InvalidArgument, "loss needs a target pose");
  return *ctx.target;
}

}  // namespace

UnsupReport l_unsup(const Pose& pred, std::span<const Keypoints> pseudo2d, std::span<const Camera> cameras,
                    const std::optional<Pose>& pseudo3d, double uncertainty, const LossWeights& weights,
                    const BoneSpec& bones, const PriorWeights& gamma, AngleMode mode) {
  weights.validate();
  UnsupReport r;
  const auto twod = l_2d(pred, pseudo2d, cameras);
  r.l_2d = twod.value;
  r.behind_camera = twod.behind_camera;
  if (pseudo3d) r.l_3d = l_3d(pred, *pseudo3d);
  r.prior = l_prior(pred, bones, gamma, mode);
  UnsupComponents c{r.l_2d, r.l_3d, r.prior.total, uncertainty};
  r.indicator_active = pseudo3d_active(c, weights);
  r.l_unsup = compose_unsup(c, weights);
  return r;
}

double evaluate(LossId id, const Pose& pose, const LossContext& ctx) {
  switch (id) {
    case LossId::Pose: return l_pose(pose, require_target(ctx));
    case LossId::ThreeD: return l_3d(pose, require_target(ctx));
    case LossId::TwoD: return l_2d(pose, ctx.observed, ctx.cameras).value;
    case LossId::Length: return l_length(pose, ctx.bones);
    case LossId::Symm: return l_symm(pose, ctx.bones);
    case LossId::Angle: return l_angle(pose, ctx.mode);
    case LossId::Prior: return l_prior(pose, ctx.bones, ctx.gamma, ctx.mode).total;
    case LossId::Unsup: {
      std::optional<Pose> pseudo;
      if (ctx.target) pseudo = *ctx.target;
      return l_unsup(pose, ctx.observed, ctx.cameras, pseudo, ctx.uncertainty, ctx.weights, ctx.bones, ctx.gamma,
                     ctx.mode)
          .l_unsup;
    }
  }
  throw Error(Errc::InvalidArgument, "unknown loss id");
}

JointGradient numeric_grad(LossId id, const Pose& pose, const LossContext& ctx, double h) {
  JointGradient g = JointGradient::Zero();
  Pose p = pose;
  for (int k = 0; k < kNumJoints; ++k) {
    for (int c = 0; c < 3; ++c) {
      const double x0 = p.joints(c, k);
      p.joints(c, k) = x0 + h;
      const double fp = evaluate(id, p, ctx);
      p.joints(c, k) = x0 - h;
      const double fm = evaluate(id, p, ctx);
      p.joints(c, k) = x0;
      g(c, k) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

GradientResult grad(LossId id, const Pose& pose, const LossContext& ctx) {
  GradientResult out;
  JointGradient& g = out.gradient;
  bool kink = false;
  const PriorWeights& gm = ctx.gamma;
  auto prior = [&](double scale) {
    bool k = false;
    if (gm.length != 0.0) k |= length_grad(pose, ctx.bones, g, scale * gm.length);
    if (gm.symm != 0.0) k |= symm_grad(pose, ctx.bones, g, scale * gm.symm);
    if (gm.angle != 0.0) k |= angle_grad(pose, ctx.mode, g, scale * gm.angle);
    return k;
  };

  switch (id) {
    case LossId::Pose:
    case LossId::ThreeD:
      kink = l1_grad(pose, require_target(ctx), g);
      break;
    case LossId::TwoD:
      (void)l_2d(pose, ctx.observed, ctx.cameras);  // contract checks
      kink = twod_grad(pose, ctx.observed, ctx.cameras, g, 1.0);
      break;
    case LossId::Length: kink = length_grad(pose, ctx.bones, g, 1.0); break;
    case LossId::Symm: kink = symm_grad(pose, ctx.bones, g, 1.0); break;
    case LossId::Angle: kink = angle_grad(pose, ctx.mode, g, 1.0); break;
    case LossId::Prior: kink = prior(1.0); break;
    case LossId::Unsup: {
      const LossWeights& w = ctx.weights;
      (void)l_2d(pose, ctx.observed, ctx.cameras);
      kink = twod_grad(pose, ctx.observed, ctx.cameras, g, w.w_2d);
      if (ctx.target && ctx.uncertainty < w.lambda && w.w_3d != 0.0) {
        JointGradient g3 = JointGradient::Zero();
        kink |= l1_grad(pose, *ctx.target, g3);
        g += w.w_3d * g3;
      }
      if (w.w_prior != 0.0) kink |= prior(w.w_prior);
      break;
    }
  }

  if (kink) {
    out.gradient = numeric_grad(id, pose, ctx);
    out.used_fallback = true;
  }
  return out;
}

}  // namespace voxfuse
