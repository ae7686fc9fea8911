// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Calibrated pinhole cameras and rigid/similarity transforms.
//
// Conventions: right-handed world frame with z up. Each camera looks along
// +z of its own frame, with +x to the right and +y down in the image. Pixel
// centers sit at integer coordinates, so pixel (u, v) covers
// [u - 0.5, u + 0.5) x [v - 0.5, v + 0.5). No lens distortion is modelled.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>

#include "voxfuse/error.hpp"
#include "voxfuse/types.hpp"

namespace voxfuse {

template <typename Scalar>
bool is_rotation(const Mat3<Scalar>& r, double tol = 1e-9) {
  using std::abs;
  const Mat3<Scalar> err = r.transpose() * r - Mat3<Scalar>::Identity();
  return err.cwiseAbs().maxCoeff() <= Scalar(tol) && abs(r.determinant() - Scalar(1)) <= Scalar(tol);
}

/// Intrinsics K, world->camera rotation R and translation t, image size.
/// A world point X maps to camera coordinates R * X + t.
template <typename Scalar>
class CameraModel {
 public:
  CameraModel(const Mat3<Scalar>& intrinsics, const Mat3<Scalar>& rotation,
              const Vec3<Scalar>& translation, int width, int height)
      : k_(intrinsics), r_(rotation), t_(translation), width_(width), height_(height) {
    if (!(k_(0, 0) > Scalar(0)) || !(k_(1, 1) > Scalar(0)))
      throw Error(Errc::InvalidCamera, "focal lengths must be positive");
    if (!is_rotation(r_)) throw Error(Errc::InvalidCamera, "rotation is not orthonormal with det +1");
    if (width_ < 1 || height_ < 1) throw Error(Errc::InvalidCamera, "image size must be at least 1x1");
    if (!k_.allFinite() || !t_.allFinite()) throw Error(Errc::InvalidCamera, "non-finite calibration");
  }

  const Mat3<Scalar>& intrinsics() const { return k_; }
  const Mat3<Scalar>& rotation() const { return r_; }
  const Vec3<Scalar>& translation() const { return t_; }
  int width() const { return width_; }
  int height() const { return height_; }

  Vec3<Scalar> center() const { return -r_.transpose() * t_; }
  Vec3<Scalar> to_camera(const Vec3<Scalar>& world) const { return r_ * world + t_; }

  Mat34<Scalar> projection_matrix() const {
    Mat34<Scalar> rt;
    rt << r_, t_;
    return k_ * rt;
  }

  bool contains(const Vec2<Scalar>& pixel) const {
    return pixel.x() >= Scalar(-0.5) && pixel.y() >= Scalar(-0.5) &&
           pixel.x() < Scalar(width_) - Scalar(0.5) && pixel.y() < Scalar(height_) - Scalar(0.5);
  }

 private:
  Mat3<Scalar> k_;
  Mat3<Scalar> r_;
  Vec3<Scalar> t_;
  int width_;
  int height_;
};

using Camera = CameraModel<double>;

inline constexpr double kMinDepth = 1e-9;

/// Projection without the depth check exception; empty when z <= kMinDepth.
template <typename Scalar>
std::optional<Vec2<Scalar>> try_project(const CameraModel<Scalar>& camera, const Vec3<Scalar>& point) {
  const Vec3<Scalar> pc = camera.to_camera(point);
  if (!(pc.z() > Scalar(kMinDepth))) return std::nullopt;
  const Vec3<Scalar> h = camera.intrinsics() * pc;
  return Vec2<Scalar>(h.x() / h.z(), h.y() / h.z());
}

template <typename Scalar>
Vec2<Scalar> project(const CameraModel<Scalar>& camera, const Vec3<Scalar>& point) {
  auto px = try_project(camera, point);
  if (!px) throw Error(Errc::NonPositiveDepth, "point is not in front of the camera");
  return *px;
}

template <typename Scalar>
struct Ray {
  Vec3<Scalar> origin;
  Vec3<Scalar> direction;  // unit length

  Vec3<Scalar> at(Scalar d) const { return origin + d * direction; }
};

template <typename Scalar>
Ray<Scalar> cast_ray(const CameraModel<Scalar>& camera, const Vec2<Scalar>& pixel) {
  using std::abs;
  const Mat3<Scalar>& k = camera.intrinsics();
  if (!(abs(k.determinant()) > Scalar(1e-12))) throw Error(Errc::SingularIntrinsics, "intrinsics not invertible");
  const Vec3<Scalar> local = k.inverse() * Vec3<Scalar>(pixel.x(), pixel.y(), Scalar(1));
  // The inverse of an upper-triangular K keeps z positive; normalise the sign anyway.
  const Vec3<Scalar> dir_cam = local.z() < Scalar(0) ? Vec3<Scalar>(-local) : local;
  return {camera.center(), (camera.rotation().transpose() * dir_cam).normalized()};
}

/// Builds a camera at `eye` looking at `target` with `up` as the world vertical.
template <typename Scalar>
CameraModel<Scalar> look_at(const Vec3<Scalar>& eye, const Vec3<Scalar>& target, const Vec3<Scalar>& up,
                            Scalar focal, int width, int height) {
  const Vec3<Scalar> z = (target - eye).normalized();
  const Vec3<Scalar> x = z.cross(up).normalized();
  const Vec3<Scalar> y = z.cross(x);
  Mat3<Scalar> r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  Mat3<Scalar> k = Mat3<Scalar>::Identity();
  k(0, 0) = focal;
  k(1, 1) = focal;
  k(0, 2) = Scalar(width - 1) / Scalar(2);
  k(1, 2) = Scalar(height - 1) / Scalar(2);
  return CameraModel<Scalar>(k, r, -r * eye, width, height);
}

/// x -> scale * rotation * x + translation.
template <typename Scalar>
struct SimilarityTransform {
  Scalar scale = Scalar(1);
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();

  static SimilarityTransform identity() { return {}; }

  Vec3<Scalar> operator()(const Vec3<Scalar>& x) const { return scale * (rotation * x) + translation; }

  void validate() const {
    if (!(scale > Scalar(0))) throw Error(Errc::InvalidArgument, "similarity scale must be positive");
    if (!is_rotation(rotation)) throw Error(Errc::InvalidArgument, "similarity rotation is not a rotation");
  }
};

template <typename Scalar>
SimilarityTransform<Scalar> inverse(const SimilarityTransform<Scalar>& t) {
  SimilarityTransform<Scalar> out;
  out.scale = Scalar(1) / t.scale;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation) * out.scale;
  return out;
}

/// compose(a, b)(x) == a(b(x)).
template <typename Scalar>
SimilarityTransform<Scalar> compose(const SimilarityTransform<Scalar>& a, const SimilarityTransform<Scalar>& b) {
  SimilarityTransform<Scalar> out;
  out.scale = a.scale * b.scale;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.scale * (a.rotation * b.translation) + a.translation;
  return out;
}

}  // namespace voxfuse
