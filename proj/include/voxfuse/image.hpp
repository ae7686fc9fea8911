// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <vector>

namespace voxfuse {

/// Row-major single-channel float image; rows = height, cols = width.
using Image = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Range along the pixel ray in meters; +inf where nothing was hit.
using DepthMap = Image;

/// One 2D heatmap channel at image resolution.
using Heatmap2D = Image;

/// The 17 joint heatmaps of one view.
using ViewHeatmaps = std::vector<Heatmap2D>;

inline constexpr float kNoHit = std::numeric_limits<float>::infinity();

inline DepthMap empty_depth(int width, int height) { return DepthMap::Constant(height, width, kNoHit); }

/// Bilinear sample with pixel centers at integer coordinates; 0 outside
/// [0, width-1] x [0, height-1].
inline double sample_bilinear(const Image& img, double u, double v) {
  const int w = static_cast<int>(img.cols());
  const int h = static_cast<int>(img.rows());
  if (!(u >= 0.0) || !(v >= 0.0) || u > w - 1 || v > h - 1) return 0.0;
  const int x0 = static_cast<int>(u);
  const int y0 = static_cast<int>(v);
  const int x1 = x0 + 1 < w ? x0 + 1 : x0;
  const int y1 = y0 + 1 < h ? y0 + 1 : y0;
  const double fx = u - x0;
  const double fy = v - y0;
  const double a = img(y0, x0), b = img(y0, x1), c = img(y1, x0), d = img(y1, x1);
  const double top = a + fx * (b - a);
  const double bottom = c + fx * (d - c);
  return top + fy * (bottom - top);
}

}  // namespace voxfuse
