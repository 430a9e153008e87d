#pragma once

#include "sharpdepth/depth_map.hpp"

#include <optional>
#include <vector>

namespace sharpdepth {

// 3x3 Sobel responses with edge-clamped borders. x kernel is
// [[-1,0,1],[-2,0,2],[-1,0,1]], y kernel its transpose. A pixel whose clamped
// 3x3 support touches an invalid pixel gets gx = gy = 0, so gradients never
// depend on values stored at invalid pixels. Requires at least 3x3.
GradientField sobel_gradients(const DepthMap& depth);

// Pixels with a fully valid clamped 3x3 support.
Mask sobel_support(const Mask& valid);

// 3-channel colour image (channel-major, values in [0,1]) used to tint points.
struct ColorImage {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<float> data;  // 3 * rows * cols, CHW

  float at(int c, Eigen::Index v, Eigen::Index u) const {
    return data[static_cast<std::size_t>((c * rows + v) * cols + u)];
  }
};

// Pinhole back-projection of every valid pixel, row-major pixel order.
PointCloud project_to_point_cloud(const DepthMap& depth, const CameraIntrinsics& intrinsics,
                                  const std::optional<ColorImage>& colors = std::nullopt);

// Inverse of the projection: (u, v, depth) per point.
Eigen::Array<double, Eigen::Dynamic, 3, Eigen::RowMajor> reproject_to_pixels(
    const PointCloud& cloud, const CameraIntrinsics& intrinsics);

struct FlyingPixelOptions {
  int edge_band = 2;             // dilation radius of the GT edge mask, pixels
  double margin = 0.2;           // meters
  double edge_threshold = 0.5;   // GT Sobel magnitude |gx| + |gy|
};

// Fraction of pixels inside the dilated GT edge band whose predicted depth
// lies strictly between (local GT min + margin) and (local GT max - margin),
// the local window being the (2*band+1)^2 neighbourhood. Throws
// EmptyInputError when the band is empty.
double flying_pixel_score(const DepthMap& pred, const DepthMap& gt,
                          const FlyingPixelOptions& options = {});

// Square dilation with Chebyshev radius.
Mask dilate(const Mask& mask, int radius);

}  // namespace sharpdepth
