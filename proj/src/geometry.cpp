#include "sharpdepth/geometry.hpp"

#include "sharpdepth/errors.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace sharpdepth {
namespace {

Eigen::Index clamp_index(Eigen::Index i, Eigen::Index n) {
  return std::clamp<Eigen::Index>(i, 0, n - 1);
}

}  // namespace

Mask sobel_support(const Mask& valid) {
  const Eigen::Index rows = valid.rows();
  const Eigen::Index cols = valid.cols();
  Mask out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      bool ok = true;
      for (int dr = -1; dr <= 1 && ok; ++dr) {
        for (int dc = -1; dc <= 1 && ok; ++dc) {
          ok = valid(clamp_index(r + dr, rows), clamp_index(c + dc, cols));
        }
      }
      out(r, c) = ok;
    }
  }
  return out;
}

GradientField sobel_gradients(const DepthMap& depth) {
  const Eigen::Index rows = depth.rows();
  const Eigen::Index cols = depth.cols();
  if (rows < 3 || cols < 3) {
    throw ShapeError("Sobel gradients need at least 3x3 pixels, got " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  }
  const Mask support = sobel_support(depth.valid);
  const auto& d = depth.values;
  GradientField g{Grid::Zero(rows, cols), Grid::Zero(rows, cols)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index rm = clamp_index(r - 1, rows);
    const Eigen::Index rp = clamp_index(r + 1, rows);
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!support(r, c)) continue;
      const Eigen::Index cm = clamp_index(c - 1, cols);
      const Eigen::Index cp = clamp_index(c + 1, cols);
      g.gx(r, c) = (d(rm, cp) + 2.0 * d(r, cp) + d(rp, cp)) - (d(rm, cm) + 2.0 * d(r, cm) + d(rp, cm));
      g.gy(r, c) = (d(rp, cm) + 2.0 * d(rp, c) + d(rp, cp)) - (d(rm, cm) + 2.0 * d(rm, c) + d(rm, cp));
    }
  }
  return g;
}

PointCloud project_to_point_cloud(const DepthMap& depth, const CameraIntrinsics& intrinsics,
                                  const std::optional<ColorImage>& colors) {
  intrinsics.check();
  const Eigen::Index n = static_cast<Eigen::Index>(depth.valid_count());
  if (n == 0) throw EmptyInputError("point cloud would be empty: no valid depth pixels");
  if (colors && (colors->rows != depth.rows() || colors->cols != depth.cols())) {
    throw ShapeError("colour image and depth map differ in size");
  }

  PointCloud cloud;
  cloud.points.resize(n, 3);
  if (colors) cloud.colors.emplace(n, 3);
  Eigen::Index i = 0;
  for (Eigen::Index v = 0; v < depth.rows(); ++v) {
    for (Eigen::Index u = 0; u < depth.cols(); ++u) {
      if (!depth.valid(v, u)) continue;
      const double z = depth.values(v, u);
      cloud.points(i, 0) = (static_cast<double>(u) - intrinsics.cx) * z / intrinsics.fx;
      cloud.points(i, 1) = (static_cast<double>(v) - intrinsics.cy) * z / intrinsics.fy;
      cloud.points(i, 2) = z;
      if (colors) {
        for (int ch = 0; ch < 3; ++ch) (*cloud.colors)(i, ch) = colors->at(ch, v, u);
      }
      ++i;
    }
  }
  return cloud;
}

Eigen::Array<double, Eigen::Dynamic, 3, Eigen::RowMajor> reproject_to_pixels(
    const PointCloud& cloud, const CameraIntrinsics& intrinsics) {
  intrinsics.check();
  Eigen::Array<double, Eigen::Dynamic, 3, Eigen::RowMajor> out(cloud.size(), 3);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const double z = cloud.points(i, 2);
    out(i, 0) = cloud.points(i, 0) * intrinsics.fx / z + intrinsics.cx;
    out(i, 1) = cloud.points(i, 1) * intrinsics.fy / z + intrinsics.cy;
    out(i, 2) = z;
  }
  return out;
}

Mask dilate(const Mask& mask, int radius) {
  const Eigen::Index rows = mask.rows();
  const Eigen::Index cols = mask.cols();
  Mask out = Mask::Constant(rows, cols, false);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!mask(r, c)) continue;
      const Eigen::Index r0 = std::max<Eigen::Index>(0, r - radius);
      const Eigen::Index r1 = std::min<Eigen::Index>(rows - 1, r + radius);
      const Eigen::Index c0 = std::max<Eigen::Index>(0, c - radius);
      const Eigen::Index c1 = std::min<Eigen::Index>(cols - 1, c + radius);
      out.block(r0, c0, r1 - r0 + 1, c1 - c0 + 1).setConstant(true);
    }
  }
  return out;
}

double flying_pixel_score(const DepthMap& pred, const DepthMap& gt, const FlyingPixelOptions& options) {
  require_same_shape(pred, gt, "flying_pixel_score");
  if (options.edge_band < 1) throw ConfigError("edge_band must be >= 1");
  if (!(options.margin > 0.0)) throw ConfigError("margin must be positive");

  const GradientField g = sobel_gradients(gt);
  const Mask edges = (g.magnitude() > options.edge_threshold) && gt.valid;
  const Mask band = dilate(edges, options.edge_band) && gt.valid && pred.valid;

  const Eigen::Index rows = gt.rows();
  const Eigen::Index cols = gt.cols();
  const int b = options.edge_band;
  std::size_t total = 0;
  std::size_t flying = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!band(r, c)) continue;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (Eigen::Index rr = std::max<Eigen::Index>(0, r - b); rr <= std::min<Eigen::Index>(rows - 1, r + b); ++rr) {
        for (Eigen::Index cc = std::max<Eigen::Index>(0, c - b); cc <= std::min<Eigen::Index>(cols - 1, c + b); ++cc) {
          if (!gt.valid(rr, cc)) continue;
          lo = std::min(lo, gt.values(rr, cc));
          hi = std::max(hi, gt.values(rr, cc));
        }
      }
      ++total;
      const double d = pred.values(r, c);
      if (d > lo + options.margin && d < hi - options.margin) ++flying;
    }
  }
  if (total == 0) throw EmptyInputError("flying-pixel score: ground-truth edge band is empty");
  return static_cast<double>(flying) / static_cast<double>(total);
}

}  // namespace sharpdepth
