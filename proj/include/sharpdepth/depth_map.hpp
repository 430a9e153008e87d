#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>

namespace sharpdepth {

using Grid = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense depth in meters plus a validity mask. Indexing is (row, col) =
// (v, u) with the origin at the top-left pixel.
struct DepthMap {
  Grid values;
  Mask valid;

  DepthMap() = default;
  DepthMap(Grid v, Mask m);
  // All pixels valid.
  explicit DepthMap(Grid v);
  // Validity derived from the values: finite and > 0.
  static DepthMap from_values(Grid v);
  static DepthMap constant(Eigen::Index rows, Eigen::Index cols, double depth);

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  std::size_t valid_count() const { return static_cast<std::size_t>(valid.count()); }

  // Throws NumericalError when a valid pixel is non-finite or <= 0.
  void check_invariants() const;
};

struct GradientField {
  Grid gx;
  Grid gy;

  Grid magnitude() const { return gx.abs() + gy.abs(); }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void check() const;
};

struct PointCloud {
  // N x 3, columns X, Y, Z in meters.
  Eigen::Array<double, Eigen::Dynamic, 3, Eigen::RowMajor> points;
  // N x 3 in [0, 1] when present.
  std::optional<Eigen::Array<double, Eigen::Dynamic, 3, Eigen::RowMajor>> colors;

  Eigen::Index size() const { return points.rows(); }
};

void require_same_shape(const DepthMap& a, const DepthMap& b, const char* what);

}  // namespace sharpdepth
