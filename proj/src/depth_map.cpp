#include "sharpdepth/depth_map.hpp"

#include "sharpdepth/errors.hpp"

#include <cmath>
#include <string>

namespace sharpdepth {

DepthMap::DepthMap(Grid v, Mask m) : values(std::move(v)), valid(std::move(m)) {
  if (values.rows() != valid.rows() || values.cols() != valid.cols()) {
    throw ShapeError("depth values and validity mask differ in size");
  }
}

DepthMap::DepthMap(Grid v) : values(std::move(v)) {
  valid = Mask::Constant(values.rows(), values.cols(), true);
}

DepthMap DepthMap::from_values(Grid v) {
  Mask m = v.unaryExpr([](double d) { return std::isfinite(d) && d > 0.0; });
  return DepthMap(std::move(v), std::move(m));
}

DepthMap DepthMap::constant(Eigen::Index rows, Eigen::Index cols, double depth) {
  return DepthMap(Grid::Constant(rows, cols, depth));
}

void DepthMap::check_invariants() const {
  for (Eigen::Index r = 0; r < rows(); ++r) {
    for (Eigen::Index c = 0; c < cols(); ++c) {
      if (!valid(r, c)) continue;
      const double d = values(r, c);
      if (!std::isfinite(d)) {
        throw NumericalError("non-finite depth at pixel (" + std::to_string(c) + ", " +
                             std::to_string(r) + ")");
      }
      if (d <= 0.0) {
        throw NumericalError("non-positive depth at pixel (" + std::to_string(c) + ", " +
                             std::to_string(r) + ")");
      }
    }
  }
}

void CameraIntrinsics::check() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("focal lengths must be positive");
}

void require_same_shape(const DepthMap& a, const DepthMap& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": depth maps differ in size (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

}  // namespace sharpdepth
