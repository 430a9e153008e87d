#pragma once

#include "sharpdepth/depth_map.hpp"

#include <filesystem>
#include <vector>

namespace sharpdepth::plot {

// Line chart of a loss series (one point per entry) with min/max labels.
void write_loss_curve_png(const std::filesystem::path& path, const std::vector<double>& values);

// Viridis rendering with a fixed [depth_min, depth_max] range; invalid pixels
// are black.
void write_depth_png(const std::filesystem::path& path, const DepthMap& depth, double depth_min, double depth_max);

}  // namespace sharpdepth::plot
