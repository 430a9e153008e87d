#pragma once

#include "sharpdepth/depth_map.hpp"
#include "sharpdepth/geometry.hpp"

#include <filesystem>

namespace sharpdepth::io {

// Portable float map, single channel. Written little-endian with scale -1.0
// and bottom-to-top rows; both byte orders are accepted on read. Raw values
// are kept as stored, validity is finite and > 0.
DepthMap read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);

// 16-bit PNG in millimeters. 0 marks an invalid pixel.
DepthMap read_depth_png_mm(const std::filesystem::path& path);
void write_depth_png_mm(const std::filesystem::path& path, const DepthMap& depth);

// Dispatches on the extension (.pfm or .png).
DepthMap read_depth(const std::filesystem::path& path);

// 8-bit RGB PNG <-> [0,1] float image.
ColorImage read_color_png(const std::filesystem::path& path);
void write_color_png(const std::filesystem::path& path, const ColorImage& image);

// 8-bit single-channel PNG, 255 for true.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_png(const std::filesystem::path& path);

// ASCII PLY with x, y, z and, when present, red, green, blue (uchar).
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace sharpdepth::io
