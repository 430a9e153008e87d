#include "sharpdepth/io.hpp"

#include "sharpdepth/errors.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace sharpdepth::io {
namespace {

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::ofstream open_for_write(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ofstream out(path, std::ios::out | std::ios::trunc | mode);
  if (!out) throw IoError("cannot open " + quoted(path) + " for writing");
  return out;
}

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

std::string read_token(std::istream& in) {
  std::string tok;
  char ch = 0;
  while (in.get(ch) && std::isspace(static_cast<unsigned char>(ch))) {
  }
  if (!in) return tok;
  tok.push_back(ch);
  while (in.get(ch) && !std::isspace(static_cast<unsigned char>(ch))) tok.push_back(ch);
  // The single whitespace after the scale token separates header from data.
  return tok;
}

cv::Mat imread_checked(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) throw IoError("file not found: " + quoted(path));
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw IoError("cannot decode image " + quoted(path));
  return m;
}

void imwrite_checked(const std::filesystem::path& path, const cv::Mat& m) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + quoted(path) + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + quoted(path));
}

}  // namespace

DepthMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + quoted(path));
  const std::string magic = read_token(in);
  if (magic == "PF") throw IoError("unsupported format: colour PFM " + quoted(path));
  if (magic != "Pf") throw IoError("unsupported format: not a PFM file " + quoted(path));
  const std::string w_tok = read_token(in);
  const std::string h_tok = read_token(in);
  const std::string s_tok = read_token(in);
  int width = 0;
  int height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(w_tok);
    height = std::stoi(h_tok);
    scale = std::stod(s_tok);
  } catch (const std::exception&) {
    throw IoError("malformed PFM header in " + quoted(path));
  }
  if (width <= 0 || height <= 0 || scale == 0.0) throw IoError("malformed PFM header in " + quoted(path));

  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  std::vector<float> buf(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float))) {
    throw IoError("truncated PFM data in " + quoted(path));
  }
  Grid values(height, width);
  for (int r = 0; r < height; ++r) {
    // PFM rows run bottom to top.
    const float* row = buf.data() + static_cast<std::size_t>(height - 1 - r) * static_cast<std::size_t>(width);
    for (int c = 0; c < width; ++c) {
      float f = row[c];
      if (swap) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &f, sizeof bits);
        bits = byteswap32(bits);
        std::memcpy(&f, &bits, sizeof bits);
      }
      values(r, c) = f;
    }
  }
  return DepthMap::from_values(std::move(values));
}

void write_pfm(const std::filesystem::path& path, const DepthMap& depth) {
  auto out = open_for_write(path, std::ios::binary);
  out << "Pf\n" << depth.cols() << " " << depth.rows() << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(depth.cols()));
  for (Eigen::Index r = depth.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < depth.cols(); ++c) {
      float f = static_cast<float>(depth.values(r, c));
      if constexpr (std::endian::native != std::endian::little) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &f, sizeof bits);
        bits = byteswap32(bits);
        std::memcpy(&f, &bits, sizeof bits);
      }
      row[static_cast<std::size_t>(c)] = f;
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed for " + quoted(path));
}

DepthMap read_depth_png_mm(const std::filesystem::path& path) {
  const cv::Mat m = imread_checked(path, cv::IMREAD_UNCHANGED);
  if (m.depth() != CV_16U || m.channels() != 1) {
    throw IoError("unsupported format: depth PNG must be single-channel 16-bit " + quoted(path));
  }
  Grid values(m.rows, m.cols);
  Mask valid(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const auto* row = m.ptr<std::uint16_t>(r);
    for (int c = 0; c < m.cols; ++c) {
      values(r, c) = row[c] / 1000.0;
      valid(r, c) = row[c] != 0;
    }
  }
  return DepthMap(std::move(values), std::move(valid));
}

void write_depth_png_mm(const std::filesystem::path& path, const DepthMap& depth) {
  cv::Mat m(static_cast<int>(depth.rows()), static_cast<int>(depth.cols()), CV_16UC1);
  for (int r = 0; r < m.rows; ++r) {
    auto* row = m.ptr<std::uint16_t>(r);
    for (int c = 0; c < m.cols; ++c) {
      const double d = depth.values(r, c);
      if (!depth.valid(r, c) || !std::isfinite(d) || d <= 0.0) {
        row[c] = 0;
        continue;
      }
      row[c] = static_cast<std::uint16_t>(std::clamp(std::lround(d * 1000.0), 1L, 65535L));
    }
  }
  imwrite_checked(path, m);
}

DepthMap read_depth(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".png") return read_depth_png_mm(path);
  throw IoError("unsupported depth format '" + ext + "' for " + quoted(path));
}

ColorImage read_color_png(const std::filesystem::path& path) {
  const cv::Mat bgr = imread_checked(path, cv::IMREAD_COLOR);
  ColorImage img;
  img.rows = bgr.rows;
  img.cols = bgr.cols;
  img.data.resize(static_cast<std::size_t>(3 * bgr.rows * bgr.cols));
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        // OpenCV stores BGR.
        img.data[static_cast<std::size_t>((ch * bgr.rows + r) * bgr.cols + c)] = row[c][2 - ch] / 255.0f;
      }
    }
  }
  return img;
}

void write_color_png(const std::filesystem::path& path, const ColorImage& image) {
  cv::Mat bgr(static_cast<int>(image.rows), static_cast<int>(image.cols), CV_8UC3);
  for (int r = 0; r < bgr.rows; ++r) {
    auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const float v = std::clamp(image.at(ch, r, c), 0.0f, 1.0f);
        row[c][2 - ch] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  imwrite_checked(path, bgr);
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  cv::Mat m(static_cast<int>(mask.rows()), static_cast<int>(mask.cols()), CV_8UC1);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) m.at<std::uint8_t>(r, c) = mask(r, c) ? 255 : 0;
  }
  imwrite_checked(path, m);
}

Mask read_mask_png(const std::filesystem::path& path) {
  const cv::Mat m = imread_checked(path, cv::IMREAD_GRAYSCALE);
  Mask mask(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) mask(r, c) = m.at<std::uint8_t>(r, c) > 127;
  }
  return mask;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = open_for_write(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n";
  if (cloud.colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  out.precision(9);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    out << cloud.points(i, 0) << ' ' << cloud.points(i, 1) << ' ' << cloud.points(i, 2);
    if (cloud.colors) {
      for (int ch = 0; ch < 3; ++ch) {
        out << ' ' << std::lround(std::clamp((*cloud.colors)(i, ch), 0.0, 1.0) * 255.0);
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + quoted(path));
}

}  // namespace sharpdepth::io
