#include "sharpdepth/plot.hpp"

#include "sharpdepth/errors.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace sharpdepth::plot {
namespace {

void save(const std::filesystem::path& path, const cv::Mat& m) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

void write_loss_curve_png(const std::filesystem::path& path, const std::vector<double>& values) {
  constexpr int kW = 640;
  constexpr int kH = 360;
  constexpr int kPad = 48;
  cv::Mat img(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Scalar axis(60, 60, 60);
  cv::line(img, {kPad, kPad / 2}, {kPad, kH - kPad}, axis, 1);
  cv::line(img, {kPad, kH - kPad}, {kW - kPad / 2, kH - kPad}, axis, 1);
  if (!values.empty()) {
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double plot_w = kW - kPad - kPad / 2;
    const double plot_h = kH - kPad - kPad / 2;
    auto to_px = [&](std::size_t i, double v) {
      const double x = values.size() == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(values.size() - 1);
      return cv::Point(kPad + static_cast<int>(std::lround(x * plot_w)),
                       kH - kPad - static_cast<int>(std::lround((v - lo) / (hi - lo) * plot_h)));
    };
    for (std::size_t i = 1; i < values.size(); ++i) {
      cv::line(img, to_px(i - 1, values[i - 1]), to_px(i, values[i]), cv::Scalar(180, 90, 30), 2, cv::LINE_AA);
    }
    if (values.size() == 1) cv::circle(img, to_px(0, values[0]), 3, cv::Scalar(180, 90, 30), cv::FILLED);
    cv::putText(img, fmt(hi), {4, kPad / 2 + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, axis, 1, cv::LINE_AA);
    cv::putText(img, fmt(lo), {4, kH - kPad}, cv::FONT_HERSHEY_SIMPLEX, 0.4, axis, 1, cv::LINE_AA);
    cv::putText(img, std::to_string(values.size()), {kW - kPad, kH - kPad + 16}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                axis, 1, cv::LINE_AA);
  }
  cv::putText(img, "loss", {kW / 2 - 16, kH - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.5, axis, 1, cv::LINE_AA);
  save(path, img);
}

void write_depth_png(const std::filesystem::path& path, const DepthMap& depth, double depth_min, double depth_max) {
  if (!(depth_max > depth_min)) throw ConfigError("depth colour range must satisfy max > min");
  cv::Mat gray(static_cast<int>(depth.rows()), static_cast<int>(depth.cols()), CV_8UC1);
  for (int r = 0; r < gray.rows; ++r) {
    for (int c = 0; c < gray.cols; ++c) {
      const double t = std::clamp((depth.values(r, c) - depth_min) / (depth_max - depth_min), 0.0, 1.0);
      gray.at<std::uint8_t>(r, c) = static_cast<std::uint8_t>(std::lround(std::isfinite(t) ? t * 255.0 : 0.0));
    }
  }
  cv::Mat colored;
  cv::applyColorMap(gray, colored, cv::COLORMAP_VIRIDIS);
  for (int r = 0; r < colored.rows; ++r) {
    for (int c = 0; c < colored.cols; ++c) {
      if (!depth.valid(r, c)) colored.at<cv::Vec3b>(r, c) = cv::Vec3b(0, 0, 0);
    }
  }
  save(path, colored);
}

}  // namespace sharpdepth::plot
