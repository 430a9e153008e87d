#pragma once

#include "sharpdepth/depth_map.hpp"

#include <map>
#include <string>
#include <vector>

namespace sharpdepth {

struct EdgeScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EdgeMetricConfig {
  // Raw Sobel magnitude |gx| + |gy| on metric depth.
  std::vector<double> thresholds{0.25, 0.5, 1.0};

  // Throws ConfigError unless thresholds are positive and strictly increasing.
  void validate() const;
};

struct DepthScores {
  double rmse = 0.0;
  double abs_rel = 0.0;
  double log10 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
};

struct MetricsReport {
  DepthScores depth;
  std::map<double, EdgeScores> edge;

  // rmse,abs_rel,log10,d1,d2,d3 then p_<t>,r_<t>,f1_<t> per threshold ascending.
  std::string csv_header() const;
  std::string csv_row() const;
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
};

// RMSE / AbsRel / log10 / delta over pixels valid in both maps.
DepthScores depth_metrics(const DepthMap& gt, const DepthMap& pred);

// |gx| + |gy| > threshold at valid pixels.
Mask edge_map(const DepthMap& depth, double threshold);

EdgeScores edge_scores(const Mask& pred_edges, const Mask& gt_edges);

std::map<double, EdgeScores> edge_prf(const DepthMap& gt, const DepthMap& pred,
                                      const EdgeMetricConfig& cfg = {});

MetricsReport compute_metrics(const DepthMap& gt, const DepthMap& pred, const EdgeMetricConfig& cfg = {});

// Arithmetic mean of per-sample reports. All reports must share thresholds.
MetricsReport mean_report(const std::vector<MetricsReport>& reports);

std::string format_threshold(double t);

}  // namespace sharpdepth
