#include "sharpdepth/metrics.hpp"

#include "sharpdepth/errors.hpp"
#include "sharpdepth/geometry.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace sharpdepth {

void EdgeMetricConfig::validate() const {
  if (thresholds.empty()) throw ConfigError("edge thresholds must not be empty");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0)) throw ConfigError("edge thresholds must be strictly positive");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw ConfigError("edge thresholds must be strictly increasing");
    }
  }
}

DepthScores depth_metrics(const DepthMap& gt, const DepthMap& pred) {
  require_same_shape(gt, pred, "depth_metrics");
  const Mask both = gt.valid && pred.valid;
  const double n = static_cast<double>(both.count());
  if (n == 0.0) throw EmptyInputError("depth_metrics: no valid pixels");
  if ((both && !(gt.values > 0.0)).any() || (both && !(pred.values > 0.0)).any()) {
    throw NumericalError("depth_metrics: depths must be strictly positive at valid pixels");
  }
  if ((both && !gt.values.isFinite()).any() || (both && !pred.values.isFinite()).any()) {
    throw NumericalError("depth_metrics: non-finite depth at a valid pixel");
  }

  // Invalid entries get placeholder 1.0 so the masked expressions stay finite.
  const Grid g = both.select(gt.values, 1.0);
  const Grid p = both.select(pred.values, 1.0);
  const Grid w = both.cast<double>();

  DepthScores s;
  s.rmse = std::sqrt(((p - g).square() * w).sum() / n);
  s.abs_rel = (((p - g).abs() / g) * w).sum() / n;
  s.log10 = ((p.log10() - g.log10()).abs() * w).sum() / n;
  const Grid ratio = (p / g).max(g / p);
  s.delta1 = (both && (ratio < 1.25)).count() / n;
  s.delta2 = (both && (ratio < 1.25 * 1.25)).count() / n;
  s.delta3 = (both && (ratio < 1.25 * 1.25 * 1.25)).count() / n;
  return s;
}

Mask edge_map(const DepthMap& depth, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("edge threshold must be positive");
  return (sobel_gradients(depth).magnitude() > threshold) && depth.valid;
}

EdgeScores edge_scores(const Mask& pred_edges, const Mask& gt_edges) {
  const double n_pred = static_cast<double>(pred_edges.count());
  const double n_gt = static_cast<double>(gt_edges.count());
  const double n_both = static_cast<double>((pred_edges && gt_edges).count());
  EdgeScores e;
  e.precision = n_pred == 0.0 ? 1.0 : n_both / n_pred;
  e.recall = n_gt == 0.0 ? 1.0 : n_both / n_gt;
  const double sum = e.precision + e.recall;
  e.f1 = sum == 0.0 ? 0.0 : 2.0 * e.precision * e.recall / sum;
  return e;
}

std::map<double, EdgeScores> edge_prf(const DepthMap& gt, const DepthMap& pred, const EdgeMetricConfig& cfg) {
  require_same_shape(gt, pred, "edge_prf");
  cfg.validate();
  std::map<double, EdgeScores> out;
  for (double t : cfg.thresholds) out[t] = edge_scores(edge_map(pred, t), edge_map(gt, t));
  return out;
}

MetricsReport compute_metrics(const DepthMap& gt, const DepthMap& pred, const EdgeMetricConfig& cfg) {
  return MetricsReport{depth_metrics(gt, pred), edge_prf(gt, pred, cfg)};
}

MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw EmptyInputError("cannot average zero metric reports");
  MetricsReport m;
  for (const auto& [t, _] : reports.front().edge) m.edge[t] = EdgeScores{};
  for (const auto& r : reports) {
    m.depth.rmse += r.depth.rmse;
    m.depth.abs_rel += r.depth.abs_rel;
    m.depth.log10 += r.depth.log10;
    m.depth.delta1 += r.depth.delta1;
    m.depth.delta2 += r.depth.delta2;
    m.depth.delta3 += r.depth.delta3;
    if (r.edge.size() != m.edge.size()) throw ConfigError("metric reports use different edge thresholds");
    for (const auto& [t, e] : r.edge) {
      auto it = m.edge.find(t);
      if (it == m.edge.end()) throw ConfigError("metric reports use different edge thresholds");
      it->second.precision += e.precision;
      it->second.recall += e.recall;
      it->second.f1 += e.f1;
    }
  }
  const double n = static_cast<double>(reports.size());
  m.depth.rmse /= n;
  m.depth.abs_rel /= n;
  m.depth.log10 /= n;
  m.depth.delta1 /= n;
  m.depth.delta2 /= n;
  m.depth.delta3 /= n;
  for (auto& [_, e] : m.edge) {
    e.precision /= n;
    e.recall /= n;
    e.f1 /= n;
  }
  return m;
}

std::string format_threshold(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

std::string MetricsReport::csv_header() const {
  std::string h = "rmse,abs_rel,log10,d1,d2,d3";
  for (const auto& [t, _] : edge) {
    const std::string s = format_threshold(t);
    h += ",p_" + s + ",r_" + s + ",f1_" + s;
  }
  return h;
}

std::string MetricsReport::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << depth.rmse << ',' << depth.abs_rel << ',' << depth.log10 << ',' << depth.delta1 << ','
     << depth.delta2 << ',' << depth.delta3;
  for (const auto& [_, e] : edge) os << ',' << e.precision << ',' << e.recall << ',' << e.f1;
  return os.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["rmse"] = depth.rmse;
  j["abs_rel"] = depth.abs_rel;
  j["log10"] = depth.log10;
  j["delta1"] = depth.delta1;
  j["delta2"] = depth.delta2;
  j["delta3"] = depth.delta3;
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const auto& [t, e] : edge) {
    edges.push_back({{"threshold", t}, {"precision", e.precision}, {"recall", e.recall}, {"f1", e.f1}});
  }
  j["edge"] = edges;
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  MetricsReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.depth.rmse = j.at("rmse").get<double>();
    r.depth.abs_rel = j.at("abs_rel").get<double>();
    r.depth.log10 = j.at("log10").get<double>();
    r.depth.delta1 = j.at("delta1").get<double>();
    r.depth.delta2 = j.at("delta2").get<double>();
    r.depth.delta3 = j.at("delta3").get<double>();
    for (const auto& e : j.at("edge")) {
      r.edge[e.at("threshold").get<double>()] =
          EdgeScores{e.at("precision").get<double>(), e.at("recall").get<double>(), e.at("f1").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

}  // namespace sharpdepth
