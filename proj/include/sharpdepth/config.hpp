#pragma once

#include "sharpdepth/data.hpp"
#include "sharpdepth/losses.hpp"
#include "sharpdepth/metrics.hpp"
#include "sharpdepth/model.hpp"
#include "sharpdepth/pipeline.hpp"

#include <json.hpp>

#include <filesystem>

namespace sharpdepth::config {

using Json = nlohmann::ordered_json;

// Fixed colour-map range for depth figures, meters.
struct VizConfig {
  double depth_min = 0.0;
  double depth_max = 10.0;
};

// One JSON document with sections model, loss, train, data, edge_metrics and
// viz. Missing keys take their defaults; unknown keys are rejected.
struct ExperimentConfig {
  model::ModelConfig model;
  losses::LossConfig loss;
  pipeline::TrainConfig train;
  data::SyntheticSceneConfig data;
  EdgeMetricConfig edge;
  VizConfig viz;

  void validate() const;
};

Json to_json(const model::ModelConfig& cfg);
Json to_json(const losses::LossConfig& cfg);
Json to_json(const pipeline::TrainConfig& cfg);
Json to_json(const data::SyntheticSceneConfig& cfg);
Json to_json(const EdgeMetricConfig& cfg);
Json to_json(const ExperimentConfig& cfg);

model::ModelConfig parse_model(const Json& j);
losses::LossConfig parse_loss(const Json& j);
pipeline::TrainConfig parse_train(const Json& j);
data::SyntheticSceneConfig parse_data(const Json& j);
EdgeMetricConfig parse_edge(const Json& j);
ExperimentConfig parse_experiment(const Json& j);

// Throws ConfigError on unreadable or malformed documents.
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Comma-separated list of positive numbers, e.g. "0.25,0.5,1.0".
std::vector<double> parse_threshold_list(const std::string& text);

}  // namespace sharpdepth::config
