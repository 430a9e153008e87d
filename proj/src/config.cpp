#include "sharpdepth/config.hpp"

#include "sharpdepth/errors.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sharpdepth::config {
namespace {

void reject_unknown(const Json& j, const std::string& section, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown config key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const Json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
  }
}

template <typename T>
void read_pair(const Json& j, const std::string& section, const char* key, T& first, T& second) {
  if (!j.contains(key)) return;
  std::vector<T> v;
  read(j, section, key, v);
  if (v.size() != 2) throw ConfigError("config key '" + section + "." + key + "' must have two entries");
  first = v[0];
  second = v[1];
}

}  // namespace

Json to_json(const model::ModelConfig& c) {
  return Json{{"stage_channels", c.stage_channels},
              {"su_compress_channels", c.su_compress_channels},
              {"su_out_channels", c.su_out_channels},
              {"st_mid_channels", c.st_mid_channels},
              {"fusion_target_stage", c.fusion_target_stage},
              {"input_size", {c.input_height, c.input_width}},
              {"norm", c.norm == model::NormKind::Batch ? "batch" : "group"},
              {"group_norm_groups", c.group_norm_groups},
              {"initial_depth", c.initial_depth}};
}

Json to_json(const losses::LossConfig& c) {
  return Json{{"alpha", c.alpha}, {"clamp_weight", c.clamp_weight}, {"denom_epsilon", c.denom_epsilon}};
}

Json to_json(const pipeline::TrainConfig& c) {
  return Json{{"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"weight_decay", c.weight_decay},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr_decay_factor", c.lr_decay_factor},
              {"lr_decay_every", c.lr_decay_every},
              {"seed", c.seed},
              {"max_steps", c.max_steps},
              {"init_depth_from_data", c.init_depth_from_data},
              {"ablation",
               {{"use_bad", c.ablation.use_bad},
                {"use_su", c.ablation.use_su},
                {"use_st", c.ablation.use_st},
                {"st_bypass_upsample_direct", c.ablation.st_bypass_upsample_direct}}}};
}

Json to_json(const data::SyntheticSceneConfig& c) {
  Json kinds = Json::array();
  for (auto k : c.shape_kinds) kinds.push_back(k == data::ShapeKind::Rectangle ? "rectangle" : "ellipse");
  return Json{{"size", {c.height, c.width}},
              {"n_shapes", {c.min_shapes, c.max_shapes}},
              {"depth_range", {c.min_depth, c.max_depth}},
              {"background", c.background == data::Background::Ramp ? "ramp" : "constant"},
              {"shape_kinds", kinds},
              {"seed", c.seed}};
}

Json to_json(const EdgeMetricConfig& c) { return Json{{"thresholds", c.thresholds}}; }

Json to_json(const ExperimentConfig& c) {
  return Json{{"model", to_json(c.model)},
              {"loss", to_json(c.loss)},
              {"train", to_json(c.train)},
              {"data", to_json(c.data)},
              {"edge_metrics", to_json(c.edge)},
              {"viz", {{"depth_min", c.viz.depth_min}, {"depth_max", c.viz.depth_max}}}};
}

model::ModelConfig parse_model(const Json& j) {
  const std::string s = "model";
  reject_unknown(j, s,
                 {"stage_channels", "su_compress_channels", "su_out_channels", "st_mid_channels",
                  "fusion_target_stage", "input_size", "norm", "group_norm_groups", "initial_depth"});
  model::ModelConfig c;
  if (j.contains("stage_channels")) {
    std::vector<std::int64_t> v;
    read(j, s, "stage_channels", v);
    if (v.size() != 5) throw ConfigError("model.stage_channels must list exactly 5 stages");
    std::copy(v.begin(), v.end(), c.stage_channels.begin());
  }
  read(j, s, "su_compress_channels", c.su_compress_channels);
  read(j, s, "su_out_channels", c.su_out_channels);
  read(j, s, "st_mid_channels", c.st_mid_channels);
  read(j, s, "fusion_target_stage", c.fusion_target_stage);
  read_pair(j, s, "input_size", c.input_height, c.input_width);
  if (j.contains("norm")) {
    std::string n;
    read(j, s, "norm", n);
    if (n == "batch") {
      c.norm = model::NormKind::Batch;
    } else if (n == "group") {
      c.norm = model::NormKind::Group;
    } else {
      throw ConfigError("model.norm must be 'batch' or 'group'");
    }
  }
  read(j, s, "group_norm_groups", c.group_norm_groups);
  read(j, s, "initial_depth", c.initial_depth);
  return c;
}

losses::LossConfig parse_loss(const Json& j) {
  const std::string s = "loss";
  reject_unknown(j, s, {"alpha", "clamp_weight", "denom_epsilon"});
  losses::LossConfig c;
  read(j, s, "alpha", c.alpha);
  read(j, s, "clamp_weight", c.clamp_weight);
  read(j, s, "denom_epsilon", c.denom_epsilon);
  return c;
}

pipeline::TrainConfig parse_train(const Json& j) {
  const std::string s = "train";
  reject_unknown(j, s,
                 {"lr", "beta1", "beta2", "weight_decay", "epochs", "batch_size", "lr_decay_factor",
                  "lr_decay_every", "seed", "max_steps", "init_depth_from_data", "ablation"});
  pipeline::TrainConfig c;
  read(j, s, "lr", c.lr);
  read(j, s, "beta1", c.beta1);
  read(j, s, "beta2", c.beta2);
  read(j, s, "weight_decay", c.weight_decay);
  read(j, s, "epochs", c.epochs);
  read(j, s, "batch_size", c.batch_size);
  read(j, s, "lr_decay_factor", c.lr_decay_factor);
  read(j, s, "lr_decay_every", c.lr_decay_every);
  read(j, s, "seed", c.seed);
  read(j, s, "max_steps", c.max_steps);
  read(j, s, "init_depth_from_data", c.init_depth_from_data);
  if (j.contains("ablation")) {
    const auto& a = j.at("ablation");
    const std::string sa = "train.ablation";
    reject_unknown(a, sa, {"use_bad", "use_su", "use_st", "st_bypass_upsample_direct"});
    read(a, sa, "use_bad", c.ablation.use_bad);
    read(a, sa, "use_su", c.ablation.use_su);
    read(a, sa, "use_st", c.ablation.use_st);
    read(a, sa, "st_bypass_upsample_direct", c.ablation.st_bypass_upsample_direct);
  }
  return c;
}

data::SyntheticSceneConfig parse_data(const Json& j) {
  const std::string s = "data";
  reject_unknown(j, s, {"size", "n_shapes", "depth_range", "background", "shape_kinds", "seed"});
  data::SyntheticSceneConfig c;
  read_pair(j, s, "size", c.height, c.width);
  read_pair(j, s, "n_shapes", c.min_shapes, c.max_shapes);
  read_pair(j, s, "depth_range", c.min_depth, c.max_depth);
  if (j.contains("background")) {
    std::string b;
    read(j, s, "background", b);
    if (b == "ramp") {
      c.background = data::Background::Ramp;
    } else if (b == "constant") {
      c.background = data::Background::Constant;
    } else {
      throw ConfigError("data.background must be 'ramp' or 'constant'");
    }
  }
  if (j.contains("shape_kinds")) {
    std::vector<std::string> kinds;
    read(j, s, "shape_kinds", kinds);
    c.shape_kinds.clear();
    for (const auto& k : kinds) {
      if (k == "rectangle") {
        c.shape_kinds.push_back(data::ShapeKind::Rectangle);
      } else if (k == "ellipse") {
        c.shape_kinds.push_back(data::ShapeKind::Ellipse);
      } else {
        throw ConfigError("unknown shape kind '" + k + "'");
      }
    }
  }
  read(j, s, "seed", c.seed);
  return c;
}

EdgeMetricConfig parse_edge(const Json& j) {
  const std::string s = "edge_metrics";
  reject_unknown(j, s, {"thresholds"});
  EdgeMetricConfig c;
  read(j, s, "thresholds", c.thresholds);
  return c;
}

void ExperimentConfig::validate() const {
  model.validate();
  loss.validate();
  train.validate();
  data.validate();
  edge.validate();
  if (!(viz.depth_max > viz.depth_min)) throw ConfigError("viz.depth_max must exceed viz.depth_min");
}

ExperimentConfig parse_experiment(const Json& j) {
  reject_unknown(j, "<root>", {"model", "loss", "train", "data", "edge_metrics", "viz"});
  ExperimentConfig c;
  if (j.contains("model")) c.model = parse_model(j.at("model"));
  if (j.contains("loss")) c.loss = parse_loss(j.at("loss"));
  if (j.contains("train")) c.train = parse_train(j.at("train"));
  if (j.contains("data")) c.data = parse_data(j.at("data"));
  if (j.contains("edge_metrics")) c.edge = parse_edge(j.at("edge_metrics"));
  if (j.contains("viz")) {
    const auto& v = j.at("viz");
    reject_unknown(v, "viz", {"depth_min", "depth_max"});
    read(v, "viz", "depth_min", c.viz.depth_min);
    read(v, "viz", "depth_max", c.viz.depth_max);
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return parse_experiment(j);
}

std::vector<double> parse_threshold_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("malformed threshold '" + item + "'");
    }
    if (used != item.size()) throw ConfigError("malformed threshold '" + item + "'");
    out.push_back(v);
  }
  EdgeMetricConfig{out}.validate();
  return out;
}

}  // namespace sharpdepth::config
