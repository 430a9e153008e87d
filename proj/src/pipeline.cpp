#include "sharpdepth/pipeline.hpp"

#include "sharpdepth/config.hpp"
#include "sharpdepth/errors.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sharpdepth::pipeline {
namespace fs = std::filesystem;

model::SkipMode AblationToggles::skip_mode() const {
  if (!use_su) return model::SkipMode::Encoder;
  if (st_bypass_upsample_direct || !use_st) return model::SkipMode::SuDirect;
  return model::SkipMode::SuSt;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw ConfigError("train.lr_decay_factor must be in (0, 1]");
  if (lr_decay_every < 1) throw ConfigError("train.lr_decay_every must be >= 1");
  if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ConfigError("epoch must be >= 0");
  return cfg.lr * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every);
}

void set_deterministic(bool on) {
  if (on) torch::set_num_threads(1);
  at::globalContext().setDeterministicAlgorithms(on, false);
}

void configure_from_environment() {
  const char* v = std::getenv("SHARPDEPTH_DETERMINISTIC");
  if (v != nullptr && std::strcmp(v, "1") == 0) set_deterministic(true);
}

Batch collate(const std::vector<const data::Sample*>& samples) {
  if (samples.empty()) throw EmptyInputError("cannot collate an empty batch");
  const auto rows = samples.front()->depth.rows();
  const auto cols = samples.front()->depth.cols();
  const auto n = static_cast<std::int64_t>(samples.size());
  Batch b;
  b.image = torch::empty({n, 3, rows, cols}, torch::kFloat32);
  b.depth = torch::empty({n, 1, rows, cols}, torch::kFloat32);
  b.valid = torch::empty({n, 1, rows, cols}, torch::kBool);
  auto depth = b.depth.accessor<float, 4>();
  auto valid = b.valid.accessor<bool, 4>();
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& s = *samples[static_cast<std::size_t>(i)];
    if (s.depth.rows() != rows || s.depth.cols() != cols || s.image.rows != rows || s.image.cols != cols) {
      throw ShapeError("batch samples differ in size (sample " + s.id + ")");
    }
    std::memcpy(b.image[i].data_ptr<float>(), s.image.data.data(), s.image.data.size() * sizeof(float));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const bool ok = s.depth.valid(r, c);
        depth[i][0][r][c] = ok ? static_cast<float>(s.depth.values(r, c)) : 0.0f;
        valid[i][0][r][c] = ok;
      }
    }
    b.ids.push_back(s.id);
  }
  return b;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,lr,train_loss";
  const bool has_val = !history.empty() && history.front().val.has_value();
  if (has_val) os << ',' << history.front().val->csv_header();
  os << '\n';
  os << std::setprecision(17);
  for (const auto& h : history) {
    os << h.epoch << ',' << h.lr << ',' << h.train_loss;
    if (has_val && h.val) os << ',' << h.val->csv_row();
    os << '\n';
  }
  return os.str();
}

model::DepthNet build_model(const model::ModelConfig& cfg, const AblationToggles& toggles, std::uint64_t seed) {
  torch::manual_seed(seed);
  return model::DepthNet(cfg, toggles.skip_mode());
}

std::shared_ptr<torch::optim::AdamW> make_optimizer(const std::vector<torch::Tensor>& params, const TrainConfig& cfg) {
  return std::make_shared<torch::optim::AdamW>(
      params,
      torch::optim::AdamWOptions(cfg.lr).betas({cfg.beta1, cfg.beta2}).weight_decay(cfg.weight_decay));
}

losses::LossTerms training_loss(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid,
                                const losses::LossConfig& loss_cfg, const AblationToggles& toggles) {
  losses::LossConfig cfg = loss_cfg;
  if (!toggles.use_bad) cfg.alpha = 0.0;
  return losses::total_loss(gt, pred, valid, cfg);
}

namespace {

void set_lr(torch::optim::AdamW& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
}

class TrainingModeGuard {
 public:
  explicit TrainingModeGuard(model::DepthNet& net) : net_(net), was_training_(net->is_training()) {}
  ~TrainingModeGuard() { net_->train(was_training_); }
  TrainingModeGuard(const TrainingModeGuard&) = delete;
  TrainingModeGuard& operator=(const TrainingModeGuard&) = delete;

 private:
  model::DepthNet& net_;
  bool was_training_;
};

template <typename E>
[[noreturn]] void rethrow_with_id(const E& e, const std::string& id) {
  throw E("sample " + id + ": " + e.what());
}

}  // namespace

TrainResult train(const TrainConfig& train_cfg, const model::ModelConfig& model_cfg,
                  const losses::LossConfig& loss_cfg, const std::vector<data::Sample>& dataset,
                  const TrainOptions& options) {
  train_cfg.validate();
  model_cfg.validate();
  loss_cfg.validate();
  if (dataset.empty()) throw EmptyInputError("training dataset is empty");

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.model_cfg = model_cfg;
  ck.loss_cfg = loss_cfg;
  ck.train_cfg = train_cfg;
  ck.model = build_model(model_cfg, train_cfg.ablation, train_cfg.seed);
  if (train_cfg.init_depth_from_data) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : dataset) {
      sum += s.depth.valid.select(s.depth.values, 0.0).sum();
      count += s.depth.valid_count();
    }
    if (count == 0) throw EmptyInputError("training dataset has no valid depth");
    model::set_output_depth(*ck.model, sum / static_cast<double>(count));
  }
  ck.optimizer = make_optimizer(ck.model->parameters(), train_cfg);
  ck.model->train();

  std::int64_t step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < train_cfg.epochs && !stop; ++epoch) {
    const double lr = lr_schedule(epoch, train_cfg);
    set_lr(*ck.optimizer, lr);
    data::BatchIterator batches(dataset, train_cfg.batch_size,
                                data::scene_seed(train_cfg.seed, static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    int batch_count = 0;
    while (!batches.done()) {
      const Batch b = collate(batches.next());
      const auto where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_count) +
                         " (first sample " + b.ids.front() + ")";
      const auto pred = ck.model->forward(b.image);
      losses::LossTerms terms;
      try {
        terms = training_loss(b.depth, pred, b.valid, loss_cfg, train_cfg.ablation);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at " + where + ": " + e.what());
      }
      const double value = terms.total.item<double>();
      if (!std::isfinite(value)) throw NumericalError("training diverged: non-finite loss at " + where);
      ck.optimizer->zero_grad();
      terms.total.backward();
      ck.optimizer->step();
      result.step_losses.push_back(value);
      loss_sum += value;
      ++batch_count;
      ++step;
      if (train_cfg.max_steps > 0 && step >= train_cfg.max_steps) {
        stop = true;
        break;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / batch_count;
    if (options.val != nullptr && !options.val->empty()) {
      rec.val = evaluate(ck.model, *options.val, options.edge).aggregate;
    }
    ck.epoch = epoch + 1;
    ck.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

DepthMap predict(model::DepthNet& net, const data::Sample& sample) {
  TrainingModeGuard guard(net);
  torch::NoGradGuard no_grad;
  net->eval();
  const auto b = collate({&sample});
  return DepthMap(losses::to_grid(net->forward(b.image)));
}

EvalResult evaluate(model::DepthNet& net, const std::vector<data::Sample>& dataset, const EdgeMetricConfig& edge) {
  if (dataset.empty()) throw EmptyInputError("evaluation dataset is empty");
  edge.validate();
  EvalResult r;
  std::vector<MetricsReport> reports;
  for (const auto& s : dataset) {
    try {
      reports.push_back(compute_metrics(s.depth, predict(net, s), edge));
    } catch (const NumericalError& e) {
      rethrow_with_id(e, s.id);
    } catch (const EmptyInputError& e) {
      rethrow_with_id(e, s.id);
    } catch (const ShapeError& e) {
      rethrow_with_id(e, s.id);
    }
    r.per_sample.push_back({s.id, reports.back()});
  }
  r.aggregate = mean_report(reports);
  return r;
}

EvalResult evaluate_identity(const std::vector<data::Sample>& dataset, const EdgeMetricConfig& edge) {
  if (dataset.empty()) throw EmptyInputError("evaluation dataset is empty");
  edge.validate();
  EvalResult r;
  std::vector<MetricsReport> reports;
  for (const auto& s : dataset) {
    try {
      reports.push_back(compute_metrics(s.depth, s.depth, edge));
    } catch (const NumericalError& e) {
      rethrow_with_id(e, s.id);
    } catch (const EmptyInputError& e) {
      rethrow_with_id(e, s.id);
    }
    r.per_sample.push_back({s.id, reports.back()});
  }
  r.aggregate = mean_report(reports);
  return r;
}

std::string EvalResult::per_sample_csv() const {
  std::ostringstream os;
  if (per_sample.empty()) return "id\n";
  os << "id," << per_sample.front().report.csv_header() << '\n';
  for (const auto& s : per_sample) os << s.id << ',' << s.report.csv_row() << '\n';
  return os.str();
}

void Checkpoint::save(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  try {
    torch::save(model, (dir / "model.pt").string());
    if (optimizer) torch::save(*optimizer, (dir / "optimizer.pt").string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write checkpoint to " + dir.string() + ": " + e.what_without_backtrace());
  }

  config::Json meta;
  meta["epoch"] = epoch;
  meta["model"] = config::to_json(model_cfg);
  meta["loss"] = config::to_json(loss_cfg);
  meta["train"] = config::to_json(train_cfg);
  config::Json hist = config::Json::array();
  for (const auto& h : history) {
    config::Json rec{{"epoch", h.epoch}, {"lr", h.lr}, {"train_loss", h.train_loss}};
    if (h.val) rec["val"] = config::Json::parse(h.val->to_json());
    hist.push_back(rec);
  }
  meta["history"] = hist;
  {
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    out << meta.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  }

  // Portable manifest: name -> shape -> offset into a flat float32 blob.
  config::Json manifest = config::Json::array();
  std::ofstream blob(dir / "weights.bin", std::ios::binary | std::ios::trunc);
  if (!blob) throw IoError("cannot write " + (dir / "weights.bin").string());
  std::int64_t offset = 0;
  auto emit = [&](const std::string& name, const torch::Tensor& t, const char* kind) {
    if (!t.is_floating_point()) return;
    const auto f = t.detach().to(torch::kFloat32).contiguous();
    blob.write(reinterpret_cast<const char*>(f.data_ptr<float>()), static_cast<std::streamsize>(f.numel() * 4));
    manifest.push_back({{"name", name}, {"kind", kind}, {"shape", f.sizes().vec()}, {"offset", offset},
                        {"count", f.numel()}});
    offset += f.numel();
  };
  for (const auto& p : model->named_parameters(true)) emit(p.key(), p.value(), "parameter");
  for (const auto& b : model->named_buffers(true)) emit(b.key(), b.value(), "buffer");
  if (!blob) throw IoError("write failed for " + (dir / "weights.bin").string());
  std::ofstream man(dir / "weights.json", std::ios::trunc);
  man << config::Json{{"dtype", "float32"}, {"byte_order", "little"}, {"blob", "weights.bin"}, {"tensors", manifest}}
             .dump(2)
      << '\n';
  if (!man) throw IoError("cannot write " + (dir / "weights.json").string());
}

Checkpoint Checkpoint::load(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw IoError("cannot read checkpoint metadata " + (dir / "meta.json").string());
  config::Json meta;
  try {
    meta = config::Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint metadata: " + std::string(e.what()));
  }
  Checkpoint ck;
  ck.model_cfg = config::parse_model(meta.at("model"));
  ck.loss_cfg = config::parse_loss(meta.at("loss"));
  ck.train_cfg = config::parse_train(meta.at("train"));
  ck.epoch = meta.at("epoch").get<int>();
  for (const auto& rec : meta.at("history")) {
    EpochRecord h;
    h.epoch = rec.at("epoch").get<int>();
    h.lr = rec.at("lr").get<double>();
    h.train_loss = rec.at("train_loss").get<double>();
    if (rec.contains("val")) h.val = MetricsReport::from_json(rec.at("val").dump());
    ck.history.push_back(h);
  }
  ck.model = model::DepthNet(ck.model_cfg, ck.train_cfg.ablation.skip_mode());
  ck.optimizer = make_optimizer(ck.model->parameters(), ck.train_cfg);
  try {
    torch::load(ck.model, (dir / "model.pt").string());
    if (fs::exists(dir / "optimizer.pt")) torch::load(*ck.optimizer, (dir / "optimizer.pt").string());
  } catch (const c10::Error& e) {
    throw IoError("cannot load checkpoint from " + dir.string() + ": " + e.what_without_backtrace());
  }
  return ck;
}

const std::vector<std::string>& ablation_row_names() {
  static const std::vector<std::string> names{"baseline", "bad", "bad_su_direct", "su_st", "full"};
  return names;
}

AblationToggles ablation_toggles(const std::string& row) {
  if (row == "baseline") return {false, false, false, false};
  if (row == "bad") return {true, false, false, false};
  if (row == "bad_su_direct") return {true, true, false, true};
  if (row == "su_st") return {false, true, true, false};
  if (row == "full") return {true, true, true, false};
  throw ConfigError("unknown ablation row '" + row + "' (expected baseline, bad, bad_su_direct, su_st, full)");
}

namespace {

std::string row_label(const std::string& row) {
  if (row == "baseline") return "Baseline";
  if (row == "bad") return "Baseline+BAD";
  if (row == "bad_su_direct") return "Baseline+BAD+SU+upsample directly";
  if (row == "su_st") return "Baseline+SU+ST";
  return "Baseline+SU+ST+BAD";
}

}  // namespace

std::vector<AblationRow> ablation_suite(const TrainConfig& train_cfg, const model::ModelConfig& model_cfg,
                                        const losses::LossConfig& loss_cfg, const std::vector<data::Sample>& train_set,
                                        const std::vector<data::Sample>& val_set, const EdgeMetricConfig& edge,
                                        const std::vector<std::string>& rows) {
  if (val_set.empty()) throw EmptyInputError("ablation needs a nonempty validation set");
  // Rows run in table order regardless of the order requested.
  std::vector<std::string> ordered;
  for (const auto& name : ablation_row_names()) {
    if (std::find(rows.begin(), rows.end(), name) != rows.end()) ordered.push_back(name);
  }
  for (const auto& r : rows) ablation_toggles(r);

  std::vector<AblationRow> out;
  for (const auto& name : ordered) {
    TrainConfig cfg = train_cfg;
    cfg.ablation = ablation_toggles(name);
    AblationRow row;
    row.name = name;
    row.label = row_label(name);
    row.toggles = cfg.ablation;
    auto trained = train(cfg, model_cfg, loss_cfg, train_set);
    row.parameters = model::count_parameters(*trained.checkpoint.model);
    row.metrics = evaluate(trained.checkpoint.model, val_set, edge).aggregate;
    row.checkpoint = std::move(trained.checkpoint);
    out.push_back(std::move(row));
  }
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "row,label,use_bad,use_su,use_st,st_bypass_upsample_direct,parameters";
  if (!rows.empty()) os << ',' << rows.front().metrics.csv_header();
  os << '\n';
  for (const auto& r : rows) {
    os << r.name << ",\"" << r.label << "\"," << r.toggles.use_bad << ',' << r.toggles.use_su << ','
       << r.toggles.use_st << ',' << r.toggles.st_bypass_upsample_direct << ',' << r.parameters << ','
       << r.metrics.csv_row() << '\n';
  }
  return os.str();
}

std::string ablation_text_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(36) << "Configuration" << std::right << std::setw(12) << "Params" << std::setw(9)
     << "RMSE" << std::setw(9) << "AbsRel" << std::setw(9) << "log10" << std::setw(8) << "d1" << std::setw(8) << "d2"
     << std::setw(8) << "d3";
  if (!rows.empty()) {
    for (const auto& [t, _] : rows.front().metrics.edge) os << std::setw(10) << ("F1@" + format_threshold(t));
  }
  os << '\n' << std::fixed;
  for (const auto& r : rows) {
    const auto& d = r.metrics.depth;
    os << std::left << std::setw(36) << r.label << std::right << std::setw(12) << r.parameters << std::setprecision(4)
       << std::setw(9) << d.rmse << std::setw(9) << d.abs_rel << std::setw(9) << d.log10 << std::setprecision(3)
       << std::setw(8) << d.delta1 << std::setw(8) << d.delta2 << std::setw(8) << d.delta3;
    for (const auto& [_, e] : r.metrics.edge) os << std::setw(10) << e.f1;
    os << '\n';
  }
  return os.str();
}

}  // namespace sharpdepth::pipeline
