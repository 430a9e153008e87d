#pragma once

#include "sharpdepth/data.hpp"
#include "sharpdepth/losses.hpp"
#include "sharpdepth/metrics.hpp"
#include "sharpdepth/model.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sharpdepth::pipeline {

struct AblationToggles {
  bool use_bad = true;
  bool use_su = true;
  bool use_st = true;
  bool st_bypass_upsample_direct = false;

  model::SkipMode skip_mode() const;
};

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-5;  // decoupled
  int epochs = 10;
  std::size_t batch_size = 4;
  double lr_decay_factor = 0.9;
  int lr_decay_every = 5;
  std::uint64_t seed = 0;
  // Stop after this many optimizer steps (0 = no limit).
  std::int64_t max_steps = 0;
  // Start the output bias at the mean valid training depth instead of the
  // model's initial_depth.
  bool init_depth_from_data = true;
  AblationToggles ablation;

  void validate() const;
};

// lr * factor^floor(epoch / every)
double lr_schedule(int epoch, const TrainConfig& cfg);

// Single-threaded, deterministic algorithms. Also applied when the
// SHARPDEPTH_DETERMINISTIC environment variable is 1.
void set_deterministic(bool on);
void configure_from_environment();

struct Batch {
  torch::Tensor image;  // [B,3,H,W] float32
  torch::Tensor depth;  // [B,1,H,W] float32
  torch::Tensor valid;  // [B,1,H,W] bool
  std::vector<std::string> ids;
};

Batch collate(const std::vector<const data::Sample*>& samples);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean over the epoch's batches
  std::optional<MetricsReport> val;
};

// history.csv: epoch,lr,train_loss then validation metric columns.
std::string history_csv(const std::vector<EpochRecord>& history);

struct Checkpoint {
  model::ModelConfig model_cfg;
  losses::LossConfig loss_cfg;
  TrainConfig train_cfg;
  model::DepthNet model{nullptr};
  std::shared_ptr<torch::optim::AdamW> optimizer;
  int epoch = 0;
  std::vector<EpochRecord> history;

  // Writes model.pt, optimizer.pt, meta.json and the portable weights
  // manifest (weights.json + weights.bin) into dir.
  void save(const std::filesystem::path& dir) const;
  static Checkpoint load(const std::filesystem::path& dir);
};

model::DepthNet build_model(const model::ModelConfig& cfg, const AblationToggles& toggles, std::uint64_t seed);

// AdamW with one parameter group; lr is set per epoch by the trainer.
std::shared_ptr<torch::optim::AdamW> make_optimizer(const std::vector<torch::Tensor>& params, const TrainConfig& cfg);

struct TrainOptions {
  const std::vector<data::Sample>* val = nullptr;
  EdgeMetricConfig edge;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> step_losses;
};

// Throws NumericalError naming the batch when the loss turns non-finite.
TrainResult train(const TrainConfig& train_cfg, const model::ModelConfig& model_cfg,
                  const losses::LossConfig& loss_cfg, const std::vector<data::Sample>& dataset,
                  const TrainOptions& options = {});

// The loss the trainer minimises for the given toggles: L_BAD + L_grad +
// L_normal, or with use_bad off the alpha-free composite.
losses::LossTerms training_loss(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid,
                                const losses::LossConfig& loss_cfg, const AblationToggles& toggles);

struct SampleReport {
  std::string id;
  MetricsReport report;
};

struct EvalResult {
  std::vector<SampleReport> per_sample;
  MetricsReport aggregate;

  std::string per_sample_csv() const;
};

DepthMap predict(model::DepthNet& net, const data::Sample& sample);

// Read-only over the model; per-sample metrics averaged arithmetically.
EvalResult evaluate(model::DepthNet& net, const std::vector<data::Sample>& dataset, const EdgeMetricConfig& edge);

// Uses the ground truth as the prediction.
EvalResult evaluate_identity(const std::vector<data::Sample>& dataset, const EdgeMetricConfig& edge);

struct AblationRow {
  std::string name;
  std::string label;
  AblationToggles toggles;
  std::int64_t parameters = 0;
  MetricsReport metrics;
  std::optional<Checkpoint> checkpoint;
};

// Row names in table order: baseline, bad, bad_su_direct, su_st, full.
const std::vector<std::string>& ablation_row_names();
AblationToggles ablation_toggles(const std::string& row);

std::vector<AblationRow> ablation_suite(const TrainConfig& train_cfg, const model::ModelConfig& model_cfg,
                                        const losses::LossConfig& loss_cfg, const std::vector<data::Sample>& train_set,
                                        const std::vector<data::Sample>& val_set, const EdgeMetricConfig& edge,
                                        const std::vector<std::string>& rows = ablation_row_names());

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_text_table(const std::vector<AblationRow>& rows);

}  // namespace sharpdepth::pipeline
