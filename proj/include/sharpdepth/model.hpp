#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <vector>

namespace sharpdepth::model {

enum class NormKind { Batch, Group };

// How the decoder's skip inputs are produced.
enum class SkipMode {
  Encoder,   // plain encoder skips, no scene-understanding branch
  SuDirect,  // SU output bilinearly resampled to each decoder scale
  SuSt,      // SU output adapted per scale by scale-transform modules
};

struct ModelConfig {
  std::array<std::int64_t, 5> stage_channels{16, 32, 64, 128, 256};
  std::int64_t su_compress_channels = 64;  // also the ST pre-attention width
  std::int64_t su_out_channels = 128;
  std::int64_t st_mid_channels = 32;
  int fusion_target_stage = 1;
  std::int64_t input_height = 64;
  std::int64_t input_width = 64;
  NormKind norm = NormKind::Batch;
  std::int64_t group_norm_groups = 4;
  double initial_depth = 3.0;  // meters, sets the output bias

  void validate() const;
  void check_input(std::int64_t height, std::int64_t width) const;
};

static constexpr int kStages = 5;

using Pyramid = std::vector<torch::Tensor>;

// Bilinear, align_corners = false. Returns the input unchanged when the size
// already matches.
torch::Tensor resample(const torch::Tensor& x, std::int64_t height, std::int64_t width);

std::int64_t count_parameters(const torch::nn::Module& module);

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ModelConfig& cfg);
  Pyramid forward(const torch::Tensor& image);

 private:
  ModelConfig cfg_;
  std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(Encoder);

// Fuses every encoder scale once into a global scene feature at the
// fusion-target scale: per-stage 3x3 compression, bilinear resampling,
// concatenation, then a 5x5 and a 3x3 fusion convolution.
class SceneUnderstandingImpl : public torch::nn::Module {
 public:
  explicit SceneUnderstandingImpl(const ModelConfig& cfg);
  torch::Tensor forward(const Pyramid& pyramid);

  // Resolution-changing resamples per forward pass.
  int resample_count() const { return kStages - 1; }

 private:
  ModelConfig cfg_;
  std::vector<torch::nn::Sequential> compress_;
  torch::nn::Conv2d fuse5_{nullptr};
  torch::nn::Conv2d fuse3_{nullptr};
};
TORCH_MODULE(SceneUnderstanding);

// Channel attention that adapts the global scene feature to one decoder
// scale.
class ScaleTransformImpl : public torch::nn::Module {
 public:
  explicit ScaleTransformImpl(const ModelConfig& cfg);

  struct Output {
    torch::Tensor feature;    // [B, su_out, h, w]
    torch::Tensor attention;  // [B, su_compress, 1, 1], sigmoid range
  };

  Output forward_with_attention(const torch::Tensor& global, std::int64_t height, std::int64_t width);
  torch::Tensor forward(const torch::Tensor& global, std::int64_t height, std::int64_t width) {
    return forward_with_attention(global, height, width).feature;
  }

 private:
  torch::nn::Conv2d pre_{nullptr};
  torch::nn::Conv2d squeeze_{nullptr};
  torch::nn::Conv2d excite_{nullptr};
  torch::nn::Conv2d expand_{nullptr};
};
TORCH_MODULE(ScaleTransform);

// Intermediate tensors of one forward pass, for inspection and tests.
struct ForwardTrace {
  Pyramid pyramid;
  torch::Tensor global;                 // undefined in SkipMode::Encoder
  std::vector<torch::Tensor> skips;     // per decoder phase, deepest first
  std::vector<torch::Tensor> attention; // per ST application
  torch::Tensor depth;
};

class DepthNetImpl : public torch::nn::Module {
 public:
  DepthNetImpl(const ModelConfig& cfg, SkipMode mode);

  torch::Tensor forward(const torch::Tensor& image) { return trace(image).depth; }
  ForwardTrace trace(const torch::Tensor& image);

  const ModelConfig& config() const { return cfg_; }
  SkipMode skip_mode() const { return mode_; }

  Encoder encoder() const { return encoder_; }
  SceneUnderstanding scene_understanding() const { return su_; }
  const std::vector<ScaleTransform>& scale_transforms() const { return st_; }
  const std::vector<torch::nn::Sequential>& decoder_phases() const { return phases_; }
  torch::nn::Conv2d head() const { return head_; }

  // Resolution-changing resamples of the fusion path (SU plus ST or direct).
  int fusion_resample_count() const;

 private:
  ModelConfig cfg_;
  SkipMode mode_;
  Encoder encoder_{nullptr};
  SceneUnderstanding su_{nullptr};
  std::vector<ScaleTransform> st_;
  std::vector<torch::nn::Sequential> phases_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(DepthNet);

// Fused-feature-pyramid baseline: every stage resampled to every scale and
// fused per scale. Only used for parameter and resample-count comparison.
class FfpHeadImpl : public torch::nn::Module {
 public:
  explicit FfpHeadImpl(const ModelConfig& cfg);
  Pyramid forward(const Pyramid& pyramid);

  // Every (stage, scale) pair is a resample call, identity pairs included.
  int resample_count() const { return kStages * kStages; }

 private:
  ModelConfig cfg_;
  std::vector<torch::nn::Sequential> fuse_;
};
TORCH_MODULE(FfpHead);

// Sets the head bias so that a zero head input maps to `depth` meters.
void set_output_depth(DepthNetImpl& net, double depth);

void check_pyramid(const Pyramid& pyramid, const ModelConfig& cfg);

}  // namespace sharpdepth::model
