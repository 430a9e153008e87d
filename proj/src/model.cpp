#include "sharpdepth/model.hpp"

#include "sharpdepth/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sharpdepth::model {
namespace F = torch::nn::functional;
namespace nn = torch::nn;

namespace {

nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2).bias(true));
}

nn::AnyModule norm(const ModelConfig& cfg, std::int64_t channels) {
  if (cfg.norm == NormKind::Group) {
    const std::int64_t groups = std::gcd(cfg.group_norm_groups, channels);
    return nn::AnyModule(nn::GroupNorm(nn::GroupNormOptions(groups, channels)));
  }
  return nn::AnyModule(nn::BatchNorm2d(channels));
}

// conv(stride) -> norm -> relu -> conv -> norm -> relu
nn::Sequential conv_block(const ModelConfig& cfg, std::int64_t in, std::int64_t out, std::int64_t stride) {
  nn::Sequential s;
  s->push_back(conv(in, out, 3, stride));
  s->push_back(norm(cfg, out));
  s->push_back(nn::ReLU());
  s->push_back(conv(out, out, 3));
  s->push_back(norm(cfg, out));
  s->push_back(nn::ReLU());
  return s;
}


}  // namespace

void ModelConfig::validate() const {
  for (auto c : stage_channels) {
    if (c <= 0) throw ConfigError("model.stage_channels must be positive");
  }
  if (su_compress_channels <= 0 || su_out_channels <= 0 || st_mid_channels <= 0) {
    throw ConfigError("model channel widths must be positive");
  }
  if (fusion_target_stage < 0 || fusion_target_stage >= kStages) {
    throw ConfigError("model.fusion_target_stage must be in 0..4");
  }
  if (group_norm_groups <= 0) throw ConfigError("model.group_norm_groups must be positive");
  if (!(initial_depth > 0.0)) throw ConfigError("model.initial_depth must be positive");
  check_input(input_height, input_width);
}

void ModelConfig::check_input(std::int64_t height, std::int64_t width) const {
  if (height <= 0 || width <= 0 || height % 32 != 0 || width % 32 != 0) {
    throw ShapeError("input size " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by 32");
  }
}

torch::Tensor resample(const torch::Tensor& x, std::int64_t height, std::int64_t width) {
  if (x.size(2) == height && x.size(3) == width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<std::int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

std::int64_t count_parameters(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters(true)) {
    if (p.requires_grad()) n += p.numel();
  }
  return n;
}

void check_pyramid(const Pyramid& pyramid, const ModelConfig& cfg) {
  if (pyramid.size() != static_cast<std::size_t>(kStages)) {
    throw ShapeError("feature pyramid must have 5 stages, got " + std::to_string(pyramid.size()));
  }
  for (int i = 0; i < kStages; ++i) {
    const auto& t = pyramid[static_cast<std::size_t>(i)];
    if (t.dim() != 4 || t.size(1) != cfg.stage_channels[static_cast<std::size_t>(i)]) {
      throw ShapeError("pyramid stage " + std::to_string(i) + " has the wrong channel count");
    }
    if (i > 0) {
      const auto& prev = pyramid[static_cast<std::size_t>(i - 1)];
      if (prev.size(2) != 2 * t.size(2) || prev.size(3) != 2 * t.size(3) || prev.size(0) != t.size(0)) {
        throw ShapeError("pyramid stage " + std::to_string(i) + " is not half the previous scale");
      }
    }
  }
}

EncoderImpl::EncoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  std::int64_t in = 3;
  for (int i = 0; i < kStages; ++i) {
    const auto out = cfg.stage_channels[static_cast<std::size_t>(i)];
    stages_.push_back(register_module("stage" + std::to_string(i), conv_block(cfg, in, out, 2)));
    in = out;
  }
}

Pyramid EncoderImpl::forward(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != 3) throw ShapeError("encoder input must be [B,3,H,W]");
  cfg_.check_input(image.size(2), image.size(3));
  Pyramid out;
  auto x = image;
  for (auto& stage : stages_) {
    x = stage->forward(x);
    out.push_back(x);
  }
  return out;
}

SceneUnderstandingImpl::SceneUnderstandingImpl(const ModelConfig& cfg) : cfg_(cfg) {
  const auto c = cfg.su_compress_channels;
  for (int i = 0; i < kStages; ++i) {
    nn::Sequential s;
    s->push_back(conv(cfg.stage_channels[static_cast<std::size_t>(i)], c, 3));
    s->push_back(nn::ReLU());
    s->push_back(conv(c, c, 3));
    s->push_back(nn::ReLU());
    compress_.push_back(register_module("compress" + std::to_string(i), s));
  }
  fuse5_ = register_module("fuse5", conv(kStages * c, cfg.su_out_channels, 5));
  fuse3_ = register_module("fuse3", conv(cfg.su_out_channels, cfg.su_out_channels, 3));
}

torch::Tensor SceneUnderstandingImpl::forward(const Pyramid& pyramid) {
  check_pyramid(pyramid, cfg_);
  const auto& target = pyramid[static_cast<std::size_t>(cfg_.fusion_target_stage)];
  std::vector<torch::Tensor> parts;
  for (int i = 0; i < kStages; ++i) {
    auto f = compress_[static_cast<std::size_t>(i)]->forward(pyramid[static_cast<std::size_t>(i)]);
    parts.push_back(resample(f, target.size(2), target.size(3)));
  }
  return fuse3_(torch::relu(fuse5_(torch::cat(parts, 1))));
}

ScaleTransformImpl::ScaleTransformImpl(const ModelConfig& cfg) {
  pre_ = register_module("pre", conv(cfg.su_out_channels, cfg.su_compress_channels, 3));
  squeeze_ = register_module("squeeze", conv(cfg.su_compress_channels, cfg.st_mid_channels, 1));
  excite_ = register_module("excite", conv(cfg.st_mid_channels, cfg.su_compress_channels, 1));
  expand_ = register_module("expand", conv(cfg.su_compress_channels, cfg.su_out_channels, 1));
}

ScaleTransformImpl::Output ScaleTransformImpl::forward_with_attention(const torch::Tensor& global,
                                                                     std::int64_t height, std::int64_t width) {
  const auto f = pre_(resample(global, height, width));
  const auto pooled = F::adaptive_avg_pool2d(f, F::AdaptiveAvgPool2dFuncOptions({1, 1}));
  const auto attention = torch::sigmoid(excite_(torch::relu(squeeze_(pooled))));
  return {expand_(f * attention), attention};
}

DepthNetImpl::DepthNetImpl(const ModelConfig& cfg, SkipMode mode) : cfg_(cfg), mode_(mode) {
  cfg_.validate();
  encoder_ = register_module("encoder", Encoder(cfg_));
  if (mode_ != SkipMode::Encoder) su_ = register_module("su", SceneUnderstanding(cfg_));
  if (mode_ == SkipMode::SuSt) {
    for (int k = 0; k < kStages; ++k) {
      st_.push_back(register_module("st" + std::to_string(k), ScaleTransform(cfg_)));
    }
  }
  const auto& ch = cfg_.stage_channels;
  // Phase i upsamples to the scale of stage 3 - i; the last phase works at
  // the input resolution, where no encoder stage exists.
  std::int64_t prev = ch[kStages - 1];
  for (int i = 0; i < kStages; ++i) {
    const int target = kStages - 2 - i;
    const auto out = ch[static_cast<std::size_t>(std::max(target, 0))];
    std::int64_t skip = cfg_.su_out_channels;
    if (mode_ == SkipMode::Encoder) skip = target >= 0 ? ch[static_cast<std::size_t>(target)] : 0;
    phases_.push_back(register_module("decode" + std::to_string(i), conv_block(cfg_, prev + skip, out, 1)));
    prev = out;
  }
  head_ = register_module("head", conv(ch[0], 1, 1));
  set_output_depth(*this, cfg_.initial_depth);
}

void set_output_depth(DepthNetImpl& net, double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth)) throw ConfigError("output depth must be positive and finite");
  torch::NoGradGuard guard;
  // softplus(bias) = depth
  net.head()->bias.fill_(std::log(std::expm1(depth)));
}

int DepthNetImpl::fusion_resample_count() const {
  if (mode_ == SkipMode::Encoder) return 0;
  // Decoder scales are stages 3..0 plus the input resolution; one of them
  // coincides with the fusion scale unless that is the deepest stage.
  const int skip_resamples = cfg_.fusion_target_stage == kStages - 1 ? kStages : kStages - 1;
  return su_->resample_count() + skip_resamples;
}

ForwardTrace DepthNetImpl::trace(const torch::Tensor& image) {
  ForwardTrace t;
  t.pyramid = encoder_->forward(image);
  if (mode_ != SkipMode::Encoder) t.global = su_->forward(t.pyramid);

  auto x = t.pyramid.back();
  for (int i = 0; i < kStages; ++i) {
    const int target = kStages - 2 - i;
    const auto h = target >= 0 ? t.pyramid[static_cast<std::size_t>(target)].size(2) : image.size(2);
    const auto w = target >= 0 ? t.pyramid[static_cast<std::size_t>(target)].size(3) : image.size(3);
    x = resample(x, h, w);
    torch::Tensor skip;
    switch (mode_) {
      case SkipMode::SuSt: {
        auto out = st_[static_cast<std::size_t>(i)]->forward_with_attention(t.global, h, w);
        t.attention.push_back(out.attention);
        skip = out.feature;
        break;
      }
      case SkipMode::SuDirect:
        skip = resample(t.global, h, w);
        break;
      case SkipMode::Encoder:
        if (target >= 0) skip = t.pyramid[static_cast<std::size_t>(target)];
        break;
    }
    if (skip.defined()) x = torch::cat({x, skip}, 1);
    t.skips.push_back(skip);
    x = phases_[static_cast<std::size_t>(i)]->forward(x);
  }
  t.depth = F::softplus(head_(x));
  return t;
}

FfpHeadImpl::FfpHeadImpl(const ModelConfig& cfg) : cfg_(cfg) {
  std::int64_t total = 0;
  for (auto c : cfg.stage_channels) total += c;
  for (int s = 0; s < kStages; ++s) {
    nn::Sequential f;
    f->push_back(conv(total, cfg.su_out_channels, 3));
    f->push_back(nn::ReLU());
    f->push_back(conv(cfg.su_out_channels, cfg.su_out_channels, 3));
    fuse_.push_back(register_module("fuse" + std::to_string(s), f));
  }
}

Pyramid FfpHeadImpl::forward(const Pyramid& pyramid) {
  check_pyramid(pyramid, cfg_);
  Pyramid out;
  for (int s = 0; s < kStages; ++s) {
    const auto& target = pyramid[static_cast<std::size_t>(s)];
    std::vector<torch::Tensor> parts;
    for (const auto& stage : pyramid) parts.push_back(resample(stage, target.size(2), target.size(3)));
    out.push_back(fuse_[static_cast<std::size_t>(s)]->forward(torch::cat(parts, 1)));
  }
  return out;
}

}  // namespace sharpdepth::model
