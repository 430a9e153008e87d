#include "sharpdepth/errors.hpp"
#include "sharpdepth/model.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace sharpdepth;
using namespace sharpdepth::model;

namespace {

// Closed-form parameter counts, written out independently of the modules.
std::int64_t conv_params(std::int64_t in, std::int64_t out, std::int64_t k) { return in * out * k * k + out; }
std::int64_t block_params(std::int64_t in, std::int64_t out) {
  return conv_params(in, out, 3) + 2 * out + conv_params(out, out, 3) + 2 * out;
}
std::int64_t su_params(const ModelConfig& c) {
  std::int64_t n = 0;
  for (auto ch : c.stage_channels) n += conv_params(ch, 64, 3) + conv_params(64, 64, 3);
  return n + conv_params(5 * 64, 128, 5) + conv_params(128, 128, 3);
}
std::int64_t st_params() {
  return conv_params(128, 64, 3) + conv_params(64, 32, 1) + conv_params(32, 64, 1) + conv_params(64, 128, 1);
}
std::int64_t full_params(const ModelConfig& c) {
  const auto& ch = c.stage_channels;
  std::int64_t n = 0;
  std::int64_t in = 3;
  for (auto o : ch) {
    n += block_params(in, o);
    in = o;
  }
  n += su_params(c) + 5 * st_params();
  // Decoder phases target stages 3, 2, 1, 0 and then the input resolution.
  std::int64_t prev = ch[4];
  for (int target = 3; target >= -1; --target) {
    const auto out = ch[static_cast<std::size_t>(std::max(target, 0))];
    n += block_params(prev + 128, out);
    prev = out;
  }
  return n + conv_params(ch[0], 1, 1);
}

Pyramid random_pyramid(const ModelConfig& cfg, std::int64_t batch, std::int64_t h, std::int64_t w) {
  Pyramid p;
  for (int i = 0; i < kStages; ++i) {
    h /= 2;
    w /= 2;
    p.push_back(torch::randn({batch, cfg.stage_channels[static_cast<std::size_t>(i)], h, w}));
  }
  return p;
}

}  // namespace

TEST(Model, EncoderPyramidShapes) {
  torch::manual_seed(0);
  ModelConfig cfg;
  Encoder enc(cfg);
  const auto p = enc->forward(torch::randn({2, 3, 64, 64}));
  ASSERT_EQ(p.size(), 5u);
  const std::int64_t sizes[] = {32, 16, 8, 4, 2};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(p[i].sizes(), (std::vector<std::int64_t>{2, cfg.stage_channels[i], sizes[i], sizes[i]}));
  }
}

TEST(Model, DepthOutputShapeAndPositivity) {
  torch::manual_seed(0);
  ModelConfig cfg;
  cfg.input_height = 96;
  cfg.input_width = 128;
  for (auto mode : {SkipMode::Encoder, SkipMode::SuDirect, SkipMode::SuSt}) {
    DepthNet net(cfg, mode);
    const auto d = net->forward(torch::rand({2, 3, 96, 128}));
    EXPECT_EQ(d.sizes(), (std::vector<std::int64_t>{2, 1, 96, 128}));
    EXPECT_GT(d.min().item<double>(), 0.0);
  }
}

TEST(Model, RejectsBadInputSizes) {
  ModelConfig cfg;
  DepthNet net(cfg, SkipMode::SuSt);
  EXPECT_THROW(net->forward(torch::rand({1, 3, 60, 64})), ShapeError);
  EXPECT_THROW(net->forward(torch::rand({1, 1, 64, 64})), ShapeError);
  cfg.input_height = 48;
  EXPECT_THROW(cfg.validate(), ShapeError);
}

TEST(SceneUnderstanding, OutputAtFusionScale) {
  torch::manual_seed(1);
  ModelConfig cfg;
  SceneUnderstanding su(cfg);
  const auto g = su->forward(random_pyramid(cfg, 2, 64, 64));
  EXPECT_EQ(g.sizes(), (std::vector<std::int64_t>{2, 128, 16, 16}));
  EXPECT_EQ(su->resample_count(), 4);
}

TEST(SceneUnderstanding, ZeroInputWithZeroBiasGivesZero) {
  ModelConfig cfg;
  SceneUnderstanding su(cfg);
  {
    torch::NoGradGuard guard;
    for (auto& p : su->named_parameters()) {
      if (p.key().find("bias") != std::string::npos) p.value().zero_();
    }
  }
  Pyramid zero;
  for (auto& t : random_pyramid(cfg, 1, 64, 64)) zero.push_back(torch::zeros_like(t));
  EXPECT_EQ(su->forward(zero).abs().max().item<double>(), 0.0);
}

TEST(SceneUnderstanding, RejectsMalformedPyramid) {
  ModelConfig cfg;
  SceneUnderstanding su(cfg);
  auto p = random_pyramid(cfg, 1, 64, 64);
  p.pop_back();
  EXPECT_THROW(su->forward(p), ShapeError);
  p = random_pyramid(cfg, 1, 64, 64);
  p[2] = torch::randn({1, 64, 5, 5});
  EXPECT_THROW(su->forward(p), ShapeError);
}

TEST(ScaleTransform, AttentionInUnitIntervalAndShapes) {
  torch::manual_seed(2);
  ModelConfig cfg;
  ScaleTransform st(cfg);
  const auto g = torch::randn({3, 128, 16, 16});
  const auto same = st->forward_with_attention(g, 16, 16);
  EXPECT_EQ(same.feature.sizes(), (std::vector<std::int64_t>{3, 128, 16, 16}));
  EXPECT_EQ(same.attention.sizes(), (std::vector<std::int64_t>{3, 64, 1, 1}));
  EXPECT_GT(same.attention.min().item<double>(), 0.0);
  EXPECT_LT(same.attention.max().item<double>(), 1.0);
  EXPECT_EQ(st->forward(g, 2, 2).sizes(), (std::vector<std::int64_t>{3, 128, 2, 2}));
}

TEST(ScaleTransform, ParameterCount) {
  ModelConfig cfg;
  EXPECT_EQ(count_parameters(*ScaleTransform(cfg)), st_params());
  EXPECT_EQ(conv_params(64, 32, 1), 2080);
  EXPECT_EQ(conv_params(3, 16, 3), 448);
}

TEST(Model, ParameterCountsMatchClosedForm) {
  ModelConfig cfg;
  EXPECT_EQ(count_parameters(*SceneUnderstanding(cfg)), su_params(cfg));
  EXPECT_EQ(count_parameters(*DepthNet(cfg, SkipMode::SuSt)), full_params(cfg));
  // The direct variant drops exactly the five ST modules.
  EXPECT_EQ(count_parameters(*DepthNet(cfg, SkipMode::SuDirect)), full_params(cfg) - 5 * st_params());
}

TEST(Model, FusionIsCheaperThanFullPyramid) {
  ModelConfig cfg;
  FfpHead ffp(cfg);
  DepthNet net(cfg, SkipMode::SuSt);
  std::int64_t ours = count_parameters(*net->scene_understanding());
  for (const auto& st : net->scale_transforms()) ours += count_parameters(*st);
  EXPECT_GT(count_parameters(*ffp), ours);
  EXPECT_EQ(ffp->resample_count(), 25);
  EXPECT_EQ(net->fusion_resample_count(), 8);
  EXPECT_LT(net->fusion_resample_count(), ffp->resample_count());

  torch::manual_seed(3);
  const auto out = ffp->forward(random_pyramid(cfg, 1, 64, 64));
  ASSERT_EQ(out.size(), 5u);
  EXPECT_EQ(out[4].sizes(), (std::vector<std::int64_t>{1, 128, 2, 2}));
}

TEST(Model, TraceExposesSkipsAndAttention) {
  torch::manual_seed(4);
  ModelConfig cfg;
  DepthNet net(cfg, SkipMode::SuSt);
  const auto t = net->trace(torch::rand({1, 3, 64, 64}));
  ASSERT_EQ(t.skips.size(), 5u);
  EXPECT_EQ(t.attention.size(), 5u);
  EXPECT_EQ(t.skips[0].size(2), 4);
  EXPECT_EQ(t.skips[4].size(2), 64);

  DepthNet base(cfg, SkipMode::Encoder);
  const auto b = base->trace(torch::rand({1, 3, 64, 64}));
  EXPECT_FALSE(b.global.defined());
  EXPECT_TRUE(b.skips[0].defined());
  EXPECT_FALSE(b.skips[4].defined());
  EXPECT_TRUE(b.attention.empty());
}

TEST(Model, InitialOutputNearConfiguredDepth) {
  ModelConfig cfg;
  DepthNet net(cfg, SkipMode::SuSt);
  torch::NoGradGuard guard;
  for (auto& p : net->head()->parameters()) {
    if (p.dim() == 4) p.zero_();
  }
  net->eval();
  const auto d = net->forward(torch::rand({1, 3, 64, 64}));
  EXPECT_NEAR(d.mean().item<double>(), 3.0, 1e-5);
}

TEST(Model, DeterministicForSameSeed) {
  ModelConfig cfg;
  const auto x = torch::rand({1, 3, 64, 64});
  torch::manual_seed(7);
  DepthNet a(cfg, SkipMode::SuSt);
  torch::manual_seed(7);
  DepthNet b(cfg, SkipMode::SuSt);
  a->eval();
  b->eval();
  EXPECT_TRUE(torch::equal(a->forward(x), b->forward(x)));
}

TEST(Model, GradientsReachEveryParameter) {
  torch::manual_seed(5);
  ModelConfig cfg;
  DepthNet net(cfg, SkipMode::SuSt);
  net->forward(torch::rand({2, 3, 64, 64})).mean().backward();
  for (const auto& p : net->named_parameters()) {
    ASSERT_TRUE(p.value().grad().defined()) << p.key();
    EXPECT_TRUE(torch::isfinite(p.value().grad()).all().item<bool>()) << p.key();
  }
}

TEST(Model, GroupNormVariantRuns) {
  torch::manual_seed(6);
  ModelConfig cfg;
  cfg.norm = NormKind::Group;
  DepthNet net(cfg, SkipMode::SuSt);
  const auto d = net->forward(torch::rand({1, 3, 64, 64}));
  EXPECT_EQ(d.size(3), 64);
}
