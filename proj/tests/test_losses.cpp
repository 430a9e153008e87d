#include "gradcheck.hpp"
#include "oracles.hpp"
#include "sharpdepth/errors.hpp"
#include "sharpdepth/geometry.hpp"
#include "sharpdepth/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sharpdepth;
using losses::LossConfig;

namespace {

const double kLnHalf = std::log(0.5);

oracle::LossConfig to_oracle(const LossConfig& c) { return {c.alpha, c.clamp_weight, c.denom_epsilon}; }

}  // namespace

TEST(BoundaryWeight, VanishesWhenGradientsMatch) {
  std::mt19937_64 rng(1);
  const auto gt = oracle::random_depth(rng, 8, 8);
  const auto g = sobel_gradients(gt);
  const auto w = losses::boundary_weight(g, g, gt.valid, LossConfig{});
  EXPECT_TRUE((w == 0.0).all());
}

TEST(BoundaryWeight, FlatSceneClampsNegativeWeight) {
  const GradientField flat{Grid::Zero(5, 5), Grid::Zero(5, 5)};
  GradientField pred = flat;
  pred.gx(2, 2) = 1.0;
  pred.gy(2, 2) = 1.0;
  const Mask all = Mask::Constant(5, 5, true);

  LossConfig clamped;
  EXPECT_EQ(losses::boundary_weight(flat, pred, all, clamped)(2, 2), 0.0);

  LossConfig literal;
  literal.clamp_weight = false;
  const double raw = losses::boundary_weight(flat, pred, all, literal)(2, 2);
  EXPECT_NEAR(raw, kLnHalf / 1e-6 * 2.0, 1e-3);
  EXPECT_LT(raw, 0.0);
}

TEST(BoundaryWeight, StepSceneMatchesExhaustiveEvaluation) {
  const auto gt = oracle::step_map(4, 4, 2, 1.0, 3.0);
  const DepthMap pred(Grid(0.5 * gt.values));
  const auto w = losses::boundary_weight(sobel_gradients(gt), sobel_gradients(pred), gt.valid, LossConfig{});
  const auto o = oracle::omega(oracle::sobel(gt.values, gt.valid), oracle::sobel(pred.values, pred.valid), gt.valid,
                               {0.3, true, 1e-6});
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(w(r, c), o(r, c), 1e-9) << r << "," << c;
  }
  EXPECT_GT(w.maxCoeff(), 0.0);
}

TEST(BoundaryWeight, EmptyMaskIsAnError) {
  const GradientField z{Grid::Zero(3, 3), Grid::Zero(3, 3)};
  EXPECT_THROW(losses::boundary_weight(z, z, Mask::Constant(3, 3, false), LossConfig{}), EmptyInputError);
}

TEST(BadLoss, Identities) {
  std::mt19937_64 rng(2);
  const auto gt = oracle::random_depth(rng, 8, 8);
  EXPECT_NEAR(losses::bad_loss(gt, gt), kLnHalf, 1e-9);

  const DepthMap offset(Grid(gt.values + 0.5));
  EXPECT_NEAR(losses::bad_loss(gt, offset), 0.0, 1e-9);
  const auto report = losses::total_loss(gt, offset);
  EXPECT_NEAR(report.omega_stats.max, 0.0, 1e-9);
}

TEST(BadLoss, AlphaZeroIsThePlainDepthTerm) {
  std::mt19937_64 rng(3);
  const auto gt = oracle::random_depth(rng, 8, 8);
  const auto pred = oracle::perturbed(rng, gt, 0.3);
  LossConfig cfg;
  cfg.alpha = 0.0;
  const auto l = losses::bad_loss(gt, pred, cfg);
  const auto g = losses::to_tensor(gt.values);
  const auto p = losses::to_tensor(pred.values);
  const double plain = torch::log((g - p).abs() + 0.5).mean().item<double>();
  EXPECT_EQ(l, plain);
}

TEST(BadLoss, GrowsWithAlphaOnBlurredStep) {
  // omega > 0 only on the two edge columns, where the blurred prediction is
  // off by 0.8 m, so every weighted term has ln(|e| + 0.5) > 0.
  const auto gt = oracle::step_map(16, 16, 8, 1.0, 3.0);
  const DepthMap pred(oracle::box_blur(gt.values, 2));
  double prev = -1e300;
  for (double alpha : {0.0, 0.1, 0.3, 1.0, 3.0}) {
    LossConfig cfg;
    cfg.alpha = alpha;
    const double l = losses::bad_loss(gt, pred, cfg);
    EXPECT_GT(l, prev) << alpha;
    prev = l;
  }
}

TEST(GradLoss, Identities) {
  std::mt19937_64 rng(4);
  const auto gt = oracle::random_depth(rng, 8, 8);
  EXPECT_NEAR(losses::grad_loss(gt, gt), 2 * kLnHalf, 1e-9);
  EXPECT_NEAR(losses::grad_loss(gt, DepthMap(Grid(gt.values + 1.7))), 2 * kLnHalf, 1e-9);
}

TEST(NormalLoss, IdentityAndRange) {
  std::mt19937_64 rng(5);
  const auto gt = oracle::random_depth(rng, 8, 8);
  EXPECT_NEAR(losses::normal_loss(gt, gt), 0.0, 1e-9);
  for (int i = 0; i < 20; ++i) {
    const auto a = oracle::random_depth(rng, 8, 8);
    const auto b = oracle::random_depth(rng, 8, 8, 0.1, 50.0);
    const double l = losses::normal_loss(a, b);
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 2.0);
  }
}

TEST(TotalLoss, IdentityAndComposition) {
  std::mt19937_64 rng(6);
  const auto gt = oracle::random_depth(rng, 8, 8);
  const auto same = losses::total_loss(gt, gt);
  EXPECT_NEAR(same.l_total, 3 * kLnHalf, 1e-9);
  EXPECT_NEAR(same.l_total, -2.0794, 1e-4);

  const auto pred = oracle::perturbed(rng, gt, 0.4);
  const auto r = losses::total_loss(gt, pred);
  EXPECT_EQ(r.l_total, r.l_bad + r.l_grad + r.l_normal);
  EXPECT_NEAR(r.l_bad, losses::bad_loss(gt, pred), 1e-12);
  EXPECT_NEAR(r.l_grad, losses::grad_loss(gt, pred), 1e-12);
  EXPECT_NEAR(r.l_normal, losses::normal_loss(gt, pred), 1e-12);
  EXPECT_LE(r.omega_stats.min, r.omega_stats.mean);
  EXPECT_LE(r.omega_stats.mean, r.omega_stats.max);
}

TEST(TotalLoss, ClampOnlyAffectsBadTerm) {
  std::mt19937_64 rng(7);
  const auto gt = oracle::random_depth(rng, 8, 8, 1.0, 2.0);
  const auto pred = oracle::perturbed(rng, gt, 0.5);
  LossConfig on;
  LossConfig off;
  off.clamp_weight = false;
  const auto a = losses::total_loss(gt, pred, on);
  const auto b = losses::total_loss(gt, pred, off);
  EXPECT_NE(a.l_bad, b.l_bad);
  EXPECT_EQ(a.l_grad, b.l_grad);
  EXPECT_EQ(a.l_normal, b.l_normal);
}

TEST(Losses, MatchScalarOracleOnRandomPairs) {
  std::mt19937_64 rng(100);
  for (int i = 0; i < 100; ++i) {
    const auto gt = oracle::random_depth(rng, 8, 8);
    const auto pred = oracle::perturbed(rng, gt, 0.5);
    LossConfig cfg;
    cfg.clamp_weight = i % 3 != 0;
    EXPECT_NEAR(losses::bad_loss(gt, pred, cfg), oracle::bad_loss(gt, pred, to_oracle(cfg)), 1e-6);
    EXPECT_NEAR(losses::grad_loss(gt, pred), oracle::grad_loss(gt, pred), 1e-6);
    EXPECT_NEAR(losses::normal_loss(gt, pred), oracle::normal_loss(gt, pred), 1e-6);
  }
}

TEST(Losses, InvalidPixelsNeverMatter) {
  std::mt19937_64 rng(8);
  auto gt = oracle::random_depth(rng, 10, 10);
  gt.valid(3, 4) = false;
  gt.valid(0, 9) = false;
  gt.valid(7, 7) = false;
  auto pred = oracle::perturbed(rng, gt, 0.3);
  pred.valid.setConstant(true);
  const auto base = losses::total_loss(gt, pred);
  for (double junk : {0.0, 1e6, -3.0, std::numeric_limits<double>::quiet_NaN()}) {
    auto changed = pred;
    changed.values(3, 4) = junk;
    changed.values(0, 9) = junk;
    changed.values(7, 7) = junk;
    const auto r = losses::total_loss(gt, changed);
    EXPECT_EQ(r.l_bad, base.l_bad);
    EXPECT_EQ(r.l_grad, base.l_grad);
    EXPECT_EQ(r.l_normal, base.l_normal);
  }
}

TEST(Losses, TensorSobelMatchesDepthMapSobel) {
  std::mt19937_64 rng(9);
  auto d = oracle::random_depth(rng, 9, 7);
  d.valid(4, 3) = false;
  const auto s = losses::sobel(losses::to_tensor(d.values), losses::to_tensor(d.valid));
  const auto ref = sobel_gradients(d);
  EXPECT_LT((losses::to_grid(s.gx) - ref.gx).abs().maxCoeff(), 1e-12);
  EXPECT_LT((losses::to_grid(s.gy) - ref.gy).abs().maxCoeff(), 1e-12);
}

TEST(Losses, Errors) {
  const auto gt = DepthMap::constant(4, 4, 1.0);
  DepthMap none(Grid::Constant(4, 4, 1.0), Mask::Constant(4, 4, false));
  EXPECT_THROW(losses::bad_loss(none, gt), EmptyInputError);
  EXPECT_THROW(losses::grad_loss(none, gt), EmptyInputError);
  EXPECT_THROW(losses::normal_loss(none, gt), EmptyInputError);
  auto nan = gt;
  nan.values(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(losses::bad_loss(gt, nan), NumericalError);
  EXPECT_THROW(losses::bad_loss(gt, DepthMap::constant(4, 5, 1.0)), ShapeError);
  LossConfig bad;
  bad.alpha = -1.0;
  EXPECT_THROW(losses::bad_loss(gt, gt, bad), ConfigError);
  bad = LossConfig{};
  bad.denom_epsilon = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Losses, AnalyticGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(42);
  int attempts = 0;
  for (int i = 0; i < 3; ++i) {
    const auto [gt, pred] = gradcheck::draw_instance(rng, &attempts);
    EXPECT_LT(gradcheck::max_relative_error(gt, pred, LossConfig{}), 1e-4);
  }
}

TEST(Losses, BatchReductionAveragesAllValidPixels) {
  std::mt19937_64 rng(10);
  const auto a = oracle::random_depth(rng, 6, 6);
  const auto pa = oracle::perturbed(rng, a, 0.3);
  const auto b = oracle::random_depth(rng, 6, 6);
  const auto pb = oracle::perturbed(rng, b, 0.3);
  const auto gt = torch::cat({losses::to_tensor(a.values), losses::to_tensor(b.values)});
  const auto pred = torch::cat({losses::to_tensor(pa.values), losses::to_tensor(pb.values)});
  const auto valid = torch::ones_like(gt, torch::kBool);
  const double batch = losses::grad_loss(gt, pred, valid).item<double>();
  EXPECT_NEAR(batch, 0.5 * (losses::grad_loss(a, pa) + losses::grad_loss(b, pb)), 1e-12);
  // omega normalises per sample, so BAD splits the same way.
  const double bad = losses::bad_loss(gt, pred, valid, LossConfig{}).item<double>();
  EXPECT_NEAR(bad, 0.5 * (losses::bad_loss(a, pa) + losses::bad_loss(b, pb)), 1e-12);
}
