#include "sharpdepth/losses.hpp"

#include "sharpdepth/errors.hpp"

#include <cmath>
#include <cstring>

namespace sharpdepth::losses {
namespace F = torch::nn::functional;
namespace {

void check_shapes(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid) {
  if (gt.dim() != 4 || gt.size(1) != 1) throw ShapeError("depth tensors must be [B,1,H,W]");
  if (!gt.sizes().equals(pred.sizes()) || !gt.sizes().equals(valid.sizes())) {
    throw ShapeError("ground truth, prediction and mask shapes differ");
  }
  if (gt.size(2) < 3 || gt.size(3) < 3) throw ShapeError("Sobel gradients need at least 3x3 pixels");
}

torch::Tensor valid_count(const torch::Tensor& valid) {
  auto n = valid.sum();
  if (n.item<std::int64_t>() == 0) throw EmptyInputError("loss: no valid pixels");
  return n;
}

torch::Tensor masked_mean(const torch::Tensor& term, const torch::Tensor& valid) {
  const auto n = valid_count(valid);
  return torch::where(valid, term, torch::zeros_like(term)).sum() / n.to(term.dtype());
}

// Replaces values at invalid pixels so no NaN/Inf can leak through the
// backward pass; Sobel support masking keeps them out of every result.
std::pair<torch::Tensor, torch::Tensor> sanitize(const torch::Tensor& gt, const torch::Tensor& pred,
                                                 const torch::Tensor& valid) {
  const auto one = torch::ones_like(gt);
  auto g = torch::where(valid, gt, one);
  auto p = torch::where(valid, pred, g);
  if (!torch::isfinite(g).all().item<bool>() || !torch::isfinite(p).all().item<bool>()) {
    throw NumericalError("loss: non-finite depth at a valid pixel");
  }
  return {g, p};
}

torch::Tensor sobel_kernel(const torch::TensorOptions& opts, bool x_direction) {
  auto k = torch::tensor({-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0}, opts).reshape({3, 3});
  if (!x_direction) k = k.t().contiguous();
  return k.reshape({1, 1, 3, 3});
}

}  // namespace

void LossConfig::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("loss.alpha must be >= 0");
  if (!(denom_epsilon > 0.0)) throw ConfigError("loss.denom_epsilon must be > 0");
}

SobelPair sobel(const torch::Tensor& depth, const torch::Tensor& valid) {
  const auto opts = depth.options();
  const auto padded = F::pad(depth, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
  auto gx = F::conv2d(padded, sobel_kernel(opts, true));
  auto gy = F::conv2d(padded, sobel_kernel(opts, false));
  const auto invalid = (~valid).to(opts.dtype());
  const auto touched = F::max_pool2d(F::pad(invalid, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate)),
                                     F::MaxPool2dFuncOptions(3).stride(1));
  const auto support = touched == 0;
  const auto zero = torch::zeros_like(gx);
  return {torch::where(support, gx, zero), torch::where(support, gy, zero)};
}

torch::Tensor boundary_weight(const SobelPair& gt_grad, const SobelPair& pred_grad, const torch::Tensor& valid,
                              const LossConfig& cfg) {
  valid_count(valid);
  const auto mag = gt_grad.gx.abs() + gt_grad.gy.abs();
  const auto vf = valid.to(mag.dtype());
  // Per-sample mean GT gradient magnitude over valid pixels.
  const auto per_sample_n = vf.sum({1, 2, 3}, true).clamp_min(1.0);
  const auto mean_mag = (mag * vf).sum({1, 2, 3}, true) / per_sample_n;
  const auto truth = torch::log(mag + 0.5) / (mean_mag + cfg.denom_epsilon);
  const auto error = (gt_grad.gx - pred_grad.gx).abs() + (gt_grad.gy - pred_grad.gy).abs();
  auto omega = truth * error;
  if (cfg.clamp_weight) omega = omega.clamp_min(0.0);
  return torch::where(valid, omega, torch::zeros_like(omega));
}

namespace {

torch::Tensor bad_from(const torch::Tensor& g, const torch::Tensor& p, const torch::Tensor& omega,
                       const torch::Tensor& valid, const LossConfig& cfg) {
  const auto term = (1.0 + cfg.alpha * omega) * torch::log((g - p).abs() + 0.5);
  return masked_mean(term, valid);
}

torch::Tensor grad_from(const SobelPair& gg, const SobelPair& pg, const torch::Tensor& valid) {
  const auto term = torch::log((gg.gx - pg.gx).abs() + 0.5) + torch::log((gg.gy - pg.gy).abs() + 0.5);
  return masked_mean(term, valid);
}

torch::Tensor normal_from(const SobelPair& gg, const SobelPair& pg, const torch::Tensor& valid) {
  // n = (-gx, -gy, 1); the constant z component enters as the 1 terms.
  const auto dot = gg.gx * pg.gx + gg.gy * pg.gy + 1.0;
  const auto norm_g = torch::sqrt(gg.gx.square() + gg.gy.square() + 1.0);
  const auto norm_p = torch::sqrt(pg.gx.square() + pg.gy.square() + 1.0);
  const auto cos = dot / (norm_g * norm_p).clamp_min(1e-8);
  return masked_mean(1.0 - cos, valid);
}

}  // namespace

torch::Tensor bad_loss(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid,
                       const LossConfig& cfg) {
  check_shapes(gt, pred, valid);
  cfg.validate();
  const auto [g, p] = sanitize(gt, pred, valid);
  const auto omega = boundary_weight(sobel(g, valid), sobel(p, valid), valid, cfg);
  return bad_from(g, p, omega, valid, cfg);
}

torch::Tensor grad_loss(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid) {
  check_shapes(gt, pred, valid);
  const auto [g, p] = sanitize(gt, pred, valid);
  return grad_from(sobel(g, valid), sobel(p, valid), valid);
}

torch::Tensor normal_loss(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid) {
  check_shapes(gt, pred, valid);
  const auto [g, p] = sanitize(gt, pred, valid);
  return normal_from(sobel(g, valid), sobel(p, valid), valid);
}

LossTerms total_loss(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid,
                     const LossConfig& cfg) {
  check_shapes(gt, pred, valid);
  cfg.validate();
  const auto [g, p] = sanitize(gt, pred, valid);
  const auto gg = sobel(g, valid);
  const auto pg = sobel(p, valid);
  LossTerms t;
  t.valid = valid;
  t.omega = boundary_weight(gg, pg, valid, cfg);
  t.bad = bad_from(g, p, t.omega, valid, cfg);
  t.grad = grad_from(gg, pg, valid);
  t.normal = normal_from(gg, pg, valid);
  t.total = t.bad + t.grad + t.normal;
  return t;
}

LossReport LossTerms::report() const {
  LossReport r;
  r.l_bad = bad.item<double>();
  r.l_grad = grad.item<double>();
  r.l_normal = normal.item<double>();
  r.l_total = total.item<double>();
  const auto w = omega.detach().masked_select(valid);
  r.omega_stats.min = w.min().item<double>();
  r.omega_stats.mean = w.mean().item<double>();
  r.omega_stats.max = w.max().item<double>();
  return r;
}

torch::Tensor to_tensor(const Grid& grid) {
  return torch::from_blob(const_cast<double*>(grid.data()), {1, 1, grid.rows(), grid.cols()}, torch::kFloat64)
      .clone();
}

torch::Tensor to_tensor(const Mask& mask) {
  auto t = torch::empty({1, 1, mask.rows(), mask.cols()}, torch::kBool);
  auto acc = t.accessor<bool, 4>();
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) acc[0][0][r][c] = mask(r, c);
  }
  return t;
}

Grid to_grid(const torch::Tensor& t) {
  const auto d = t.detach().to(torch::kFloat64).contiguous();
  const auto rows = d.size(-2);
  const auto cols = d.size(-1);
  if (d.numel() != rows * cols) throw ShapeError("to_grid expects a single-channel single-sample tensor");
  Grid g(rows, cols);
  std::memcpy(g.data(), d.data_ptr<double>(), static_cast<std::size_t>(rows * cols) * sizeof(double));
  return g;
}

namespace {

struct MapTensors {
  torch::Tensor gt;
  torch::Tensor pred;
  torch::Tensor valid;
};

MapTensors tensors_of(const DepthMap& gt, const DepthMap& pred) {
  require_same_shape(gt, pred, "loss");
  return {to_tensor(gt.values), to_tensor(pred.values), to_tensor(Mask(gt.valid && pred.valid))};
}

}  // namespace

Grid boundary_weight(const GradientField& gt_grad, const GradientField& pred_grad, const Mask& valid,
                     const LossConfig& cfg) {
  cfg.validate();
  const SobelPair g{to_tensor(gt_grad.gx), to_tensor(gt_grad.gy)};
  const SobelPair p{to_tensor(pred_grad.gx), to_tensor(pred_grad.gy)};
  return to_grid(boundary_weight(g, p, to_tensor(valid), cfg));
}

double bad_loss(const DepthMap& gt, const DepthMap& pred, const LossConfig& cfg) {
  const auto t = tensors_of(gt, pred);
  return bad_loss(t.gt, t.pred, t.valid, cfg).item<double>();
}

double grad_loss(const DepthMap& gt, const DepthMap& pred) {
  const auto t = tensors_of(gt, pred);
  return grad_loss(t.gt, t.pred, t.valid).item<double>();
}

double normal_loss(const DepthMap& gt, const DepthMap& pred) {
  const auto t = tensors_of(gt, pred);
  return normal_loss(t.gt, t.pred, t.valid).item<double>();
}

LossReport total_loss(const DepthMap& gt, const DepthMap& pred, const LossConfig& cfg) {
  const auto t = tensors_of(gt, pred);
  return total_loss(t.gt, t.pred, t.valid, cfg).report();
}

}  // namespace sharpdepth::losses
