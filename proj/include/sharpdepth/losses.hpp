#pragma once

#include "sharpdepth/depth_map.hpp"

#include <torch/torch.h>

namespace sharpdepth::losses {

struct LossConfig {
  double alpha = 0.3;          // boundary-aware factor
  bool clamp_weight = true;    // omega <- max(omega, 0)
  double denom_epsilon = 1e-6; // added to the mean GT gradient magnitude

  void validate() const;
};

struct OmegaStats {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

struct LossReport {
  double l_bad = 0.0;
  double l_grad = 0.0;
  double l_normal = 0.0;
  double l_total = 0.0;
  OmegaStats omega_stats;
};

// Tensor API. Depth tensors are [B,1,H,W] floating point; `valid` is a bool
// tensor of the same shape. Reductions average over all valid pixels of the
// batch; the omega normaliser is per sample.

struct SobelPair {
  torch::Tensor gx;
  torch::Tensor gy;
};

// Replicate-padded Sobel; zero where the 3x3 support touches an invalid pixel.
SobelPair sobel(const torch::Tensor& depth, const torch::Tensor& valid);

torch::Tensor boundary_weight(const SobelPair& gt_grad, const SobelPair& pred_grad,
                              const torch::Tensor& valid, const LossConfig& cfg);

torch::Tensor bad_loss(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid,
                       const LossConfig& cfg);
torch::Tensor grad_loss(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid);
torch::Tensor normal_loss(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid);

// Differentiable terms of L = L_BAD + L_grad + L_normal plus the omega field.
struct LossTerms {
  torch::Tensor bad;
  torch::Tensor grad;
  torch::Tensor normal;
  torch::Tensor total;
  torch::Tensor omega;
  torch::Tensor valid;

  LossReport report() const;
};

LossTerms total_loss(const torch::Tensor& gt, const torch::Tensor& pred, const torch::Tensor& valid,
                     const LossConfig& cfg);

// DepthMap API, evaluated in float64. Pixels count as valid when valid in
// both maps.
Grid boundary_weight(const GradientField& gt_grad, const GradientField& pred_grad, const Mask& valid,
                     const LossConfig& cfg);
double bad_loss(const DepthMap& gt, const DepthMap& pred, const LossConfig& cfg = {});
double grad_loss(const DepthMap& gt, const DepthMap& pred);
double normal_loss(const DepthMap& gt, const DepthMap& pred);
LossReport total_loss(const DepthMap& gt, const DepthMap& pred, const LossConfig& cfg = {});

// [1,1,H,W] float64 tensors.
torch::Tensor to_tensor(const Grid& grid);
torch::Tensor to_tensor(const Mask& mask);
Grid to_grid(const torch::Tensor& t);

}  // namespace sharpdepth::losses
