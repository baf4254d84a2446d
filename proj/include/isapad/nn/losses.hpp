#pragma once

#include <torch/torch.h>

namespace isapad::nn {

inline constexpr double kDiceEps = 1e-6;

/// 1 - (2 sum(p g) + eps) / (sum p + sum g + eps) over all channels and
/// pixels of one sample. For batched input (N, C, H, W) the per-sample
/// losses are averaged. ShapeMismatch on differing shapes, LabelError when
/// gt is not one-hot over the channel axis.
torch::Tensor dice_loss(const torch::Tensor& pred, const torch::Tensor& gt);

/// Mean over the batch of -logits[class] + logsumexp(logits); logits (N, 2),
/// classes (N) int64.
torch::Tensor ce_loss(const torch::Tensor& logits, const torch::Tensor& classes);

struct LossWeights {
  double lambda1 = 0.001;
  double lambda2 = 1.0;
};

double combined_loss(double loss1, double loss2, const LossWeights& w);
torch::Tensor combined_loss(const torch::Tensor& loss1, const torch::Tensor& loss2, const LossWeights& w);

/// Dice over the rows with is_bona set; a zero scalar when there are none,
/// so PA samples never reach the loss.
torch::Tensor masked_dice_loss(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& is_bona);

}  // namespace isapad::nn
