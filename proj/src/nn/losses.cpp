#include "isapad/nn/losses.hpp"

#include "isapad/error.hpp"

namespace isapad::nn {

namespace {

void check_one_hot(const torch::Tensor& gt, int64_t channel_dim) {
  const auto binary = (gt == 0) | (gt == 1);
  if (!binary.all().item<bool>() || !(gt.sum(channel_dim) == 1).all().item<bool>()) {
    fail(ErrorCode::LabelError, "ground-truth mask is not one-hot");
  }
}

torch::Tensor dice_single(const torch::Tensor& p, const torch::Tensor& g) {
  return 1 - (2 * (p * g).sum() + kDiceEps) / (p.sum() + g.sum() + kDiceEps);
}

}  // namespace

torch::Tensor dice_loss(const torch::Tensor& pred, const torch::Tensor& gt) {
  if (pred.sizes() != gt.sizes()) fail(ErrorCode::ShapeMismatch, "prediction and mask shapes differ");
  if (pred.dim() == 4) {
    // A single-channel mask is binary; one-hot only applies across channels.
    if (pred.size(1) > 1) check_one_hot(gt, 1);
    const auto p = pred.flatten(1), g = gt.flatten(1);
    return (1 - (2 * (p * g).sum(1) + kDiceEps) / (p.sum(1) + g.sum(1) + kDiceEps)).mean();
  }
  if (pred.dim() == 3) {
    if (pred.size(0) > 1) check_one_hot(gt, 0);
    return dice_single(pred, gt);
  }
  if (pred.dim() == 2) return dice_single(pred, gt);
  fail(ErrorCode::ShapeMismatch, "dice expects (H, W), (C, H, W) or (N, C, H, W)");
}

torch::Tensor ce_loss(const torch::Tensor& logits, const torch::Tensor& classes) {
  if (logits.dim() != 2 || classes.dim() != 1 || logits.size(0) != classes.size(0)) {
    fail(ErrorCode::ShapeMismatch, "ce_loss expects logits (N, C) and classes (N)");
  }
  const auto picked = logits.gather(1, classes.to(torch::kInt64).unsqueeze(1)).squeeze(1);
  return (torch::logsumexp(logits, 1) - picked).mean();
}

double combined_loss(double loss1, double loss2, const LossWeights& w) { return w.lambda1 * loss1 + w.lambda2 * loss2; }

torch::Tensor combined_loss(const torch::Tensor& loss1, const torch::Tensor& loss2, const LossWeights& w) {
  return w.lambda1 * loss1 + w.lambda2 * loss2;
}

torch::Tensor masked_dice_loss(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& is_bona) {
  const auto idx = is_bona.to(torch::kBool).nonzero().squeeze(1);
  if (idx.numel() == 0) return torch::zeros({}, pred.options());
  return dice_loss(pred.index_select(0, idx), gt.index_select(0, idx));
}

}  // namespace isapad::nn
