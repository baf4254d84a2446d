#include <gtest/gtest.h>

#include <cmath>

#include "isapad/error.hpp"
#include "isapad/nn/losses.hpp"

using namespace isapad;
using namespace isapad::nn;

namespace {

torch::Tensor one_hot(const torch::Tensor& labels, int classes) {
  return torch::one_hot(labels, classes).permute({2, 0, 1}).to(torch::kFloat64);
}

/// Central-difference gradient of f at x, element by element.
template <class F>
torch::Tensor numeric_grad(F f, torch::Tensor x, double h = 1e-4) {
  auto g = torch::zeros_like(x);
  auto flat = x.view(-1);
  auto gflat = g.view(-1);
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + h;
    const double up = f(x).template item<double>();
    flat[i] = orig - h;
    const double down = f(x).template item<double>();
    flat[i] = orig;
    gflat[i] = (up - down) / (2 * h);
  }
  return g;
}

double relative_error(const torch::Tensor& a, const torch::Tensor& b) {
  return (a - b).norm().item<double>() / std::max(a.norm().item<double>(), b.norm().item<double>());
}

}  // namespace

TEST(DiceLoss, PerfectOverlapIsZero) {
  const auto gt = one_hot(torch::randint(0, 4, {8, 8}, torch::kInt64), 4);
  EXPECT_LE(dice_loss(gt, gt).item<double>(), 2e-6);
}

TEST(DiceLoss, DisjointIsOne) {
  const auto gt = one_hot(torch::randint(0, 4, {8, 8}, torch::kInt64), 4);
  const double k = gt.sum().item<double>();
  const double loss = dice_loss(torch::zeros_like(gt), gt).item<double>();
  EXPECT_NEAR(loss, 1 - kDiceEps / (k + kDiceEps), 1e-12);
  EXPECT_GE(loss, 1 - 1e-5);
}

TEST(DiceLoss, HandEvaluatedSingleChannel) {
  const auto pred = torch::tensor({1.0, 0.0, 0.0, 0.0}, torch::kFloat64).view({2, 2});
  const auto gt = torch::tensor({1.0, 1.0, 0.0, 0.0}, torch::kFloat64).view({2, 2});
  EXPECT_NEAR(dice_loss(pred, gt).item<double>(), 1.0 / 3.0, 1e-6);
}

TEST(DiceLoss, RangeOnRandomPredictions) {
  torch::manual_seed(3);
  for (int i = 0; i < 20; ++i) {
    const auto gt = one_hot(torch::randint(0, 4, {8, 8}, torch::kInt64), 4);
    const double l = dice_loss(torch::rand({4, 8, 8}, torch::kFloat64), gt).item<double>();
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 1.0);
  }
}

TEST(DiceLoss, BatchedIsMeanOfSamples) {
  const auto gt = torch::stack({one_hot(torch::randint(0, 4, {8, 8}, torch::kInt64), 4),
                                one_hot(torch::randint(0, 4, {8, 8}, torch::kInt64), 4)});
  const auto pred = torch::rand({2, 4, 8, 8}, torch::kFloat64);
  const double expected = (dice_loss(pred[0], gt[0]).item<double>() + dice_loss(pred[1], gt[1]).item<double>()) / 2;
  EXPECT_NEAR(dice_loss(pred, gt).item<double>(), expected, 1e-12);
}

TEST(DiceLoss, Errors) {
  const auto gt = one_hot(torch::zeros({8, 8}, torch::kInt64), 4);
  try {
    dice_loss(torch::zeros({4, 8, 9}, torch::kFloat64), gt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  auto bad = gt.clone();
  bad[1][0][0] = 1.0;  // two hot channels at one pixel
  try {
    dice_loss(gt, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LabelError);
  }
}

TEST(DiceLoss, GradientMatchesFiniteDifferencesThroughSigmoid) {
  torch::manual_seed(11);
  const auto gt = one_hot(torch::randint(0, 4, {8, 8}, torch::kInt64), 4);
  auto z = torch::randn({4, 8, 8}, torch::kFloat64).requires_grad_(true);
  dice_loss(torch::sigmoid(z), gt).backward();
  auto probe = z.detach().clone();
  const auto numeric = numeric_grad([&](const torch::Tensor& x) { return dice_loss(torch::sigmoid(x), gt); }, probe);
  EXPECT_LT(relative_error(z.grad(), numeric), 1e-3);
}

TEST(CeLoss, HandValues) {
  const auto cls0 = torch::tensor({0}, torch::kInt64);
  const auto cls1 = torch::tensor({1}, torch::kInt64);
  const auto uniform = torch::tensor({{0.0, 0.0}}, torch::kFloat64);
  const auto skew = torch::tensor({{3.0, 0.0}}, torch::kFloat64);
  EXPECT_NEAR(ce_loss(uniform, cls0).item<double>(), std::log(2.0), 1e-6);
  EXPECT_NEAR(ce_loss(skew, cls0).item<double>(), std::log1p(std::exp(-3.0)), 1e-12);
  EXPECT_NEAR(ce_loss(skew, cls1).item<double>(), 3.0 + std::log1p(std::exp(-3.0)), 1e-12);
  EXPECT_NEAR(ce_loss(skew, cls0).item<double>(), 0.048587, 1e-6);
}

TEST(CeLoss, MatchesDefinitionAndIsShiftInvariant) {
  torch::manual_seed(5);
  for (int i = 0; i < 50; ++i) {
    const auto logits = torch::randn({1, 2}, torch::kFloat64) * 5;
    const int c = i % 2;
    const auto cls = torch::tensor({c}, torch::kInt64);
    const double a = logits[0][0].item<double>(), b = logits[0][1].item<double>();
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    const double loss = ce_loss(logits, cls).item<double>();
    EXPECT_NEAR(loss, lse - (c == 0 ? a : b), 1e-12);
    EXPECT_GE(loss, 0.0);
    const double shift = (i - 25) * 3.7;
    EXPECT_NEAR(ce_loss(logits + shift, cls).item<double>(), loss, 1e-9);
  }
}

TEST(CeLoss, StableForLargeLogits) {
  const auto logits = torch::tensor({{1000.0, -1000.0}}, torch::kFloat64);
  EXPECT_NEAR(ce_loss(logits, torch::tensor({1}, torch::kInt64)).item<double>(), 2000.0, 1e-9);
}

TEST(CeLoss, GradientMatchesFiniteDifferences) {
  torch::manual_seed(7);
  for (int c = 0; c < 2; ++c) {
    const auto cls = torch::tensor({c}, torch::kInt64);
    auto logits = torch::randn({1, 2}, torch::kFloat64).requires_grad_(true);
    ce_loss(logits, cls).backward();
    auto probe = logits.detach().clone();
    const auto numeric = numeric_grad([&](const torch::Tensor& x) { return ce_loss(x, cls); }, probe);
    EXPECT_LT(relative_error(logits.grad(), numeric), 1e-3);
  }
}

TEST(CombinedLoss, Weights) {
  EXPECT_NEAR(combined_loss(0.4, 0.7, LossWeights{}), 0.7004, 1e-9);
  EXPECT_EQ(combined_loss(123.0, 0.7, LossWeights{0.0, 1.0}), 0.7);
}

TEST(CombinedLoss, BatchWithoutBonafideUsesOnlyLoss2) {
  const auto pred = torch::rand({3, 4, 8, 8}, torch::kFloat64);
  const auto gt = torch::zeros({3, 4, 8, 8}, torch::kFloat64);
  const auto none = torch::zeros({3}, torch::kBool);
  const auto l1 = masked_dice_loss(pred, gt, none);
  EXPECT_EQ(l1.item<double>(), 0.0);
  const auto l2 = torch::tensor(0.9, torch::kFloat64);
  EXPECT_EQ(combined_loss(l1, l2, LossWeights{}).item<double>(), 0.9);
}

TEST(CombinedLoss, MaskedDiceIgnoresPaRows) {
  torch::manual_seed(9);
  auto gt = torch::stack({one_hot(torch::randint(0, 4, {8, 8}, torch::kInt64), 4), torch::zeros({4, 8, 8}, torch::kFloat64)});
  const auto pred = torch::rand({2, 4, 8, 8}, torch::kFloat64);
  const auto bona = torch::tensor({1, 0}, torch::kInt64).to(torch::kBool);
  EXPECT_NEAR(masked_dice_loss(pred, gt, bona).item<double>(), dice_loss(pred[0], gt[0]).item<double>(), 1e-12);
}
