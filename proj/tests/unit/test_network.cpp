#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "isapad/error.hpp"
#include "isapad/nn/network.hpp"
#include "isapad/nn/tensor_utils.hpp"

using namespace isapad;
using namespace isapad::nn;

namespace {

Patch random_patch(std::uint64_t seed) {
  torch::manual_seed(seed);
  Patch p;
  p.data = to_image(torch::rand({256, 256}));
  return p;
}

NetConfig small(Variant v = Variant::FullIsapad) {
  NetConfig cfg;
  cfg.variant = v;
  cfg.width = 0.125;
  cfg.isam_width = 0.25;
  return cfg;
}

class FullWidth : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    NetConfig cfg;  // width multiplier 1
    net_ = std::make_unique<IsapadNet>(make_net(cfg));
    (*net_)->eval();
  }
  static void TearDownTestSuite() { net_.reset(); }
  static std::unique_ptr<IsapadNet> net_;
};

std::unique_ptr<IsapadNet> FullWidth::net_;

}  // namespace

TEST_F(FullWidth, IntermediateShapesFollowTheLayerTable) {
  torch::NoGradGuard g;
  ShapeTrace trace;
  (*net_)->forward(to_tensor(random_patch(1).data).unsqueeze(0), {.trace = &trace});
  const ShapeTrace expected = {
      {"isam", {1, 4, 256, 256}},         {"stem", {1, 64, 128, 128}},       {"block1", {1, 256, 128, 128}},
      {"transition1", {1, 128, 64, 64}},  {"block2", {1, 512, 64, 64}},      {"transition2", {1, 256, 32, 32}},
      {"block3", {1, 1024, 32, 32}},      {"transition3", {1, 512, 16, 16}}, {"concat", {1, 1024, 16, 16}},
      {"head_conv", {1, 1024, 8, 8}},     {"pooled", {1, 1024}},             {"logits", {1, 2}},
  };
  EXPECT_EQ(trace, expected);
}

TEST_F(FullWidth, FeaturesArePooledHeadActivations) {
  const Patch p = random_patch(2);
  const std::vector<Patch> two{p, p};
  const auto features = export_features(*net_, two);
  ASSERT_EQ(features.sizes().vec(), (std::vector<int64_t>{2, 1024}));
  EXPECT_TRUE(torch::equal(features[0], features[1]));

  torch::NoGradGuard g;
  const auto head = (*net_)->forward(to_tensor(p.data).unsqueeze(0)).head[0];
  // Spatial mean recomputed by explicit summation over the 8x8 grid.
  auto manual = torch::zeros({head.size(0)}, torch::kFloat64);
  const auto h = head.to(torch::kFloat64);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) manual += h.select(1, r).select(1, c);
  }
  manual /= 64.0;
  EXPECT_LE((features[0].to(torch::kFloat64) - manual).abs().max().item<double>(), 1e-5);
}

TEST(Network, ProbabilitiesAreSoftmaxOfLogits) {
  auto net = make_net(small());
  net->eval();
  torch::NoGradGuard g;
  const auto out = net->forward(to_tensor(random_patch(3).data).unsqueeze(0));
  EXPECT_NEAR(out.probs.sum().item<double>(), 1.0, 1e-6);
  const auto l = out.logits.to(torch::kFloat64);
  const auto manual = torch::exp(l) / torch::exp(l).sum(1, true);
  EXPECT_LE((manual - out.probs.to(torch::kFloat64)).abs().max().item<double>(), 1e-6);
}

TEST(Network, DuplicatedPatchGivesIdenticalRows) {
  auto net = make_net(small());
  net->eval();
  torch::NoGradGuard g;
  const auto x = to_tensor(random_patch(4).data).unsqueeze(0).expand({8, 1, 256, 256}).contiguous();
  const auto probs = net->forward(x).probs;
  for (int i = 1; i < 8; ++i) EXPECT_TRUE(torch::allclose(probs[i], probs[0], 0.0, 1e-6));
}

TEST(Network, RejectsWrongInput) {
  auto net = make_net(small());
  try {
    net->forward(torch::rand({1, 1, 128, 128}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Variants, BaselineIsSmallerThanFull) {
  EXPECT_LT(parameter_count(*make_net(small(Variant::Baseline))), parameter_count(*make_net(small())));
}

TEST(Variants, DualBranchWithoutIsamHasNoIsamWeights) {
  auto net = make_net(small(Variant::DualBranchNoIsam));
  EXPECT_FALSE(net->has_isam());
  for (const auto& p : net->named_parameters()) EXPECT_NE(p.key().rfind("isam.", 0), 0u) << p.key();
  net->eval();
  torch::NoGradGuard g;
  const auto out = net->forward(to_tensor(random_patch(5).data).unsqueeze(0));
  EXPECT_FALSE(out.seg.defined());
}

TEST(Variants, AllProduceTwoProbabilities) {
  const auto x = to_tensor(random_patch(6).data).unsqueeze(0);
  for (Variant v : {Variant::Baseline, Variant::DualBranchNoIsam, Variant::BaselinePlusIsam, Variant::FullIsapad}) {
    auto net = make_net(small(v));
    net->eval();
    torch::NoGradGuard g;
    const auto probs = net->forward(x).probs;
    EXPECT_EQ(probs.sizes().vec(), (std::vector<int64_t>{1, 2})) << to_string(v);
    EXPECT_NEAR(probs.sum().item<double>(), 1.0, 1e-6) << to_string(v);
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
}

TEST(Variants, SameSeedSameWeights) {
  EXPECT_EQ(checksum(*make_net(small())), checksum(*make_net(small())));
}

TEST(GradCam, NormalizedRange) {
  auto net = make_net(small());
  for (int c = 0; c < 2; ++c) {
    const auto cam = grad_cam(net, random_patch(7), c);
    ASSERT_EQ(cam.map.rows(), 8);
    ASSERT_EQ(cam.upsampled.rows(), 256);
    float lo = 1, hi = 0;
    for (float v : cam.map.values()) lo = std::min(lo, v), hi = std::max(hi, v);
    EXPECT_GE(lo, 0.0f);
    EXPECT_TRUE(hi == 1.0f || hi == 0.0f);
    for (float v : cam.upsampled.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(GradCam, ZeroGradientGivesZeroMap) {
  auto net = make_net(small());
  {
    torch::NoGradGuard g;
    for (auto& p : net->named_parameters()) {
      if (p.key().rfind("fc.", 0) == 0) p.value().zero_();
    }
  }
  const auto cam = grad_cam(net, random_patch(8), 1);
  for (float v : cam.map.values()) EXPECT_EQ(v, 0.0f);
  for (float v : cam.upsampled.values()) EXPECT_EQ(v, 0.0f);
}

TEST(GradCam, InvalidClass) {
  auto net = make_net(small());
  for (int c : {-1, 2}) {
    try {
      grad_cam(net, random_patch(9), c);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DomainError);
    }
  }
}

// One 1x1 convolution with hand-set weights produces a 2-channel 4x4
// feature map A; the target is T = u0 * mean(A0^2) + u1 * mean(A1). Then
// dT/dA0 = 2 u0 A0 / 16 and dT/dA1 = u1 / 16, so the channel weights are
// 2 u0 mean(A0) / 16 and u1 / 16.
TEST(GradCam, MatchesHandComputation) {
  const double a[2] = {1.5, -0.5}, b[2] = {0.2, 0.1}, u[2] = {0.7, 2.0};
  double xin[16];
  for (int i = 0; i < 16; ++i) xin[i] = std::sin(0.7 * i) * 0.5 + 0.5;

  torch::nn::Conv2d conv(torch::nn::Conv2dOptions(1, 2, 1));
  conv->to(torch::kFloat64);
  {
    torch::NoGradGuard g;
    conv->weight.view(-1).copy_(torch::tensor({a[0], a[1]}, torch::kFloat64));
    conv->bias.copy_(torch::tensor({b[0], b[1]}, torch::kFloat64));
  }
  const auto x = torch::from_blob(xin, {1, 1, 4, 4}, torch::kFloat64).clone();
  const auto act = conv(x);
  const auto target = u[0] * act.select(1, 0).pow(2).mean() + u[1] * act.select(1, 1).mean();
  const auto cam = grad_cam_from(act, target);

  double A[2][16], mean0 = 0;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 16; ++i) A[c][i] = a[c] * xin[i] + b[c];
  }
  for (int i = 0; i < 16; ++i) mean0 += A[0][i] / 16;
  const double w0 = 2 * u[0] * mean0 / 16, w1 = u[1] / 16;
  double raw[16], lo = 1e300, hi = -1e300;
  for (int i = 0; i < 16; ++i) {
    raw[i] = std::max(0.0, w0 * A[0][i] + w1 * A[1][i]);
    lo = std::min(lo, raw[i]);
    hi = std::max(hi, raw[i]);
  }
  ASSERT_GT(hi, lo);
  for (int i = 0; i < 16; ++i) {
    EXPECT_NEAR(cam[i / 4][i % 4].item<double>(), (raw[i] - lo) / (hi - lo), 1e-12) << i;
  }
}
