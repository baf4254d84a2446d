#include "isapad/nn/isam.hpp"

#include <cmath>

#include "isapad/error.hpp"
#include "isapad/nn/tensor_utils.hpp"

namespace isapad::nn {

namespace tnn = torch::nn;

ConvBnReluImpl::ConvBnReluImpl(int in, int out, int kernel, int stride, int padding) {
  if (padding < 0) padding = kernel / 2;
  conv_ = register_module("conv", tnn::Conv2d(tnn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(false)));
  bn_ = register_module("bn", tnn::BatchNorm2d(out));
}

torch::Tensor ConvBnReluImpl::forward(const torch::Tensor& x) { return torch::relu(bn_(conv_(x))); }

EncoderBlockImpl::EncoderBlockImpl(int in, int out, int stride) {
  conv_a_ = register_module("conv_a", ConvBnRelu(in, out, 3, stride));
  conv_b_ = register_module("conv_b", ConvBnRelu(out, out, 3));
  shortcut_ = register_module("shortcut", ConvBnRelu(in, out, 1, stride, 0));
}

torch::Tensor EncoderBlockImpl::forward(const torch::Tensor& x) { return conv_b_(conv_a_(x)) + shortcut_(x); }

DecoderBlockImpl::DecoderBlockImpl(int in, int skip, int out) {
  up_ = register_module("up", tnn::ConvTranspose2d(tnn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(false)));
  up_bn_ = register_module("up_bn", tnn::BatchNorm2d(out));
  conv_ = register_module("conv", ConvBnRelu(out + skip, out, 3));
  shortcut_ = register_module("shortcut", ConvBnRelu(out + skip, out, 1, 1, 0));
}

torch::Tensor DecoderBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& skip) {
  const auto cat = torch::cat({torch::relu(up_bn_(up_(x))), skip}, 1);
  return conv_(cat) + shortcut_(cat);
}

IsamNetImpl::IsamNetImpl(double width) : width_(width) {
  if (!(width > 0.0) || !std::isfinite(width)) fail(ErrorCode::ConfigError, "ISAM width multiplier must be positive");
  const int c[4] = {scaled(16, width), scaled(32, width), scaled(64, width), scaled(128, width)};
  int in = 1;
  for (int i = 0; i < 4; ++i) {
    encoders_.push_back(register_module("enc" + std::to_string(i + 1), EncoderBlock(in, c[i], 2)));
    in = c[i];
  }
  // Decoder i upsamples to the resolution of encoder i-1 (the input for i = 0).
  for (int i = 3; i >= 1; --i) {
    decoders_.push_back(register_module("dec" + std::to_string(i + 1), DecoderBlock(c[i], c[i - 1], c[i - 1])));
  }
  decoders_.push_back(register_module("dec1", DecoderBlock(c[0], 1, c[0])));
  head_ = register_module("head", tnn::Conv2d(tnn::Conv2dOptions(c[0], 4, 1)));
  // Wide head; every map starts at a 1/4 prior.
  torch::NoGradGuard no_grad;
  head_->weight.normal_(0.0, 3.0);
  head_->bias.fill_(-std::log(3.0));
}

torch::Tensor IsamNetImpl::logits(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 1 || x.size(2) % 16 != 0 || x.size(3) % 16 != 0 || x.size(2) == 0) {
    fail(ErrorCode::ShapeMismatch, "ISAM expects (N, 1, H, W) with H, W positive multiples of 16");
  }
  std::vector<torch::Tensor> skips{x};
  auto h = x;
  for (auto& e : encoders_) {
    h = e(h);
    skips.push_back(h);
  }
  // skips: input, e1, e2, e3, e4; h == e4.
  for (std::size_t i = 0; i < decoders_.size(); ++i) h = decoders_[i](h, skips[3 - i]);
  return head_(h);
}

torch::Tensor IsamNetImpl::forward(const torch::Tensor& x) { return torch::sigmoid(logits(x)); }

void validate(const AttentionConfig& cfg) {
  if (!std::isfinite(cfg.w1) || !std::isfinite(cfg.w2) || cfg.w2 < 0.0 || cfg.w1 < cfg.w2) {
    fail(ErrorCode::ConfigError, "attention weights need w1 >= w2 >= 0");
  }
}

torch::Tensor isam_forward(IsamNet& net, const Patch& patch) {
  if (patch.data.rows() != 256 || patch.data.cols() != 256) {
    fail(ErrorCode::ShapeMismatch, "ISAM input must be 256x256");
  }
  return net->forward(to_tensor(patch.data).unsqueeze(0)).squeeze(0);
}

torch::Tensor foreground_map(const torch::Tensor& seg) {
  const int64_t ch = seg.dim() - 3;
  if ((seg.dim() != 3 && seg.dim() != 4) || seg.size(ch) != 4) {
    fail(ErrorCode::ShapeMismatch, "segmentation must have 4 channels");
  }
  return seg.slice(ch, 1, 4).amax(ch, /*keepdim=*/true);
}

torch::Tensor apply_attention(const torch::Tensor& x, const torch::Tensor& s, const AttentionConfig& cfg) {
  if (x.sizes() != s.sizes()) fail(ErrorCode::ShapeMismatch, "attention map and input shapes differ");
  return s * x * cfg.w1 + (1 - s) * x * cfg.w2;
}

}  // namespace isapad::nn
