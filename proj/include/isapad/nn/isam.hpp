#pragma once

#include <torch/torch.h>

#include "isapad/patch_extract.hpp"

namespace isapad::nn {

/// Convolution (no bias) followed by batch normalisation and ReLU.
class ConvBnReluImpl : public torch::nn::Module {
 public:
  ConvBnReluImpl(int in, int out, int kernel, int stride = 1, int padding = -1);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::BatchNorm2d bn_{nullptr};
};
TORCH_MODULE(ConvBnRelu);

/// Encoder stage: two 3x3 convolutions on the main path (the first one
/// strided) plus a strided 1x1 projection shortcut, summed.
class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(int in, int out, int stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  ConvBnRelu conv_a_{nullptr}, conv_b_{nullptr}, shortcut_{nullptr};
};
TORCH_MODULE(EncoderBlock);

/// Decoder stage: 4x4 stride-2 transposed convolution, concatenation with
/// the encoder skip, then a 3x3 convolution plus a 1x1 shortcut, summed.
class DecoderBlockImpl : public torch::nn::Module {
 public:
  DecoderBlockImpl(int in, int skip, int out);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& skip);

 private:
  torch::nn::ConvTranspose2d up_{nullptr};
  torch::nn::BatchNorm2d up_bn_{nullptr};
  ConvBnRelu conv_{nullptr}, shortcut_{nullptr};
};
TORCH_MODULE(DecoderBlock);

/// Compact U-Net with four resolution levels (16/32/64/128 channels at width
/// 1) producing four sigmoid maps: background, stratum corneum, viable
/// epidermis, sweat gland. Spatial input size must be a multiple of 16.
class IsamNetImpl : public torch::nn::Module {
 public:
  explicit IsamNetImpl(double width = 1.0);

  /// Pre-sigmoid head output, (N, 4, H, W).
  torch::Tensor logits(const torch::Tensor& x);
  /// Segmentation probabilities in (0, 1), (N, 4, H, W).
  torch::Tensor forward(const torch::Tensor& x);

  double width() const noexcept { return width_; }

 private:
  double width_;
  std::vector<EncoderBlock> encoders_;
  std::vector<DecoderBlock> decoders_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(IsamNet);

struct AttentionConfig {
  double w1 = 1.0;  // weight on predicted foreground
  double w2 = 0.5;  // weight on predicted background
};

void validate(const AttentionConfig& cfg);

/// Single-patch inference: (4, 256, 256) probabilities. ShapeMismatch for
/// anything but a 256x256 patch.
torch::Tensor isam_forward(IsamNet& net, const Patch& patch);

/// Pixelwise max over the three foreground channels; (N, 4, H, W) ->
/// (N, 1, H, W), or (4, H, W) -> (1, H, W).
torch::Tensor foreground_map(const torch::Tensor& seg);

/// S * x * w1 + (1 - S) * x * w2, pixelwise.
torch::Tensor apply_attention(const torch::Tensor& x, const torch::Tensor& s, const AttentionConfig& cfg);

}  // namespace isapad::nn
