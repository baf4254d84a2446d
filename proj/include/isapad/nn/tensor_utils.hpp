#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <span>

#include "isapad/image.hpp"
#include "isapad/patch_extract.hpp"

namespace isapad::nn {

/// Channel count after applying a width multiplier; never below one.
int scaled(int channels, double width);

/// (1, H, W) float tensor holding a copy of the image.
torch::Tensor to_tensor(const Image& image);

/// (N, 1, H, W) batch of patches.
torch::Tensor to_batch(std::span<const Patch> patches);

/// (4, H, W) one-hot float tensor from a label map with values 0..3.
torch::Tensor one_hot_mask(const ByteImage& labels);

/// (H, W) tensor back to an image.
Image to_image(const torch::Tensor& plane);

/// FNV-1a over the bytes of every parameter and buffer, in registration
/// order. Used to prove frozen groups were left untouched.
std::uint64_t checksum(const torch::nn::Module& module);
std::uint64_t checksum(const std::vector<torch::Tensor>& tensors);

}  // namespace isapad::nn
