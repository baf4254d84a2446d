#include "isapad/nn/tensor_utils.hpp"

#include <cmath>
#include <cstring>

#include "isapad/error.hpp"

namespace isapad::nn {

int scaled(int channels, double width) {
  return std::max(1, static_cast<int>(std::lround(channels * width)));
}

torch::Tensor to_tensor(const Image& image) {
  auto t = torch::empty({1, image.rows(), image.cols()}, torch::kFloat32);
  std::memcpy(t.data_ptr<float>(), image.values().data(), image.values().size() * sizeof(float));
  return t;
}

torch::Tensor to_batch(std::span<const Patch> patches) {
  std::vector<torch::Tensor> planes;
  planes.reserve(patches.size());
  for (const auto& p : patches) planes.push_back(to_tensor(p.data));
  if (planes.empty()) return torch::empty({0, 1, 0, 0});
  return torch::stack(planes);
}

torch::Tensor one_hot_mask(const ByteImage& labels) {
  auto t = torch::zeros({4, labels.rows(), labels.cols()}, torch::kFloat32);
  auto acc = t.accessor<float, 3>();
  for (int r = 0; r < labels.rows(); ++r) {
    for (int c = 0; c < labels.cols(); ++c) {
      const int l = labels(r, c);
      if (l > 3) fail(ErrorCode::LabelError, "mask label " + std::to_string(l) + " outside 0..3");
      acc[l][r][c] = 1.0f;
    }
  }
  return t;
}

Image to_image(const torch::Tensor& plane) {
  const auto p = plane.detach().to(torch::kFloat32).contiguous().squeeze();
  if (p.dim() != 2) fail(ErrorCode::ShapeMismatch, "expected a single plane");
  Image out(static_cast<int>(p.size(0)), static_cast<int>(p.size(1)));
  std::memcpy(out.values().data(), p.data_ptr<float>(), out.values().size() * sizeof(float));
  return out;
}

std::uint64_t checksum(const std::vector<torch::Tensor>& tensors) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tensors) {
    const auto c = t.detach().contiguous().cpu();
    const auto* bytes = static_cast<const unsigned char*>(c.data_ptr());
    for (std::size_t i = 0; i < c.nbytes(); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t checksum(const torch::nn::Module& module) {
  auto all = module.parameters();
  for (const auto& b : module.buffers()) all.push_back(b);
  return checksum(all);
}

}  // namespace isapad::nn
