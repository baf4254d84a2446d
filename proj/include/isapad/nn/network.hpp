#pragma once

#include <torch/torch.h>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isapad/image.hpp"
#include "isapad/nn/isam.hpp"
#include "isapad/patch_extract.hpp"

namespace isapad::nn {

enum class Variant { Baseline, DualBranchNoIsam, BaselinePlusIsam, FullIsapad };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
bool uses_isam(Variant v);
bool is_dual(Variant v);

struct NetConfig {
  Variant variant = Variant::FullIsapad;
  double width = 1.0;       // classifier width multiplier
  double isam_width = 1.0;  // ISAM width multiplier
  AttentionConfig attention;
  std::uint64_t seed = 0;  // initialization seed
};

void validate(const NetConfig& cfg);

/// {3x3 conv -> 4g, 1x1 conv -> g}, each with batch norm and ReLU.
class DenseLayerImpl : public torch::nn::Module {
 public:
  DenseLayerImpl(int in, int growth);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  ConvBnRelu wide_{nullptr}, narrow_{nullptr};
};
TORCH_MODULE(DenseLayer);

/// One branch of a cross-dense block: L dense layers on the concatenation
/// of own and (optionally) the other branch's features, then a 1x1
/// projection to the block's output width.
class DenseStackImpl : public torch::nn::Module {
 public:
  DenseStackImpl(int in, int layers, int growth, int out);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  std::vector<DenseLayer> layers_;
  ConvBnRelu project_{nullptr};
};
TORCH_MODULE(DenseStack);

/// 1x1 conv halving the channels, then 2x2 average pooling.
class TransitionImpl : public torch::nn::Module {
 public:
  TransitionImpl(int in, int out);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  ConvBnRelu conv_{nullptr};
};
TORCH_MODULE(Transition);

using ShapeTrace = std::vector<std::pair<std::string, std::vector<int64_t>>>;

struct ForwardOutput {
  torch::Tensor logits;    // (N, 2)
  torch::Tensor probs;     // softmax(logits); index 0 = PA, 1 = Bonafide
  torch::Tensor seg;       // (N, 4, H, W) ISAM output, undefined without ISAM
  torch::Tensor head;      // (N, C, 8, 8) head convolution activations
  torch::Tensor features;  // (N, C) pooled head activations
};

struct ForwardOptions {
  bool isam_no_grad = false;  // run ISAM outside the autograd graph
  ShapeTrace* trace = nullptr;
};

class IsapadNetImpl : public torch::nn::Module {
 public:
  explicit IsapadNetImpl(const NetConfig& cfg);

  ForwardOutput forward(const torch::Tensor& x, const ForwardOptions& opts = {});

  const NetConfig& config() const noexcept { return cfg_; }
  bool has_isam() const noexcept { return !isam_.is_empty(); }
  IsamNet& isam() { return isam_; }

  /// Every parameter outside the ISAM.
  std::vector<torch::Tensor> classifier_parameters() const;
  std::vector<torch::Tensor> isam_parameters() const;

  /// Put ISAM batch norms into running-statistics mode without touching
  /// the rest of the network.
  void isam_eval();

 private:
  NetConfig cfg_;
  IsamNet isam_{nullptr};
  ConvBnRelu stem_l_{nullptr}, stem_g_{nullptr};
  std::vector<DenseStack> blocks_l_, blocks_g_;
  std::vector<Transition> trans_l_, trans_g_;
  ConvBnRelu head_conv_{nullptr};
  torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(IsapadNet);

/// Seeds torch and builds the requested topology.
IsapadNet make_variant(Variant variant, NetConfig cfg);
IsapadNet make_net(const NetConfig& cfg);

int64_t parameter_count(const torch::nn::Module& m);

/// Grad-CAM from activations A (1, C, h, w) that are part of the graph of
/// `target`: ReLU(sum_c mean(dT/dA_c) * A_c), min-max normalized to [0, 1]
/// (all zero when the raw map is identically zero).
torch::Tensor grad_cam_from(const torch::Tensor& activations, const torch::Tensor& target);

enum class CamLayer { HeadConv };

struct CamResult {
  Image map;        // at the layer resolution, 8x8 for the head conv
  Image upsampled;  // bilinear to the patch size
};

/// Throws DomainError for a class index outside {0, 1}.
CamResult grad_cam(IsapadNet& net, const Patch& patch, int target_class, CamLayer layer = CamLayer::HeadConv);

/// Rows of pooled head activations, one per patch; inference mode.
torch::Tensor export_features(IsapadNet& net, std::span<const Patch> patches, int batch = 16);

/// P(Bonafide) per patch in inference mode.
std::vector<double> bona_probabilities(IsapadNet& net, std::span<const Patch> patches, int batch = 16);

}  // namespace isapad::nn
