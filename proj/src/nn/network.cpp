#include "isapad/nn/network.hpp"

#include <cmath>

#include "isapad/error.hpp"
#include "isapad/nn/tensor_utils.hpp"

namespace isapad::nn {

namespace tnn = torch::nn;
namespace F = torch::nn::functional;

namespace {

constexpr int kLayers[3] = {4, 8, 12};
constexpr int kBlockOut[3] = {256, 512, 1024};

std::vector<int64_t> dims(const torch::Tensor& t) { return t.sizes().vec(); }

void record(ShapeTrace* trace, const std::string& name, const torch::Tensor& t) {
  if (trace) trace->emplace_back(name, dims(t));
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::DualBranchNoIsam: return "dual_branch";
    case Variant::BaselinePlusIsam: return "baseline_isam";
    case Variant::FullIsapad: return "isapad";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::Baseline, Variant::DualBranchNoIsam, Variant::BaselinePlusIsam, Variant::FullIsapad}) {
    if (s == to_string(v)) return v;
  }
  fail(ErrorCode::ConfigError, "unknown variant '" + s + "' (baseline, dual_branch, baseline_isam, isapad)");
}

bool uses_isam(Variant v) { return v == Variant::BaselinePlusIsam || v == Variant::FullIsapad; }
bool is_dual(Variant v) { return v == Variant::DualBranchNoIsam || v == Variant::FullIsapad; }

void validate(const NetConfig& cfg) {
  for (double w : {cfg.width, cfg.isam_width}) {
    if (!(w > 0.0) || !std::isfinite(w)) fail(ErrorCode::ConfigError, "width multipliers must be positive");
  }
  validate(cfg.attention);
}

DenseLayerImpl::DenseLayerImpl(int in, int growth) {
  wide_ = register_module("wide", ConvBnRelu(in, 4 * growth, 3));
  narrow_ = register_module("narrow", ConvBnRelu(4 * growth, growth, 1, 1, 0));
}

torch::Tensor DenseLayerImpl::forward(const torch::Tensor& x) { return narrow_(wide_(x)); }

DenseStackImpl::DenseStackImpl(int in, int layers, int growth, int out) {
  int c = in;
  for (int i = 0; i < layers; ++i) {
    layers_.push_back(register_module("layer" + std::to_string(i + 1), DenseLayer(c, growth)));
    c += growth;
  }
  project_ = register_module("project", ConvBnRelu(c, out, 1, 1, 0));
}

torch::Tensor DenseStackImpl::forward(const torch::Tensor& x) {
  auto h = x;
  for (auto& l : layers_) h = torch::cat({h, l(h)}, 1);
  return project_(h);
}

TransitionImpl::TransitionImpl(int in, int out) { conv_ = register_module("conv", ConvBnRelu(in, out, 1, 1, 0)); }

torch::Tensor TransitionImpl::forward(const torch::Tensor& x) { return F::avg_pool2d(conv_(x), F::AvgPool2dFuncOptions(2).stride(2)); }

IsapadNetImpl::IsapadNetImpl(const NetConfig& cfg) : cfg_(cfg) {
  validate(cfg);
  const double w = cfg.width;
  const bool dual = is_dual(cfg.variant);
  if (uses_isam(cfg.variant)) isam_ = register_module("isam", IsamNet(cfg.isam_width));

  const int stem = scaled(64, w);
  const int growth = scaled(32, w);
  stem_l_ = register_module("stem_l", ConvBnRelu(1, stem, 7, 2, 3));
  if (dual) stem_g_ = register_module("stem_g", ConvBnRelu(1, stem, 7, 2, 3));

  int in = stem;
  for (int b = 0; b < 3; ++b) {
    const int out = scaled(kBlockOut[b], w);
    const int half = scaled(kBlockOut[b] / 2, w);
    const int block_in = dual ? 2 * in : in;
    const auto n = std::to_string(b + 1);
    blocks_l_.push_back(register_module("block" + n + "_l", DenseStack(block_in, kLayers[b], growth, out)));
    trans_l_.push_back(register_module("trans" + n + "_l", Transition(out, half)));
    if (dual) {
      blocks_g_.push_back(register_module("block" + n + "_g", DenseStack(block_in, kLayers[b], growth, out)));
      trans_g_.push_back(register_module("trans" + n + "_g", Transition(out, half)));
    }
    in = half;
  }
  const int head = scaled(1024, w);
  head_conv_ = register_module("head_conv", ConvBnRelu(dual ? 2 * in : in, head, 3, 2));
  fc_ = register_module("fc", tnn::Linear(head, 2));
}

ForwardOutput IsapadNetImpl::forward(const torch::Tensor& x, const ForwardOptions& opts) {
  if (x.dim() != 4 || x.size(1) != 1 || x.size(2) != 256 || x.size(3) != 256) {
    fail(ErrorCode::ShapeMismatch, "classifier expects (N, 1, 256, 256)");
  }
  ShapeTrace* trace = opts.trace;
  ForwardOutput out;

  auto local_in = x;
  if (has_isam()) {
    if (opts.isam_no_grad) {
      torch::NoGradGuard guard;
      out.seg = isam_(x);
    } else {
      out.seg = isam_(x);
    }
    record(trace, "isam", out.seg);
    local_in = apply_attention(x, foreground_map(out.seg), cfg_.attention);
  }

  const bool dual = is_dual(cfg_.variant);
  auto l = stem_l_(local_in);
  torch::Tensor g = dual ? stem_g_(x) : torch::Tensor();
  record(trace, "stem", l);
  for (std::size_t b = 0; b < blocks_l_.size(); ++b) {
    const auto n = std::to_string(b + 1);
    if (dual) {
      auto nl = blocks_l_[b](torch::cat({l, g}, 1));
      auto ng = blocks_g_[b](torch::cat({g, l}, 1));
      l = std::move(nl);
      g = std::move(ng);
    } else {
      l = blocks_l_[b](l);
    }
    record(trace, "block" + n, l);
    l = trans_l_[b](l);
    if (dual) g = trans_g_[b](g);
    record(trace, "transition" + n, l);
  }
  const auto merged = dual ? torch::cat({l, g}, 1) : l;
  record(trace, "concat", merged);
  out.head = head_conv_(merged);
  record(trace, "head_conv", out.head);
  out.features = out.head.mean({2, 3});
  record(trace, "pooled", out.features);
  out.logits = fc_(out.features);
  record(trace, "logits", out.logits);
  out.probs = torch::softmax(out.logits, 1);
  return out;
}

std::vector<torch::Tensor> IsapadNetImpl::classifier_parameters() const {
  std::vector<torch::Tensor> ps;
  for (const auto& item : named_parameters()) {
    if (item.key().rfind("isam.", 0) != 0) ps.push_back(item.value());
  }
  return ps;
}

std::vector<torch::Tensor> IsapadNetImpl::isam_parameters() const {
  return has_isam() ? isam_->parameters() : std::vector<torch::Tensor>{};
}

void IsapadNetImpl::isam_eval() {
  if (has_isam()) isam_->eval();
}

IsapadNet make_variant(Variant variant, NetConfig cfg) {
  cfg.variant = variant;
  return make_net(cfg);
}

IsapadNet make_net(const NetConfig& cfg) {
  torch::manual_seed(cfg.seed);
  return IsapadNet(cfg);
}

int64_t parameter_count(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

torch::Tensor grad_cam_from(const torch::Tensor& activations, const torch::Tensor& target) {
  const auto act = activations.detach();
  torch::Tensor grad;
  if (activations.requires_grad() && target.requires_grad()) {
    grad = torch::autograd::grad({target}, {activations}, {}, /*retain_graph=*/true, /*create_graph=*/false,
                                 /*allow_unused=*/true)[0];
  }
  if (!grad.defined()) grad = torch::zeros_like(act);
  const auto weights = grad.detach().mean({2, 3}, /*keepdim=*/true);
  auto cam = torch::relu((weights * act).sum(1)).select(0, 0);
  const double lo = cam.min().item<double>();
  const double hi = cam.max().item<double>();
  if (hi <= 0.0) return torch::zeros_like(cam);
  if (hi == lo) return torch::ones_like(cam);
  return (cam - lo) / (hi - lo);
}

CamResult grad_cam(IsapadNet& net, const Patch& patch, int target_class, CamLayer layer) {
  if (target_class != 0 && target_class != 1) {
    fail(ErrorCode::DomainError, "Grad-CAM class index must be 0 (PA) or 1 (bonafide)");
  }
  (void)layer;
  net->eval();
  torch::AutoGradMode grad_on(true);
  const auto x = to_tensor(patch.data).unsqueeze(0);
  const auto out = net->forward(x);
  const auto cam = grad_cam_from(out.head, out.logits.select(1, target_class).sum());
  const auto up = F::interpolate(cam.unsqueeze(0).unsqueeze(0),
                                 F::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{patch.data.rows(), patch.data.cols()})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
  return {to_image(cam), to_image(up.clamp(0.0, 1.0))};
}

torch::Tensor export_features(IsapadNet& net, std::span<const Patch> patches, int batch) {
  net->eval();
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> rows;
  for (std::size_t i = 0; i < patches.size(); i += static_cast<std::size_t>(batch)) {
    const auto chunk = patches.subspan(i, std::min<std::size_t>(batch, patches.size() - i));
    rows.push_back(net->forward(to_batch(chunk)).features);
  }
  if (rows.empty()) return torch::empty({0, scaled(1024, net->config().width)});
  return torch::cat(rows, 0);
}

std::vector<double> bona_probabilities(IsapadNet& net, std::span<const Patch> patches, int batch) {
  net->eval();
  torch::NoGradGuard guard;
  std::vector<double> out;
  out.reserve(patches.size());
  for (std::size_t i = 0; i < patches.size(); i += static_cast<std::size_t>(batch)) {
    const auto chunk = patches.subspan(i, std::min<std::size_t>(batch, patches.size() - i));
    const auto p = net->forward(to_batch(chunk)).probs.select(1, 1).to(torch::kFloat64).contiguous();
    out.insert(out.end(), p.data_ptr<double>(), p.data_ptr<double>() + p.numel());
  }
  return out;
}

}  // namespace isapad::nn
