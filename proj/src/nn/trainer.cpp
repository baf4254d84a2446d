#include "isapad/nn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "isapad/error.hpp"

namespace isapad::nn {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 epoch_rng(std::uint64_t seed, Phase phase, int epoch) {
  return std::mt19937_64(mix(seed ^ mix(static_cast<std::uint64_t>(phase) * 1000003ULL + static_cast<std::uint64_t>(epoch))));
}

std::int64_t batches(std::size_t n, int batch_size) {
  return static_cast<std::int64_t>((n + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size));
}

/// Shuffled index order plus per-sample flip flags for one epoch.
struct EpochPlan {
  std::vector<std::size_t> order;
  std::vector<bool> flip;
};

EpochPlan plan_epoch(std::vector<std::size_t> indices, std::mt19937_64& rng, bool flip) {
  std::shuffle(indices.begin(), indices.end(), rng);
  std::vector<bool> flags(indices.size(), false);
  if (flip) {
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = coin(rng);
  }
  return {std::move(indices), std::move(flags)};
}

/// Sample-weighted running means over an epoch.
struct Accumulator {
  double l1 = 0, l2 = 0, comb = 0;
  std::int64_t n1 = 0, n2 = 0, nc = 0;
  int correct = 0, count = 0;

  void add(const StepStats& s) {
    if (!std::isnan(s.loss1)) l1 += s.loss1 * s.count, n1 += s.count;
    if (!std::isnan(s.loss2)) l2 += s.loss2 * s.count, n2 += s.count;
    if (!std::isnan(s.combined)) comb += s.combined * s.count, nc += s.count;
    correct += s.correct;
    count += s.count;
  }

  HistoryRow row(int epoch, Phase phase, bool has_acc) const {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    HistoryRow r{epoch, phase, n1 ? l1 / n1 : nan, n2 ? l2 / n2 : nan, nc ? comb / nc : nan, nan};
    if (has_acc && count > 0) r.train_acc = static_cast<double>(correct) / count;
    return r;
  }
};

int correct_count(const torch::Tensor& logits, const torch::Tensor& classes) {
  return static_cast<int>((logits.argmax(1) == classes).sum().item<int64_t>());
}

void require_masked_bona(const Batch& b) {
  if (!b.is_bona.all().item<bool>()) fail(ErrorCode::ContractViolation, "ISAM update received a PA sample");
}

void require_masks(const Dataset& data, bool bona_only) {
  for (const auto& s : data) {
    if (bona_only && s.label != Label::Bonafide) {
      fail(ErrorCode::ContractViolation, "ISAM pretraining received a PA sample");
    }
    if (s.label == Label::Bonafide && !s.mask.defined()) {
      fail(ErrorCode::ContractViolation, "bonafide sample without a segmentation mask");
    }
  }
}

void set_group_lr(torch::optim::Adam& opt, double lr) {
  for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
}

std::unique_ptr<torch::optim::Adam> adam(const std::vector<torch::Tensor>& params, double lr) {
  if (params.empty()) return nullptr;
  return std::make_unique<torch::optim::Adam>(params, torch::optim::AdamOptions(lr));
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::S1: return "S1";
    case Strategy::S2: return "S2";
    case Strategy::S3: return "S3";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "S1" || s == "s1") return Strategy::S1;
  if (s == "S2" || s == "s2") return Strategy::S2;
  if (s == "S3" || s == "s3") return Strategy::S3;
  fail(ErrorCode::ConfigError, "unknown strategy '" + s + "' (S1, S2, S3)");
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Pretrain: return "pretrain";
    case Phase::Classifier: return "classifier";
    case Phase::Isam: return "isam";
    case Phase::Joint: return "joint";
  }
  return "?";
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.weights.lambda1 >= 0.0) || !(cfg.weights.lambda2 >= 0.0)) {
    fail(ErrorCode::ConfigError, "loss weights must be >= 0");
  }
  if (!(cfg.lr_end > 0.0) || !(cfg.lr_start >= cfg.lr_end)) fail(ErrorCode::ConfigError, "need lr_start >= lr_end > 0");
  if (cfg.alternation_period < 1) fail(ErrorCode::ConfigError, "alternation_period must be >= 1");
  if (cfg.batch_size < 1) fail(ErrorCode::ConfigError, "batch_size must be >= 1");
  if (cfg.epochs_pretrain < 0 || cfg.epochs_main < 0) fail(ErrorCode::ConfigError, "epoch counts must be >= 0");
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices, const std::vector<bool>& flip) {
  std::vector<torch::Tensor> images, masks;
  std::vector<int64_t> classes;
  std::vector<uint8_t> bona;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& s = data.at(indices[k]);
    const bool f = k < flip.size() && flip[k];
    auto img = f ? s.image.flip({-1}) : s.image;
    images.push_back(img);
    torch::Tensor m = s.mask.defined() ? s.mask : torch::zeros({4, img.size(1), img.size(2)});
    masks.push_back(f ? m.flip({-1}) : m);
    classes.push_back(class_index(s.label));
    bona.push_back(s.label == Label::Bonafide);
  }
  Batch b;
  b.images = torch::stack(images);
  b.masks = torch::stack(masks);
  b.classes = torch::tensor(classes, torch::kInt64);
  b.is_bona = torch::tensor(std::vector<int64_t>(bona.begin(), bona.end()), torch::kInt64).to(torch::kBool);
  return b;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& rows) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "epoch,phase,loss1,loss2,combined,train_acc\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << to_string(r.phase) << ',' << fmt(r.loss1) << ',' << fmt(r.loss2) << ','
        << fmt(r.combined) << ',' << fmt(r.train_acc) << '\n';
  }
}

double LinearLr::at(std::int64_t step) const {
  if (total_ <= 1) return start_;
  const double t = static_cast<double>(std::clamp<std::int64_t>(step, 0, total_ - 1)) / static_cast<double>(total_ - 1);
  return start_ + (end_ - start_) * t;
}

std::vector<HistoryRow> pretrain_isam(IsamNet& isam, const Dataset& bona, const TrainConfig& cfg) {
  validate(cfg);
  require_masks(bona, true);
  std::vector<HistoryRow> history;
  if (cfg.epochs_pretrain == 0 || bona.empty()) return history;

  torch::optim::Adam opt(isam->parameters(), torch::optim::AdamOptions(cfg.lr_start));
  const LinearLr lr(cfg.lr_start, cfg.lr_end, cfg.epochs_pretrain * batches(bona.size(), cfg.batch_size));
  std::vector<std::size_t> all(bona.size());
  std::iota(all.begin(), all.end(), 0);
  std::int64_t step = 0;
  isam->train();
  for (int e = 0; e < cfg.epochs_pretrain; ++e) {
    auto rng = epoch_rng(cfg.seed, Phase::Pretrain, e);
    const auto plan = plan_epoch(all, rng, cfg.horizontal_flip);
    Accumulator acc;
    for (std::size_t i = 0; i < plan.order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, plan.order.size() - i);
      const std::vector<bool> flips(plan.flip.begin() + i, plan.flip.begin() + i + n);
      const auto b = make_batch(bona, std::span(plan.order).subspan(i, n), flips);
      set_group_lr(opt, lr.at(step++));
      const auto loss1 = dice_loss(isam->forward(b.images), b.masks);
      opt.zero_grad();
      loss1.backward();
      opt.step();
      StepStats s;
      s.loss1 = loss1.item<double>();
      s.combined = cfg.weights.lambda1 * s.loss1;
      s.count = static_cast<int>(n);
      acc.add(s);
    }
    history.push_back(acc.row(e, Phase::Pretrain, false));
  }
  return history;
}

Trainer::Trainer(IsapadNet net, TrainConfig cfg) : net_(std::move(net)), cfg_(cfg), lr_(cfg.lr_start, cfg.lr_end, 1) {
  validate(cfg_);
  opt_classifier_ = adam(net_->classifier_parameters(), cfg_.lr_start);
  opt_isam_ = adam(net_->isam_parameters(), cfg_.lr_start);
  opt_all_ = adam(net_->parameters(), cfg_.lr_start);
}

void Trainer::set_lr(torch::optim::Adam& opt) { set_group_lr(opt, lr_.at(step_++)); }

StepStats Trainer::classifier_step(const Batch& b) {
  net_->train();
  net_->isam_eval();
  set_lr(*opt_classifier_);
  const auto out = net_->forward(b.images, {.isam_no_grad = true});
  const auto loss2 = ce_loss(out.logits, b.classes);
  opt_classifier_->zero_grad();
  loss2.backward();
  opt_classifier_->step();
  StepStats s;
  s.loss2 = loss2.item<double>();
  s.combined = cfg_.weights.lambda2 * s.loss2;
  s.correct = correct_count(out.logits.detach(), b.classes);
  s.count = static_cast<int>(b.classes.size(0));
  return s;
}

StepStats Trainer::isam_step(const Batch& b) {
  if (!net_->has_isam()) fail(ErrorCode::ContractViolation, "network has no ISAM to update");
  require_masked_bona(b);
  auto& isam = net_->isam();
  isam->train();
  set_lr(*opt_isam_);
  const auto loss1 = dice_loss(isam->forward(b.images), b.masks);
  opt_isam_->zero_grad();
  loss1.backward();
  opt_isam_->step();
  StepStats s;
  s.loss1 = loss1.item<double>();
  s.combined = cfg_.weights.lambda1 * s.loss1;
  s.count = static_cast<int>(b.classes.size(0));
  return s;
}

torch::Tensor Trainer::joint_loss1(const Batch& b) {
  net_->train();
  net_->isam_eval();
  if (!net_->has_isam()) return torch::zeros({});
  return masked_dice_loss(net_->isam()->forward(b.images), b.masks, b.is_bona);
}

StepStats Trainer::joint_step(const Batch& b) {
  net_->train();
  net_->isam_eval();
  set_lr(*opt_all_);
  const auto out = net_->forward(b.images);
  const auto loss1 = out.seg.defined() ? masked_dice_loss(out.seg, b.masks, b.is_bona) : torch::zeros({});
  const auto loss2 = ce_loss(out.logits, b.classes);
  const auto total = combined_loss(loss1, loss2, cfg_.weights);
  opt_all_->zero_grad();
  total.backward();
  opt_all_->step();
  StepStats s;
  if (out.seg.defined()) s.loss1 = loss1.item<double>();
  s.loss2 = loss2.item<double>();
  s.combined = total.item<double>();
  s.correct = correct_count(out.logits.detach(), b.classes);
  s.count = static_cast<int>(b.classes.size(0));
  return s;
}

std::vector<std::size_t> Trainer::phase_indices(Phase phase, const Dataset& data) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (phase != Phase::Isam || data[i].label == Label::Bonafide) idx.push_back(i);
  }
  return idx;
}

std::int64_t Trainer::steps_in(Phase phase, const Dataset& data) const {
  return batches(phase_indices(phase, data).size(), cfg_.batch_size);
}

HistoryRow Trainer::run_epoch(Phase phase, const Dataset& data, int epoch) {
  auto rng = epoch_rng(cfg_.seed, phase, epoch);
  const auto plan = plan_epoch(phase_indices(phase, data), rng, cfg_.horizontal_flip);
  Accumulator acc;
  for (std::size_t i = 0; i < plan.order.size(); i += static_cast<std::size_t>(cfg_.batch_size)) {
    const std::size_t n = std::min<std::size_t>(cfg_.batch_size, plan.order.size() - i);
    const std::vector<bool> flips(plan.flip.begin() + i, plan.flip.begin() + i + n);
    const auto b = make_batch(data, std::span(plan.order).subspan(i, n), flips);
    switch (phase) {
      case Phase::Classifier: acc.add(classifier_step(b)); break;
      case Phase::Isam: acc.add(isam_step(b)); break;
      case Phase::Joint: acc.add(joint_step(b)); break;
      case Phase::Pretrain: fail(ErrorCode::ContractViolation, "pretraining runs through pretrain_isam");
    }
  }
  return acc.row(epoch, phase, phase != Phase::Isam);
}

Phase main_phase(Strategy s, int epoch, int period, bool has_isam) {
  if (!has_isam || s == Strategy::S1) return Phase::Classifier;
  const bool second = (epoch / period) % 2 == 1;
  if (!second) return Phase::Classifier;
  return s == Strategy::S2 ? Phase::Isam : Phase::Joint;
}

TrainResult run_training(IsapadNet& net, const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate(cfg);
  const bool any_bona = std::any_of(data.begin(), data.end(), [](const auto& s) { return s.label == Label::Bonafide; });
  const bool any_pa = std::any_of(data.begin(), data.end(), [](const auto& s) { return s.label == Label::PA; });
  if (!any_bona || !any_pa) fail(ErrorCode::DegenerateDataset, "training data must contain both bonafide and PA patches");
  if (net->has_isam()) require_masks(data, false);

  TrainResult result;
  torch::manual_seed(cfg.seed);
  if (net->has_isam() && cfg.epochs_pretrain > 0) {
    Dataset bona;
    for (const auto& s : data) {
      if (s.label == Label::Bonafide) bona.push_back(s);
    }
    for (auto& r : pretrain_isam(net->isam(), bona, cfg)) {
      if (on_epoch) on_epoch(r);
      result.history.push_back(r);
    }
  }

  Trainer trainer(net, cfg);
  std::int64_t total = 0;
  for (int e = 0; e < cfg.epochs_main; ++e) {
    total += trainer.steps_in(main_phase(cfg.strategy, e, cfg.alternation_period, net->has_isam()), data);
  }
  trainer.set_total_steps(total);
  for (int e = 0; e < cfg.epochs_main; ++e) {
    const auto r = trainer.run_epoch(main_phase(cfg.strategy, e, cfg.alternation_period, net->has_isam()), data, e);
    if (on_epoch) on_epoch(r);
    result.history.push_back(r);
  }
  net->eval();
  return result;
}

}  // namespace isapad::nn
