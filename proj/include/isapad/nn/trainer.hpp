#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "isapad/nn/losses.hpp"
#include "isapad/nn/network.hpp"
#include "isapad/oct_core.hpp"

namespace isapad::nn {

enum class Strategy { S1, S2, S3 };
std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

enum class Phase { Pretrain, Classifier, Isam, Joint };
std::string to_string(Phase p);

struct TrainConfig {
  Strategy strategy = Strategy::S3;
  LossWeights weights;
  double lr_start = 1e-4;
  double lr_end = 1e-5;
  int batch_size = 8;
  int epochs_pretrain = 1;
  int epochs_main = 2;
  int alternation_period = 1;  // epochs per phase for S2/S3
  std::uint64_t seed = 0;
  bool horizontal_flip = false;
};

void validate(const TrainConfig& cfg);

struct TrainSample {
  torch::Tensor image;  // (1, H, W)
  Label label = Label::Bonafide;
  torch::Tensor mask;  // (4, H, W) one-hot, may be undefined for PA
};

using Dataset = std::vector<TrainSample>;

struct Batch {
  torch::Tensor images;   // (N, 1, H, W)
  torch::Tensor classes;  // (N) int64, 0 = PA, 1 = bonafide
  torch::Tensor is_bona;  // (N) bool
  torch::Tensor masks;    // (N, 4, H, W); zeros where no mask was given
};

/// Stacks the selected samples; mirrors each one horizontally when the
/// matching `flip` entry is set.
Batch make_batch(const Dataset& data, std::span<const std::size_t> indices, const std::vector<bool>& flip = {});

struct StepStats {
  double loss1 = std::numeric_limits<double>::quiet_NaN();
  double loss2 = std::numeric_limits<double>::quiet_NaN();
  double combined = std::numeric_limits<double>::quiet_NaN();
  int correct = 0;
  int count = 0;
};

struct HistoryRow {
  int epoch = 0;
  Phase phase = Phase::Classifier;
  double loss1 = std::numeric_limits<double>::quiet_NaN();
  double loss2 = std::numeric_limits<double>::quiet_NaN();
  double combined = std::numeric_limits<double>::quiet_NaN();
  double train_acc = std::numeric_limits<double>::quiet_NaN();
};

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& rows);

/// Linear interpolation from start to end over `total` steps.
class LinearLr {
 public:
  LinearLr(double start, double end, std::int64_t total) : start_(start), end_(end), total_(total) {}
  double at(std::int64_t step) const;

 private:
  double start_, end_;
  std::int64_t total_;
};

/// Bonafide-only dice training of a standalone ISAM. Throws ContractViolation
/// before any update if a sample is PA or lacks a mask.
std::vector<HistoryRow> pretrain_isam(IsamNet& isam, const Dataset& bona, const TrainConfig& cfg);

/// Per-phase optimization of an IsapadNet. Each phase owns an Adam optimizer
/// over exactly the parameters it may change, so frozen groups keep their
/// bits (moment state of another phase never leaks into them).
class Trainer {
 public:
  Trainer(IsapadNet net, TrainConfig cfg);

  /// Number of steps over which the learning rate decays.
  void set_total_steps(std::int64_t total) { lr_ = LinearLr(cfg_.lr_start, cfg_.lr_end, total); }

  /// ISAM frozen in inference mode; classifier updated with loss2.
  StepStats classifier_step(const Batch& b);
  /// Classifier untouched; ISAM updated with loss1. Bonafide-only batches.
  StepStats isam_step(const Batch& b);
  /// Everything updated with lambda1 * loss1 + lambda2 * loss2, loss1 masked
  /// to the bonafide rows. ISAM batch norm stays on running statistics so
  /// that no PA pixel enters a bonafide sample's segmentation.
  StepStats joint_step(const Batch& b);

  /// loss1 of the joint phase for a batch, still attached to the graph.
  torch::Tensor joint_loss1(const Batch& b);

  HistoryRow run_epoch(Phase phase, const Dataset& data, int epoch);

  /// Batches per epoch for a phase.
  std::int64_t steps_in(Phase phase, const Dataset& data) const;

  IsapadNet& net() { return net_; }
  std::int64_t step() const noexcept { return step_; }

 private:
  void set_lr(torch::optim::Adam& opt);
  std::vector<std::size_t> phase_indices(Phase phase, const Dataset& data) const;

  IsapadNet net_;
  TrainConfig cfg_;
  LinearLr lr_;
  std::int64_t step_ = 0;
  std::unique_ptr<torch::optim::Adam> opt_classifier_, opt_isam_, opt_all_;
};

/// Phase of main epoch `epoch` under a strategy.
Phase main_phase(Strategy s, int epoch, int period, bool has_isam);

struct TrainResult {
  std::vector<HistoryRow> history;
};

using EpochCallback = std::function<void(const HistoryRow&)>;

/// Pretraining (when the net has an ISAM), then the strategy's alternation.
/// DegenerateDataset if the data lacks either class.
TrainResult run_training(IsapadNet& net, const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace isapad::nn
