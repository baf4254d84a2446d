// Prints one PASS/FAIL line per acceptance criterion and exits nonzero when a
// gating criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "isapad/cli/commands.hpp"
#include "isapad/metrics.hpp"
#include "isapad/nn/losses.hpp"
#include "isapad/nn/network.hpp"
#include "isapad/nn/tensor_utils.hpp"
#include "isapad/nn/trainer.hpp"
#include "isapad/patch_extract.hpp"
#include "isapad/phantom.hpp"
#include "isapad/scoring.hpp"
#include "nn_fixtures.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace isapad;
using namespace isapad::nn;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1 ---------------------------------------------------------------------

Verdict table_shapes() {
  Verdict v;
  NetConfig cfg;
  cfg.variant = Variant::FullIsapad;
  auto net = make_net(cfg);
  net->eval();
  torch::NoGradGuard no_grad;
  ShapeTrace trace;
  ForwardOptions opts;
  opts.trace = &trace;
  const auto t0 = Clock::now();
  net->forward(torch::rand({1, 1, 256, 256}), opts);
  const double elapsed = seconds_since(t0);

  const ShapeTrace want{{"isam", {1, 4, 256, 256}},        {"stem", {1, 64, 128, 128}},
                        {"block1", {1, 256, 128, 128}},    {"transition1", {1, 128, 64, 64}},
                        {"block2", {1, 512, 64, 64}},      {"transition2", {1, 256, 32, 32}},
                        {"block3", {1, 1024, 32, 32}},     {"transition3", {1, 512, 16, 16}},
                        {"concat", {1, 1024, 16, 16}},     {"head_conv", {1, 1024, 8, 8}},
                        {"pooled", {1, 1024}},             {"logits", {1, 2}}};
  v.require(trace == want, "traced shapes differ");
  v.require(elapsed < 30.0, "forward took " + fmt("%.1f", elapsed) + " s");
  if (v.pass) v.detail = std::to_string(trace.size()) + " shapes exact, forward " + fmt("%.2f", elapsed) + " s";
  return v;
}

// 2 ---------------------------------------------------------------------

Verdict attention_identities() {
  Verdict v;
  torch::manual_seed(2);
  const AttentionConfig cfg;
  double worst_half = 0, worst_lin = 0;
  for (int i = 0; i < 20; ++i) {
    const auto x = torch::rand({2, 1, 32, 32});
    v.require(torch::equal(apply_attention(x, torch::ones_like(x), cfg), x), "S=1 not bit-exact");
    worst_half = std::max(worst_half, (apply_attention(x, torch::zeros_like(x), cfg) - 0.5 * x).abs().max().item<double>());
    const auto s = torch::rand_like(x);
    const double a = 0.5 + 1.5 * torch::rand({}).item<double>();
    worst_lin = std::max(
        worst_lin, (apply_attention(a * x, s, cfg) - a * apply_attention(x, s, cfg)).abs().max().item<double>());
  }
  v.require(worst_half <= 1e-7, "S=0 deviation " + fmt("%.3g", worst_half));
  v.require(worst_lin <= 1e-6, "linearity deviation " + fmt("%.3g", worst_lin));
  if (v.pass) v.detail = "S=0 max dev " + fmt("%.2g", worst_half) + ", linearity max dev " + fmt("%.2g", worst_lin);
  return v;
}

// 3 ---------------------------------------------------------------------

Verdict loss_cases() {
  Verdict v;
  torch::manual_seed(3);
  const auto labels = torch::randint(0, 4, {16, 16});
  const auto onehot = torch::one_hot(labels, 4).permute({2, 0, 1}).to(torch::kFloat32);
  const double same = dice_loss(onehot, onehot).item<double>();
  v.require(same <= 2e-6, "dice(x,x) = " + fmt("%.3g", same));

  auto a = torch::zeros({1, 8, 8});
  auto b = torch::zeros({1, 8, 8});
  a.slice(1, 0, 4).fill_(1);
  b.slice(1, 4, 8).fill_(1);
  const double disjoint = dice_loss(a, b).item<double>();
  v.require(disjoint >= 1 - 1e-5, "dice disjoint = " + fmt("%.9g", disjoint));

  const double ce = ce_loss(torch::zeros({1, 2}, torch::kFloat64), torch::ones({1}, torch::kInt64)).item<double>();
  v.require(std::abs(ce - std::log(2.0)) <= 1e-6, "uniform CE = " + fmt("%.9g", ce));

  const double comb = combined_loss(0.4, 0.7, LossWeights{});
  v.require(std::abs(comb - 0.7004) <= 1e-9, "combined = " + fmt("%.12g", comb));

  const auto logits = torch::randn({6, 2}, torch::kFloat64);
  const auto cls = torch::randint(0, 2, {6}, torch::kInt64);
  const double shift =
      std::abs(ce_loss(logits + 7.25, cls).item<double>() - ce_loss(logits, cls).item<double>());
  v.require(shift <= 1e-9, "shift changed CE by " + fmt("%.3g", shift));
  if (v.pass) v.detail = "dice(x,x) " + fmt("%.2g", same) + ", CE uniform " + fmt("%.9f", ce);
  return v;
}

// 4 ---------------------------------------------------------------------

torch::Tensor numeric_grad(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x) {
  const double h = 1e-6;
  auto g = torch::zeros_like(x);
  auto flat = x.flatten();
  auto gflat = g.flatten();
  for (int64_t i = 0; i < flat.numel(); ++i) {
    auto plus = flat.clone(), minus = flat.clone();
    plus[i] += h;
    minus[i] -= h;
    gflat[i] = (f(plus.view_as(x)).item<double>() - f(minus.view_as(x)).item<double>()) / (2 * h);
  }
  return g;
}

double relative_error(const torch::Tensor& a, const torch::Tensor& b) {
  const double denom = std::max({a.norm().item<double>(), b.norm().item<double>(), 1e-12});
  return (a - b).norm().item<double>() / denom;
}

Verdict gradient_checks() {
  Verdict v;
  torch::manual_seed(4);
  double worst_dice = 0, worst_ce = 0;
  for (int i = 0; i < 5; ++i) {
    const auto labels = torch::randint(0, 3, {2, 5, 5});
    const auto gt = torch::one_hot(labels, 3).permute({0, 3, 1, 2}).to(torch::kFloat64);
    auto z = torch::randn({2, 3, 5, 5}, torch::kFloat64).requires_grad_();
    auto dice = [&](const torch::Tensor& t) { return dice_loss(torch::sigmoid(t), gt); };
    dice(z).backward();
    worst_dice = std::max(worst_dice, relative_error(z.grad(), numeric_grad(dice, z.detach())));

    auto logits = torch::randn({4, 2}, torch::kFloat64).requires_grad_();
    const auto cls = torch::randint(0, 2, {4}, torch::kInt64);
    auto ce = [&](const torch::Tensor& t) { return ce_loss(t, cls); };
    ce(logits).backward();
    worst_ce = std::max(worst_ce, relative_error(logits.grad(), numeric_grad(ce, logits.detach())));
  }
  v.require(worst_dice < 1e-3, "dice rel err " + fmt("%.3g", worst_dice));
  v.require(worst_ce < 1e-3, "CE rel err " + fmt("%.3g", worst_ce));
  if (v.pass) v.detail = "max rel err dice " + fmt("%.2g", worst_dice) + ", CE " + fmt("%.2g", worst_ce);
  return v;
}

// 5 ---------------------------------------------------------------------

Image random_image(int rows, int cols, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(rows, cols);
  for (auto& x : img.values()) x = u(rng);
  return img;
}

ScoreSet random_set(std::mt19937& rng, int max_items, bool coarse) {
  std::uniform_int_distribution<int> size(1, max_items);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> grid(0, 10);
  ScoreSet s;
  const int nb = size(rng), np = size(rng);
  for (int i = 0; i < nb; ++i) s.bona_scores.push_back(coarse ? grid(rng) / 10.0 : u(rng));
  for (int i = 0; i < np; ++i) s.pa_scores.push_back(coarse ? grid(rng) / 10.0 : u(rng) * 0.8);
  return s;
}

Verdict oracle_equivalence() {
  Verdict v;
  std::mt19937 rng(5);
  int otsu_bad = 0, dilate_bad = 0, scheme_bad = 0, metric_bad = 0;
  for (int i = 0; i < 100; ++i) {
    const Image img = random_image(16 + i % 40, 16 + (i * 7) % 50, rng);
    otsu_bad += otsu(img) != oracle::otsu(img);
  }
  for (int i = 0; i < 20; ++i) {
    const Image img = random_image(5 + i * 3, 40 - i, rng);
    dilate_bad += !(dilate(img) == oracle::dilate(img));
  }
  for (std::uint64_t k = 0; k < 5; ++k) {
    phantom::PhantomConfig cfg;
    cfg.bscans = 2;
    cfg.seed = 500 + k;
    const OctVolume vol = k % 2 ? phantom::gen_pa(cfg, static_cast<phantom::PaKind>(k % 3))
                                : phantom::gen_bonafide(cfg).volume;
    for (int y = 0; y < 2; ++y) {
      const BScan b = get_bscan(vol, y);
      std::vector<oracle::Center> got;
      for (const auto& p : extract_patches(b, {})) got.push_back({p.x, p.z});
      scheme_bad += got != oracle::scheme_centers(b.data);
    }
  }
  for (int i = 0; i < 50; ++i) {
    const ScoreSet s = random_set(rng, 64, i % 2 == 1);
    const EerResult got = eer(s), want = oracle::eer(s);
    const bool ok = got.eer == want.eer && got.threshold == want.threshold && auc(s) == oracle::auc(s) &&
                    hter(s, got.threshold) == oracle::hter(s, got.threshold) && hter(s, 0.5) == oracle::hter(s, 0.5);
    metric_bad += !ok;
  }
  v.require(otsu_bad == 0, std::to_string(otsu_bad) + "/100 Otsu mismatches");
  v.require(dilate_bad == 0, std::to_string(dilate_bad) + "/20 dilation mismatches");
  v.require(scheme_bad == 0, std::to_string(scheme_bad) + "/10 patch-center mismatches");
  v.require(metric_bad == 0, std::to_string(metric_bad) + "/50 metric mismatches");
  if (v.pass) v.detail = "Otsu 100, dilation 20, patch centers 10 B-scans, metrics 50 sets: all exact";
  return v;
}

// 6 ---------------------------------------------------------------------

NetConfig tiny_net() {
  NetConfig cfg;
  cfg.variant = Variant::FullIsapad;
  cfg.width = 0.0625;
  cfg.isam_width = 0.125;
  return cfg;
}

TrainConfig quick_train(Strategy s) {
  TrainConfig cfg;
  cfg.strategy = s;
  cfg.batch_size = 4;
  cfg.epochs_pretrain = 1;
  cfg.epochs_main = 2;
  return cfg;
}

std::vector<torch::Tensor> classifier_state(IsapadNet& net) {
  std::vector<torch::Tensor> out;
  for (const auto& p : net->named_parameters())
    if (p.key().rfind("isam.", 0) != 0) out.push_back(p.value());
  for (const auto& b : net->named_buffers())
    if (b.key().rfind("isam.", 0) != 0) out.push_back(b.value());
  return out;
}

Batch batch_of(const Dataset& d, std::vector<std::size_t> idx) { return make_batch(d, idx); }

Verdict strategy_contracts() {
  Verdict v;
  const auto data = isapad::testing::phantom_dataset(4, 4, 600);
  const auto mixed = batch_of(data, {0, 1, 4, 5});
  const auto bona = batch_of(data, {0, 1, 2, 3});
  const auto pa = batch_of(data, {4, 5, 6, 7});

  {
    auto net = make_net(tiny_net());
    std::uint64_t after_pretrain = 0;
    run_training(net, data, quick_train(Strategy::S1), [&](const HistoryRow& r) {
      if (r.phase == Phase::Pretrain) after_pretrain = checksum(*net->isam());
    });
    v.require(after_pretrain != 0 && checksum(*net->isam()) == after_pretrain, "S1 changed the ISAM");
  }

  for (Strategy s : {Strategy::S2, Strategy::S3}) {
    auto net = make_net(tiny_net());
    Trainer trainer(net, quick_train(s));
    trainer.set_total_steps(4);
    const auto isam_sum = checksum(*net->isam());
    trainer.classifier_step(mixed);
    v.require(checksum(*net->isam()) == isam_sum, to_string(s) + " classifier phase changed the ISAM");
    if (s == Strategy::S2) {
      const auto cls_sum = checksum(classifier_state(net));
      trainer.isam_step(bona);
      v.require(checksum(classifier_state(net)) == cls_sum, "S2 ISAM phase changed the classifier");
      v.require(checksum(*net->isam()) != isam_sum, "S2 ISAM phase left the ISAM unchanged");
    } else {
      const auto cls_sum = checksum(classifier_state(net));
      trainer.joint_step(mixed);
      v.require(checksum(classifier_state(net)) != cls_sum && checksum(*net->isam()) != isam_sum,
                "S3 joint phase froze a group");
    }
  }

  {
    auto net = make_net(tiny_net());
    Trainer trainer(net, quick_train(Strategy::S3));
    net->zero_grad();
    auto loss1 = trainer.joint_loss1(pa);
    v.require(loss1.item<double>() == 0.0, "loss1 nonzero on a PA-only batch");
    // A constant zero carries no graph.
    if (loss1.requires_grad()) loss1.backward();
    bool any = false;
    for (const auto& p : net->isam_parameters())
      if (p.grad().defined() && p.grad().abs().sum().item<double>() != 0) any = true;
    v.require(!any, "PA-only loss1 produced an ISAM gradient");
  }

  {
    auto net = make_net(tiny_net());
    Trainer trainer(net, quick_train(Strategy::S3));
    trainer.set_total_steps(10);
    std::vector<std::pair<std::string, torch::Tensor>> params;
    for (const auto& p : net->named_parameters()) params.emplace_back(p.key(), p.value());
    std::vector<bool> seen(params.size(), false);
    std::mt19937_64 rng(6);
    for (int step = 0; step < 10; ++step) {
      std::vector<std::size_t> b{0, 1, 2, 3}, p{4, 5, 6, 7};
      std::shuffle(b.begin(), b.end(), rng);
      std::shuffle(p.begin(), p.end(), rng);
      trainer.joint_step(batch_of(data, {b[0], b[1], p[0], p[1]}));
      for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& g = params[i].second.grad();
        if (g.defined() && g.abs().sum().item<double>() > 0) seen[i] = true;
      }
    }
    int dead = 0;
    std::string first;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!seen[i] && dead++ == 0) first = params[i].first;
    }
    v.require(dead == 0, std::to_string(dead) + " dead parameters, first " + first);
  }
  if (v.pass) v.detail = "S1 ISAM checksum kept, S2/S3 frozen groups bit-identical, PA-only loss1 = 0, no dead branch";
  return v;
}

// 7, 8, 9 -----------------------------------------------------------------

struct Outcome {
  int status;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "isapad");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, err.str()};
}

void must(const Outcome& o, const std::string& step) {
  if (o.status != 0) throw std::runtime_error(step + " failed: " + o.err);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The documented end-to-end budget: 40 + 40 phantom volumes of 16 B-scans,
// the first 30 of each class for training and the last 10 held out.
std::string smoke_config(std::uint64_t seed, const std::string& variant) {
  std::ostringstream j;
  j << R"({"seed": )" << seed << R"(,
    "corpus": {"n_bona": 40, "n_pa": 40, "subjects": 40, "materials": 6},
    "model": {"variant": ")" << variant << R"(", "width": 0.125, "isam_width": 0.25},
    "train": {"strategy": "S3", "batch_size": 16, "epochs_pretrain": 2, "epochs_main": 8,
              "max_patches_per_class": 64, "horizontal_flip": true},
    "score": {"n_instance": 2, "m_bscans": 8}})";
  return j.str();
}

struct SmokeRun {
  double isapad_eer = 1, baseline_eer = 1;
  double minutes = 0;  // corpus, extraction and the isapad model only
};

SmokeRun smoke(std::uint64_t seed, bool with_baseline) {
  const auto t0 = Clock::now();
  isapad::testing::TempDir dir("isapad_accept");
  const auto root = dir.path();
  std::ofstream(root / "isapad.json") << smoke_config(seed, "isapad");
  std::ofstream(root / "baseline.json") << smoke_config(seed, "baseline");
  const auto cfg = (root / "isapad.json").string();

  must(cli({"synth", "--config", cfg, "--out", (root / "corpus").string()}), "synth");
  const auto all = load_manifest(root / "corpus/manifest.json");
  Manifest train, test;
  std::map<Label, int> seen;
  for (const auto& e : all.entries) (seen[e.meta.label]++ < 30 ? train : test).entries.push_back(e);
  save_manifest(train, root / "corpus/train.json");
  save_manifest(test, root / "corpus/test.json");
  must(cli({"extract", "--config", cfg, "--manifest", (root / "corpus/train.json").string(), "--out",
            (root / "patches").string()}),
       "extract");

  auto run_variant = [&](const std::string& name) {
    const auto c = (root / (name + ".json")).string();
    const auto ckpt = (root / (name + ".ckpt")).string();
    const auto scores = (root / (name + ".csv")).string();
    must(cli({"train", "--config", c, "--patches", (root / "patches").string(), "--out", ckpt}), "train " + name);
    must(cli({"score", "--config", c, "--ckpt", ckpt, "--manifest", (root / "corpus/test.json").string(), "--out",
              scores}),
         "score " + name);
    return eer(to_score_set(read_scores_csv(scores))).eer;
  };

  SmokeRun r;
  r.isapad_eer = run_variant("isapad");
  r.minutes = seconds_since(t0) / 60.0;
  if (with_baseline) r.baseline_eer = run_variant("baseline");
  return r;
}

struct SmokeSummary {
  std::vector<SmokeRun> runs;
  std::string error;
};

const SmokeSummary& smoke_runs(bool with_baseline) {
  static SmokeSummary summary;
  static bool done = false;
  if (done) return summary;
  done = true;
  try {
    for (std::uint64_t seed : {1, 2, 3}) {
      summary.runs.push_back(smoke(seed, with_baseline));
      const auto& r = summary.runs.back();
      std::cout << "  seed " << seed << ": isapad EER " << fmt("%.3f", r.isapad_eer);
      if (with_baseline) std::cout << ", baseline EER " << fmt("%.3f", r.baseline_eer);
      std::cout << " (" << fmt("%.1f", r.minutes) << " min)" << std::endl;
    }
  } catch (const std::exception& e) {
    summary.error = e.what();
  }
  return summary;
}

bool want_baseline = true;

Verdict end_to_end() {
  Verdict v;
  const auto& s = smoke_runs(want_baseline);
  if (!s.error.empty()) {
    v.require(false, s.error);
    return v;
  }
  int good = 0;
  double minutes = 0;
  std::string eers;
  for (const auto& r : s.runs) {
    good += r.isapad_eer <= 0.10;
    minutes += r.minutes;
    eers += (eers.empty() ? "" : ", ") + fmt("%.3f", r.isapad_eer);
  }
  v.require(good >= 2, "instance EER <= 0.10 in only " + std::to_string(good) + "/3 seeds (" + eers + ")");
  v.require(minutes <= 30.0, "took " + fmt("%.1f", minutes) + " min");
  v.detail = v.pass ? "instance EER " + eers + " over 3 seeds, " + fmt("%.1f", minutes) + " min" : v.detail;
  return v;
}

Verdict ablation() {
  Verdict v;
  const auto& s = smoke_runs(true);
  if (!s.error.empty()) {
    v.require(false, s.error);
    return v;
  }
  int wins = 0;
  std::string pairs;
  for (const auto& r : s.runs) {
    wins += r.isapad_eer <= r.baseline_eer;
    pairs += (pairs.empty() ? "" : ", ") + fmt("%.3f", r.isapad_eer) + "/" + fmt("%.3f", r.baseline_eer);
  }
  v.require(wins >= 2, "isapad <= baseline in " + std::to_string(wins) + "/3 seeds");
  v.detail = (v.pass ? std::string() : v.detail + "; ") + "isapad/baseline EER " + pairs;
  return v;
}

Verdict determinism() {
  Verdict v;
  isapad::testing::TempDir dir("isapad_determinism");
  const auto root = dir.path();
  std::ofstream(root / "cfg.json") << R"({"seed": 9, "phantom": {"bscans": 2, "width": 384},
    "corpus": {"n_bona": 3, "n_pa": 3},
    "model": {"variant": "isapad", "width": 0.0625, "isam_width": 0.125},
    "train": {"batch_size": 8, "epochs_pretrain": 1, "epochs_main": 2, "max_patches_per_class": 8,
              "horizontal_flip": true},
    "score": {"n_bscan": 2, "n_instance": 1, "m_bscans": 2}})";
  const auto cfg = (root / "cfg.json").string();
  try {
    std::string outputs[2][2];
    for (int run = 0; run < 2; ++run) {
      const auto r = root / ("run" + std::to_string(run));
      must(cli({"synth", "--config", cfg, "--out", (r / "corpus").string()}), "synth");
      must(cli({"extract", "--config", cfg, "--manifest", (r / "corpus/manifest.json").string(), "--out",
                (r / "patches").string()}),
           "extract");
      must(cli({"train", "--config", cfg, "--patches", (r / "patches").string(), "--out", (r / "m.ckpt").string()}),
           "train");
      int k = 0;
      for (const char* level : {"instance", "bscan"}) {
        const auto out = r / (std::string(level) + ".csv");
        must(cli({"score", "--config", cfg, "--ckpt", (r / "m.ckpt").string(), "--manifest",
                  (r / "corpus/manifest.json").string(), "--level", level, "--out", out.string()}),
             "score");
        outputs[run][k++] = slurp(out);
      }
    }
    v.require(!outputs[0][0].empty() && outputs[0][0] == outputs[1][0], "instance scores.csv differs");
    v.require(!outputs[0][1].empty() && outputs[0][1] == outputs[1][1], "B-scan scores.csv differs");
  } catch (const std::exception& e) {
    v.require(false, e.what());
  }
  if (v.pass) v.detail = "synth, extract, train and score rerun twice: instance and B-scan scores.csv byte-identical";
  return v;
}

struct Criterion {
  int id;
  const char* name;
  bool gating;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  want_baseline = only.empty() || only.count(8);

  const std::vector<Criterion> criteria{
      {1, "shape_conformance", true, table_shapes},   {2, "attention_identities", true, attention_identities},
      {3, "loss_analytic_cases", true, loss_cases},   {4, "gradient_checks", true, gradient_checks},
      {5, "oracle_equivalence", true, oracle_equivalence}, {6, "strategy_contracts", true, strategy_contracts},
      {7, "end_to_end_synthetic", true, end_to_end},  {8, "ablation_sanity", false, ablation},
      {9, "determinism", true, determinism},
  };

  bool ok = true;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << (c.gating ? "" : " (non-gating)")
              << ": " << v.detail << std::endl;
    if (c.gating && !v.pass) ok = false;
  }
  return ok ? 0 : 1;
}
