#include "isapad/cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "isapad/error.hpp"
#include "isapad/metrics.hpp"
#include "isapad/nn/checkpoint.hpp"
#include "isapad/nn/tensor_utils.hpp"
#include "isapad/png_io.hpp"

namespace isapad::cli {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string numbered(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", prefix, i);
  return buf;
}

fs::path volume_path(const fs::path& dir, const std::string& id, VolumeFormat format) {
  return dir / (format == VolumeFormat::PngStack ? id : id + ".octv");
}

/// Sample id of a score row; B-scan rows carry a "/bscan_XXXX" suffix.
std::string base_id(const std::string& sample_id) { return sample_id.substr(0, sample_id.find('/')); }

MetricsReport report_for(const ScoreSet& set, double threshold, int fold) {
  return {eer(set).eer, hter(set, threshold), auc(set), static_cast<int>(set.bona_scores.size()),
          static_cast<int>(set.pa_scores.size()), fold};
}

fs::path fold_path(const fs::path& out, int fold) {
  return out.parent_path() / (out.stem().string() + ".fold" + std::to_string(fold) + out.extension().string());
}

}  // namespace

void synth(const LoadedConfig& loaded, const fs::path& out_dir, const std::string& command) {
  const RunConfig& cfg = loaded.config;
  fs::create_directories(out_dir / "volumes");
  const auto format = cfg.corpus.format;
  Manifest manifest;
  for (int i = 0; i < cfg.corpus.n_bona; ++i) {
    auto ph = cfg.phantom;
    ph.seed = mix(cfg.seed * 2 + 0) ^ static_cast<std::uint64_t>(i);
    auto sample = phantom::gen_bonafide(ph);
    SampleMeta meta;
    meta.sample_id = numbered("bona", i);
    meta.label = Label::Bonafide;
    meta.subject_id = numbered("subject", i % cfg.corpus.subjects);
    sample.volume.set_meta(meta);
    const auto path = volume_path(out_dir / "volumes", meta.sample_id, format);
    save_volume(sample.volume, path, format);
    save_mask(sample.mask, path, format);
    manifest.entries.push_back({path, meta});
  }
  for (int i = 0; i < cfg.corpus.n_pa; ++i) {
    auto ph = cfg.phantom;
    ph.seed = mix(cfg.seed * 2 + 1) ^ static_cast<std::uint64_t>(i);
    const int material = i % cfg.corpus.materials;
    const auto kind = cfg.corpus.pa_kinds[static_cast<std::size_t>(material) % cfg.corpus.pa_kinds.size()];
    auto volume = phantom::gen_pa(ph, kind);
    SampleMeta meta;
    meta.sample_id = numbered("pa", i);
    meta.label = Label::PA;
    meta.material = numbered(phantom::to_string(kind).c_str(), material);
    meta.pa_category = phantom::category(kind);
    volume.set_meta(meta);
    const auto path = volume_path(out_dir / "volumes", meta.sample_id, format);
    save_volume(volume, path, format);
    manifest.entries.push_back({path, meta});
  }
  save_manifest(manifest, out_dir / "manifest.json");
  write_run_json(out_dir, loaded, command);
}

void extract(const LoadedConfig& loaded, const fs::path& manifest_path, const fs::path& out_dir,
             const std::string& command) {
  const auto manifest = load_manifest(manifest_path);
  fs::create_directories(out_dir);
  if (fs::exists(out_dir / "index.jsonl")) fs::remove(out_dir / "index.jsonl");
  PatchDatasetWriter writer(out_dir);
  const auto& ex = loaded.config.extraction;
  for (const auto& entry : manifest.entries) {
    const auto format = detect_format(entry.path);
    auto volume = load_volume(entry.path, format);
    volume.set_meta(entry.meta);
    std::optional<MaskVolume> mask;
    if (has_mask(entry.path, format)) mask = load_mask(entry.path, format);
    for (int y = 0; y < volume.bscans(); ++y) {
      auto bscan = get_bscan(volume, y);
      const auto slice = mask ? std::optional<ByteImage>(mask->slice(y)) : std::nullopt;
      for (auto& p : extract_patches(bscan, ex, entry.meta.sample_id)) {
        p.source.y = y;
        if (slice) {
          const auto labels = crop(*slice, p.x, p.z, ex.patch_size);
          writer.add(p, entry.meta.label, &labels);
        } else {
          writer.add(p, entry.meta.label);
        }
      }
    }
  }
  write_run_json(out_dir, loaded, command);
}

nn::Dataset training_set(const fs::path& dir, int max_per_class, std::uint64_t seed) {
  const auto records = read_patch_index(dir);
  std::vector<std::size_t> bona, pa;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (records[i].label == Label::Bonafide ? bona : pa).push_back(i);
  }
  std::size_t keep = std::min(bona.size(), pa.size());
  if (keep == 0) keep = std::max(bona.size(), pa.size());
  if (max_per_class > 0) keep = std::min(keep, static_cast<std::size_t>(max_per_class));
  std::mt19937_64 rng(mix(seed ^ 0x7472616eULL));
  nn::Dataset data;
  for (auto* group : {&bona, &pa}) {
    std::shuffle(group->begin(), group->end(), rng);
    group->resize(std::min(group->size(), keep));
    std::sort(group->begin(), group->end());
    for (std::size_t i : *group) {
      const auto p = load_patch(dir, records[i]);
      nn::TrainSample s{nn::to_tensor(p.data), p.record.label, {}};
      if (p.mask) s.mask = nn::one_hot_mask(*p.mask);
      data.push_back(std::move(s));
    }
  }
  return data;
}

void train(const LoadedConfig& loaded, const fs::path& patches, const fs::path& ckpt, const std::string& command,
           std::ostream& log) {
  const RunConfig& cfg = loaded.config;
  const auto data = training_set(patches, cfg.data.max_patches_per_class, cfg.seed);
  auto net = nn::make_net(cfg.model);
  log << "training " << nn::to_string(cfg.model.variant) << " with " << nn::to_string(cfg.train.strategy) << " on "
      << data.size() << " patches\n";
  const auto result = nn::run_training(net, data, cfg.train, [&](const nn::HistoryRow& r) {
    log << "  " << nn::to_string(r.phase) << " epoch " << r.epoch << " loss1 " << r.loss1 << " loss2 " << r.loss2
        << " acc " << r.train_acc << '\n';
  });
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  nn::save_checkpoint(ckpt, net);
  const fs::path history = ckpt.string() + ".history.csv";
  nn::write_history_csv(history, result.history);
  write_run_json(ckpt, loaded, command);
  write_run_json(history, loaded, command);
}

void score(const LoadedConfig& loaded, const fs::path& ckpt, const fs::path& manifest_path, ScoreLevel level,
           const fs::path& out, const std::string& command, std::ostream& log) {
  const RunConfig& cfg = loaded.config;
  const auto manifest = load_manifest(manifest_path);
  const auto scorer = nn::make_scorer(nn::load_checkpoint(ckpt));
  std::vector<ScoreRow> rows;
  for (const auto& entry : manifest.entries) {
    auto volume = load_volume(entry.path, detect_format(entry.path));
    volume.set_meta(entry.meta);
    const auto& id = entry.meta.sample_id;
    if (level == ScoreLevel::Instance) {
      double s = 0.0;
      try {
        s = instance_score(scorer, volume, cfg.extraction, cfg.score);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoForeground) throw;
        log << "NoForeground " << id << ": scored 0\n";
      }
      rows.push_back({id, entry.meta.label, s});
      continue;
    }
    for (int y = 0; y < volume.bscans(); ++y) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "/bscan_%04d", y);
      double s = 0.0;
      try {
        s = bscan_score(scorer, get_bscan(volume, y), cfg.extraction, cfg.score, id);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoForeground) throw;
        log << "NoForeground " << id << suffix << ": scored 0\n";
      }
      rows.push_back({id + suffix, entry.meta.label, s});
    }
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_scores_csv(out, rows);
  write_run_json(out, loaded, command);
}

void eval(const LoadedConfig& loaded, const fs::path& scores, const fs::path& out, const EvalOptions& opts,
          const std::string& command) {
  const auto rows = read_scores_csv(scores);
  const auto all = to_score_set(rows);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  if (opts.det) {
    write_det_csv(*opts.det, det_curve(all));
    write_run_json(*opts.det, loaded, command);
  }
  if (!opts.folds) {
    write_report_json(out, report_for(all, eer(all).threshold, 0));
    write_run_json(out, loaded, command);
    return;
  }
  if (!opts.manifest) fail(ErrorCode::UsageError, "--folds needs --manifest to group samples");
  const auto folds = crossval_folds(load_manifest(*opts.manifest), *opts.folds, loaded.config.seed);
  MetricsReport mean{0, 0, 0, 0, 0, -1};
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::set<std::string> test_ids, train_ids;
    for (const auto& e : folds[f].test) test_ids.insert(e.meta.sample_id);
    for (const auto& e : folds[f].train) train_ids.insert(e.meta.sample_id);
    std::vector<ScoreRow> test_rows, train_rows;
    for (const auto& r : rows) {
      const auto id = base_id(r.sample_id);
      if (test_ids.count(id)) test_rows.push_back(r);
      if (train_ids.count(id)) train_rows.push_back(r);
    }
    const auto test = to_score_set(test_rows);
    const double threshold = eer(to_score_set(train_rows)).threshold;
    const auto rep = report_for(test, threshold, static_cast<int>(f));
    write_report_json(fold_path(out, static_cast<int>(f)), rep);
    write_run_json(fold_path(out, static_cast<int>(f)), loaded, command);
    const double k = static_cast<double>(folds.size());
    mean.eer += rep.eer / k;
    mean.hter += rep.hter / k;
    mean.auc += rep.auc / k;
    mean.n_bona += rep.n_bona;
    mean.n_pa += rep.n_pa;
  }
  write_report_json(out, mean);
  write_run_json(out, loaded, command);
}

png::RgbImage overlay(const Image& base, const Image& heat, double alpha) {
  if (base.rows() != heat.rows() || base.cols() != heat.cols()) {
    fail(ErrorCode::ShapeMismatch, "heatmap and patch sizes differ");
  }
  png::RgbImage img{base.rows(), base.cols(), {}};
  img.data.reserve(static_cast<std::size_t>(base.rows()) * base.cols() * 3);
  for (int r = 0; r < base.rows(); ++r) {
    for (int c = 0; c < base.cols(); ++c) {
      const double g = std::clamp<double>(base(r, c), 0.0, 1.0);
      const double h = std::clamp<double>(heat(r, c), 0.0, 1.0);
      const double ramp[3] = {h, 1.0 - std::abs(2.0 * h - 1.0), 1.0 - h};
      for (double ch : ramp) {
        img.data.push_back(static_cast<std::uint8_t>(std::lround(255.0 * ((1 - alpha) * g + alpha * ch))));
      }
    }
  }
  return img;
}

void viz_cam(const fs::path& ckpt, const fs::path& patch_png, int target_class, const fs::path& out,
             const LoadedConfig& loaded, const std::string& command) {
  auto net = nn::load_checkpoint(ckpt);
  Patch patch;
  patch.data = png::dequantize(png::read_gray(patch_png));
  if (patch.data.rows() != 256 || patch.data.cols() != 256) fail(ErrorCode::ShapeMismatch, "patch must be 256x256");
  const auto cam = nn::grad_cam(net, patch, target_class);
  png::write_rgb(out, overlay(patch.data, cam.upsampled));
  write_run_json(out, loaded, command);
}

void viz_features(const fs::path& ckpt, const fs::path& patches, const fs::path& out, const LoadedConfig& loaded,
                  const std::string& command) {
  auto net = nn::load_checkpoint(ckpt);
  const auto loaded_patches = load_patch_dataset(patches);
  std::vector<Patch> batch;
  for (const auto& p : loaded_patches) batch.push_back({p.data, p.record.x, p.record.z, {p.record.sample_id, p.record.y}});
  const auto features = nn::export_features(net, batch).to(torch::kFloat64).contiguous();
  std::ofstream csv(out);
  if (!csv) fail(ErrorCode::IoError, "cannot write " + out.string());
  csv << "file,sample_id,label";
  for (int64_t j = 0; j < features.size(1); ++j) csv << ",f" << j;
  csv << '\n';
  char buf[32];
  for (std::size_t i = 0; i < loaded_patches.size(); ++i) {
    const auto& r = loaded_patches[i].record;
    csv << r.file << ',' << r.sample_id << ',' << to_string(r.label);
    const auto row = features[static_cast<int64_t>(i)];
    for (int64_t j = 0; j < features.size(1); ++j) {
      std::snprintf(buf, sizeof buf, ",%.7g", row[j].item<double>());
      csv << buf;
    }
    csv << '\n';
  }
  write_run_json(out, loaded, command);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::string command;
  for (int i = 0; i < argc; ++i) command += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"OCT fingerprint presentation-attack detection toolkit", "isapad"};
  app.require_subcommand(1);
  std::string config_path;
  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_path, "JSON run configuration"); };

  fs::path out_path, manifest, patches, ckpt, scores, det, patch_png;
  std::string variant, strategy, level = "instance";
  int folds = 0, target_class = 1;
  bool features = false;

  auto* s_synth = app.add_subcommand("synth", "generate a phantom corpus with masks and a manifest");
  add_config(s_synth);
  s_synth->add_option("--out", out_path, "output directory")->required();

  auto* s_extract = app.add_subcommand("extract", "cut adaptive patches from every B-scan of a manifest");
  add_config(s_extract);
  s_extract->add_option("--manifest", manifest)->required();
  s_extract->add_option("--out", out_path, "patch dataset directory")->required();

  auto* s_train = app.add_subcommand("train", "train a network on a patch dataset");
  add_config(s_train);
  s_train->add_option("--patches", patches)->required();
  s_train->add_option("--variant", variant, "baseline, dual_branch, baseline_isam or isapad");
  s_train->add_option("--strategy", strategy, "S1, S2 or S3");
  s_train->add_option("--out", out_path, "checkpoint file")->required();

  auto* s_score = app.add_subcommand("score", "score the volumes of a manifest");
  add_config(s_score);
  s_score->add_option("--ckpt", ckpt)->required();
  s_score->add_option("--manifest", manifest)->required();
  s_score->add_option("--level", level)->check(CLI::IsMember({"bscan", "instance"}));
  s_score->add_option("--out", out_path, "scores CSV")->required();

  auto* s_eval = app.add_subcommand("eval", "EER/HTER/AUC report from a scores CSV");
  add_config(s_eval);
  s_eval->add_option("--scores", scores)->required();
  s_eval->add_option("--out", out_path, "report JSON")->required();
  auto* det_opt = s_eval->add_option("--det", det, "DET curve CSV");
  auto* folds_opt = s_eval->add_option("--folds", folds, "grouped cross-validation folds");
  s_eval->add_option("--manifest", manifest, "manifest used to group folds");

  auto* s_viz = app.add_subcommand("viz", "Grad-CAM overlay or feature export");
  add_config(s_viz);
  s_viz->add_option("--ckpt", ckpt)->required();
  s_viz->add_option("--patch", patch_png, "256x256 grayscale patch PNG");
  s_viz->add_option("--class", target_class, "0 = PA, 1 = bonafide");
  s_viz->add_flag("--features", features, "export pooled head features of a patch dataset");
  s_viz->add_option("--patches", patches, "patch dataset for --features");
  s_viz->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ERROR " << to_string(ErrorCode::UsageError) << ": " << e.what() << '\n';
    return 2;
  }

  try {
    const LoadedConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
    if (s_synth->parsed()) {
      synth(cfg, out_path, command);
    } else if (s_extract->parsed()) {
      extract(cfg, manifest, out_path, command);
    } else if (s_train->parsed()) {
      LoadedConfig c = cfg;
      if (!variant.empty()) c.config.model.variant = nn::parse_variant(variant);
      if (!strategy.empty()) c.config.train.strategy = nn::parse_strategy(strategy);
      train(c, patches, out_path, command, out);
    } else if (s_score->parsed()) {
      score(cfg, ckpt, manifest, level == "bscan" ? ScoreLevel::BScan : ScoreLevel::Instance, out_path, command, err);
    } else if (s_eval->parsed()) {
      EvalOptions opts;
      if (*det_opt) opts.det = det;
      if (*folds_opt) opts.folds = folds;
      if (!manifest.empty()) opts.manifest = manifest;
      eval(cfg, scores, out_path, opts, command);
    } else if (s_viz->parsed()) {
      if (features) {
        if (patches.empty()) fail(ErrorCode::UsageError, "viz --features needs --patches");
        viz_features(ckpt, patches, out_path, cfg, command);
      } else {
        if (patch_png.empty()) fail(ErrorCode::UsageError, "viz needs --patch or --features");
        viz_cam(ckpt, patch_png, target_class, out_path, cfg, command);
      }
    }
  } catch (const Error& e) {
    err << "ERROR " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "ERROR Internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace isapad::cli
