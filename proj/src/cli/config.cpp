#include "isapad/cli/config.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <set>
#include <sstream>

#include "isapad/error.hpp"

namespace isapad::cli {

const char* const kVersion = "0.1.0";

namespace {

using nlohmann::json;

/// Reads keys from one JSON object, refusing keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) fail(ErrorCode::ConfigError, "'" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::ConfigError, name_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail(ErrorCode::ConfigError, "unknown key " + name_ + "." + k);
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

VolumeFormat parse_format(const std::string& s) {
  if (s == "png") return VolumeFormat::PngStack;
  if (s == "raw") return VolumeFormat::RawBinary;
  fail(ErrorCode::ConfigError, "corpus.format must be 'png' or 'raw'");
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Section top(j, "config");
  top.get("seed", c.seed);
  top.get("folds", c.folds);

  if (const auto* p = top.child("phantom")) {
    Section s(*p, "phantom");
    auto& ph = c.phantom;
    s.get("depth", ph.depth);
    s.get("bscans", ph.bscans);
    s.get("width", ph.width);
    s.get("surface_depth_mean", ph.surface_depth_mean);
    s.get("surface_amplitude", ph.surface_amplitude);
    s.get("stratum_corneum_thickness", ph.stratum_corneum_thickness);
    s.get("epidermis_gap", ph.epidermis_gap);
    s.get("viable_epidermis_thickness", ph.viable_epidermis_thickness);
    s.get("gland_count_per_bscan", ph.gland_count_per_bscan);
    s.get("gland_radius", ph.gland_radius);
    s.get("layer_contrast", ph.layer_contrast);
    s.get("speckle_sigma", ph.speckle_sigma);
    s.get("attenuation_coefficient", ph.attenuation_coefficient);
    s.get("background_level", ph.background_level);
    s.finish();
  }
  if (const auto* p = top.child("corpus")) {
    Section s(*p, "corpus");
    s.get("n_bona", c.corpus.n_bona);
    s.get("n_pa", c.corpus.n_pa);
    s.get("subjects", c.corpus.subjects);
    s.get("materials", c.corpus.materials);
    std::vector<std::string> kinds;
    s.get("pa_kinds", kinds);
    if (!kinds.empty()) {
      c.corpus.pa_kinds.clear();
      for (const auto& k : kinds) c.corpus.pa_kinds.push_back(phantom::parse_pa_kind(k));
    }
    std::string format;
    s.get("format", format);
    if (!format.empty()) c.corpus.format = parse_format(format);
    s.finish();
  }
  if (const auto* p = top.child("extraction")) {
    Section s(*p, "extraction");
    auto& e = c.extraction;
    s.get("patch_size", e.patch_size);
    s.get("z_stride", e.z_stride);
    s.get("x_stride", e.x_stride);
    s.get("foreground_threshold", e.foreground_threshold);
    s.get("kernel_rows", e.kernel_rows);
    s.get("kernel_cols", e.kernel_cols);
    s.get("sum_width", e.sum_width);
    s.finish();
  }
  if (const auto* p = top.child("model")) {
    Section s(*p, "model");
    std::string variant;
    s.get("variant", variant);
    if (!variant.empty()) c.model.variant = nn::parse_variant(variant);
    s.get("width", c.model.width);
    s.get("isam_width", c.model.isam_width);
    s.get("w1", c.model.attention.w1);
    s.get("w2", c.model.attention.w2);
    s.finish();
  }
  if (const auto* p = top.child("train")) {
    Section s(*p, "train");
    auto& t = c.train;
    std::string strategy;
    s.get("strategy", strategy);
    if (!strategy.empty()) t.strategy = nn::parse_strategy(strategy);
    s.get("lambda1", t.weights.lambda1);
    s.get("lambda2", t.weights.lambda2);
    s.get("lr_start", t.lr_start);
    s.get("lr_end", t.lr_end);
    s.get("batch_size", t.batch_size);
    s.get("epochs_pretrain", t.epochs_pretrain);
    s.get("epochs_main", t.epochs_main);
    s.get("alternation_period", t.alternation_period);
    s.get("horizontal_flip", t.horizontal_flip);
    s.get("max_patches_per_class", c.data.max_patches_per_class);
    s.finish();
  }
  if (const auto* p = top.child("score")) {
    Section s(*p, "score");
    s.get("n_bscan", c.score.n_bscan);
    s.get("n_instance", c.score.n_instance);
    s.get("m_bscans", c.score.m_bscans);
    s.finish();
  }
  top.finish();

  c.phantom.seed = c.seed;
  c.model.seed = c.seed;
  c.train.seed = c.seed;
  c.score.seed = c.seed;

  phantom::validate(c.phantom);
  validate(c.extraction);
  nn::validate(c.model);
  nn::validate(c.train);
  validate(c.score);
  if (c.corpus.n_bona < 0 || c.corpus.n_pa < 0 || c.corpus.subjects < 1 || c.corpus.materials < 1 ||
      c.corpus.pa_kinds.empty()) {
    fail(ErrorCode::ConfigError, "corpus counts must be non-negative with at least one subject, material and kind");
  }
  if (c.data.max_patches_per_class < 0) fail(ErrorCode::ConfigError, "train.max_patches_per_class must be >= 0");
  if (c.folds < 2) fail(ErrorCode::ConfigError, "folds must be >= 2");
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  json kinds = json::array();
  for (auto k : c.corpus.pa_kinds) kinds.push_back(phantom::to_string(k));
  const auto& ph = c.phantom;
  const auto& e = c.extraction;
  const auto& t = c.train;
  return json{
      {"seed", c.seed},
      {"folds", c.folds},
      {"phantom",
       {{"depth", ph.depth}, {"bscans", ph.bscans}, {"width", ph.width}, {"surface_depth_mean", ph.surface_depth_mean},
        {"surface_amplitude", ph.surface_amplitude}, {"stratum_corneum_thickness", ph.stratum_corneum_thickness},
        {"epidermis_gap", ph.epidermis_gap}, {"viable_epidermis_thickness", ph.viable_epidermis_thickness},
        {"gland_count_per_bscan", ph.gland_count_per_bscan}, {"gland_radius", ph.gland_radius},
        {"layer_contrast", ph.layer_contrast}, {"speckle_sigma", ph.speckle_sigma},
        {"attenuation_coefficient", ph.attenuation_coefficient}, {"background_level", ph.background_level}}},
      {"corpus",
       {{"n_bona", c.corpus.n_bona}, {"n_pa", c.corpus.n_pa}, {"subjects", c.corpus.subjects},
        {"materials", c.corpus.materials}, {"pa_kinds", kinds},
        {"format", c.corpus.format == VolumeFormat::PngStack ? "png" : "raw"}}},
      {"extraction",
       {{"patch_size", e.patch_size}, {"z_stride", e.z_stride}, {"x_stride", e.x_stride},
        {"foreground_threshold", e.foreground_threshold}, {"kernel_rows", e.kernel_rows},
        {"kernel_cols", e.kernel_cols}, {"sum_width", e.sum_width}}},
      {"model",
       {{"variant", nn::to_string(c.model.variant)}, {"width", c.model.width}, {"isam_width", c.model.isam_width},
        {"w1", c.model.attention.w1}, {"w2", c.model.attention.w2}}},
      {"train",
       {{"strategy", nn::to_string(t.strategy)}, {"lambda1", t.weights.lambda1}, {"lambda2", t.weights.lambda2},
        {"lr_start", t.lr_start}, {"lr_end", t.lr_end}, {"batch_size", t.batch_size},
        {"epochs_pretrain", t.epochs_pretrain}, {"epochs_main", t.epochs_main},
        {"alternation_period", t.alternation_period}, {"horizontal_flip", t.horizontal_flip},
        {"max_patches_per_class", c.data.max_patches_per_class}}},
      {"score", {{"n_bscan", c.score.n_bscan}, {"n_instance", c.score.n_instance}, {"m_bscans", c.score.m_bscans}}},
  };
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::IoError, "SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return {config_from_json(j), sha256_hex(bytes)};
}

LoadedConfig default_config() { return {config_from_json(json::object()), sha256_hex("{}")}; }

void write_run_json(const std::filesystem::path& artifact, const LoadedConfig& cfg, const std::string& command) {
  const auto sidecar = std::filesystem::is_directory(artifact) ? artifact / "run.json"
                                                               : std::filesystem::path(artifact.string() + ".run.json");
  std::ofstream out(sidecar);
  if (!out) fail(ErrorCode::IoError, "cannot write " + sidecar.string());
  const json j{{"config_sha256", cfg.sha256}, {"seed", cfg.config.seed}, {"command", command}, {"version", kVersion}};
  out << j.dump(2) << '\n';
}

}  // namespace isapad::cli
