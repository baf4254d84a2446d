#include "isapad/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "isapad/error.hpp"

namespace isapad::nn {

namespace {

constexpr char kMagic[4] = {'I', 'S', 'P', 'D'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) fail(ErrorCode::CheckpointError, path.string() + ": truncated");
  return v;
}

std::vector<std::pair<std::string, torch::Tensor>> named_state(const torch::nn::Module& m) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : m.named_parameters()) out.emplace_back(p.key(), p.value());
  for (const auto& b : m.named_buffers()) out.emplace_back(b.key(), b.value());
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, IsapadNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  const auto& cfg = net->config();
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.variant));
  put<double>(out, cfg.width);
  put<double>(out, cfg.isam_width);
  put<double>(out, cfg.attention.w1);
  put<double>(out, cfg.attention.w2);
  put<std::uint64_t>(out, cfg.seed);
  const auto state = named_state(*net);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(state.size()));
  for (const auto& [name, tensor] : state) {
    const auto t = tensor.detach().contiguous().cpu();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    std::uint32_t dtype;
    if (t.scalar_type() == torch::kFloat32) {
      dtype = 0;
    } else if (t.scalar_type() == torch::kInt64) {
      dtype = 1;
    } else {
      fail(ErrorCode::CheckpointError, "unsupported tensor type for " + name);
    }
    put<std::uint32_t>(out, dtype);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<std::int64_t>(out, d);
    out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
  }
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

IsapadNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::CheckpointError, path.string() + ": not an ISAPAD checkpoint");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::CheckpointError, path.string() + ": format version " + std::to_string(version) + ", expected " +
                                         std::to_string(kCheckpointVersion));
  }
  NetConfig cfg;
  const auto variant = get<std::uint32_t>(in, path);
  if (variant > static_cast<std::uint32_t>(Variant::FullIsapad)) fail(ErrorCode::CheckpointError, "unknown variant tag");
  cfg.variant = static_cast<Variant>(variant);
  cfg.width = get<double>(in, path);
  cfg.isam_width = get<double>(in, path);
  cfg.attention.w1 = get<double>(in, path);
  cfg.attention.w2 = get<double>(in, path);
  cfg.seed = get<std::uint64_t>(in, path);

  IsapadNet net = make_net(cfg);
  auto state = named_state(*net);
  const auto count = get<std::uint32_t>(in, path);
  if (count != state.size()) fail(ErrorCode::CheckpointError, path.string() + ": tensor count does not match topology");
  torch::NoGradGuard guard;
  for (auto& [name, target] : state) {
    const auto len = get<std::uint32_t>(in, path);
    std::string stored(len, '\0');
    if (!in.read(stored.data(), len)) fail(ErrorCode::CheckpointError, path.string() + ": truncated");
    if (stored != name) fail(ErrorCode::CheckpointError, "expected tensor " + name + ", found " + stored);
    const auto dtype = get<std::uint32_t>(in, path);
    const auto rank = get<std::uint32_t>(in, path);
    std::vector<int64_t> dims(rank);
    for (auto& d : dims) d = get<std::int64_t>(in, path);
    const auto type = dtype == 0 ? torch::kFloat32 : dtype == 1 ? torch::kInt64 : torch::kUInt8;
    if (dtype > 1 || type != target.scalar_type() || target.sizes().vec() != dims) {
      fail(ErrorCode::CheckpointError, "tensor " + name + " does not match the network");
    }
    auto buf = torch::empty(dims, type);
    if (!in.read(static_cast<char*>(buf.data_ptr()), static_cast<std::streamsize>(buf.nbytes()))) {
      fail(ErrorCode::CheckpointError, path.string() + ": truncated");
    }
    target.copy_(buf);
  }
  net->eval();
  return net;
}

PatchScorer make_scorer(IsapadNet net, int batch) {
  return [net, batch](std::span<const Patch> patches) mutable { return bona_probabilities(net, patches, batch); };
}

}  // namespace isapad::nn
