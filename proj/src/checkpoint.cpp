#include "abxi/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "abxi/error.hpp"

namespace abxi {
namespace {

constexpr std::string_view kMagic = "ABXICKP1";

template <typename T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <typename T>
T take(std::string_view& buf) {
  if (buf.size() < sizeof(T)) throw DataError("truncated checkpoint");
  T v;
  std::memcpy(&v, buf.data(), sizeof(T));
  buf.remove_prefix(sizeof(T));
  return v;
}

std::string serialize(const AbxiModel& model) {
  std::string buf(kMagic);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
    buf += p.name;
    put<std::int64_t>(buf, p.var->value.rows());
    put<std::int64_t>(buf, p.var->value.cols());
    buf.append(reinterpret_cast<const char*>(p.var->value.data()),
               static_cast<std::size_t>(p.var->value.size()) * sizeof(double));
  }
  return buf;
}

}  // namespace

std::string sha256_bytes(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw DataError("sha256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_bytes(ss.str());
}

std::string parameter_hash(const AbxiModel& model) { return sha256_bytes(serialize(model)); }

std::filesystem::path manifest_path(const std::filesystem::path& ckpt_path) {
  auto p = ckpt_path;
  return p.replace_extension(".json");
}

std::string save_checkpoint(const AbxiModel& model, const CheckpointInfo& info,
                            const std::filesystem::path& ckpt_path) {
  const std::string bytes = serialize(model);
  {
    std::ofstream out(ckpt_path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", ckpt_path.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  const std::string hash = sha256_bytes(bytes);
  nlohmann::json shapes = nlohmann::json::object();
  for (const auto& p : model.parameters()) shapes[p.name] = {p.var->value.rows(), p.var->value.cols()};
  nlohmann::json manifest = {{"format", "abxi-checkpoint"},
                             {"version", 1},
                             {"config", to_json(model.config())},
                             {"parameter_shapes", shapes},
                             {"parameter_count", model.parameter_count()},
                             {"seed", info.seed},
                             {"epoch", info.epoch},
                             {"val_mrr_sum", info.val_mrr_sum},
                             {"sha256", hash},
                             {"tensor_file", ckpt_path.filename().string()},
                             {"extra", info.extra}};
  std::ofstream out(manifest_path(ckpt_path));
  if (!out) throw DataError("cannot write checkpoint manifest");
  out << manifest.dump(2) << '\n';
  return hash;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& ckpt_path) {
  std::ifstream min(manifest_path(ckpt_path));
  if (!min) throw DataError(fmt::format("missing checkpoint manifest for '{}'", ckpt_path.string()));
  LoadedCheckpoint out;
  try {
    min >> out.manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  std::ifstream in(ckpt_path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open checkpoint '{}'", ckpt_path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (out.manifest.value("sha256", "") != sha256_bytes(bytes)) {
    throw DataError("checkpoint hash does not match its manifest");
  }
  const ModelConfig cfg = model_config_from_json(out.manifest.at("config"));
  out.model = std::make_unique<AbxiModel>(cfg, out.manifest.value("seed", std::uint64_t{0}));

  std::string_view view(bytes);
  if (!view.starts_with(kMagic)) throw DataError("not an abxi checkpoint");
  view.remove_prefix(kMagic.size());
  const auto count = take<std::uint32_t>(view);
  if (count != out.model->parameters().size()) throw DataError("checkpoint parameter count mismatch");
  for (const auto& p : out.model->parameters()) {
    const auto name_len = take<std::uint32_t>(view);
    if (view.size() < name_len) throw DataError("truncated checkpoint");
    const std::string name(view.substr(0, name_len));
    view.remove_prefix(name_len);
    const auto rows = take<std::int64_t>(view);
    const auto cols = take<std::int64_t>(view);
    if (name != p.name || rows != p.var->value.rows() || cols != p.var->value.cols()) {
      throw DataError(fmt::format("checkpoint tensor '{}' does not match model parameter '{}'", name, p.name));
    }
    const std::size_t n = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (view.size() < n) throw DataError("truncated checkpoint");
    std::memcpy(p.var->value.data(), view.data(), n);
    view.remove_prefix(n);
  }
  return out;
}

}  // namespace abxi
