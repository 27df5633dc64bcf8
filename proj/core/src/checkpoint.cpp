#include "ssr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <fmt/format.h>

namespace ssr {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'S', 'R', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <class T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return {{"width", c.width},
          {"max_strokes", c.max_strokes},
          {"memory_heads", c.memory_heads},
          {"transformer_layers", c.transformer_layers},
          {"transformer_heads", c.transformer_heads},
          {"mlp_ratio", c.mlp_ratio},
          {"k_neighbors", c.graph.k},
          {"dilation1", c.graph.dilation1},
          {"dilation2", c.graph.dilation2},
          {"tau", c.kernel.tau},
          {"kernel_epsilon", c.kernel.epsilon}};
}

ModelConfig model_config_from_json(const json& doc) {
  ModelConfig c;
  c.width = doc.at("width").get<std::size_t>();
  c.max_strokes = doc.at("max_strokes").get<std::size_t>();
  c.memory_heads = doc.at("memory_heads").get<std::size_t>();
  c.transformer_layers = doc.at("transformer_layers").get<std::size_t>();
  c.transformer_heads = doc.at("transformer_heads").get<std::size_t>();
  c.mlp_ratio = doc.at("mlp_ratio").get<std::size_t>();
  c.graph.k = doc.at("k_neighbors").get<std::size_t>();
  c.graph.dilation1 = doc.at("dilation1").get<std::size_t>();
  c.graph.dilation2 = doc.at("dilation2").get<std::size_t>();
  c.kernel.tau = doc.at("tau").get<double>();
  c.kernel.epsilon = doc.at("kernel_epsilon").get<double>();
  return c;
}

json scenario_config_to_json(const ScenarioConfig& c) {
  return {{"scenario", to_string(c.scenario)},
          {"token_path", to_string(c.path)},
          {"fusion_mode", to_string(c.fusion)},
          {"lambda1", c.weights.lambda1},
          {"lambda2", c.weights.lambda2},
          {"lambda_s", c.weights.lambda_s},
          {"lambda_c", c.weights.lambda_c}};
}

ScenarioConfig scenario_config_from_json(const json& doc) {
  ScenarioConfig c;
  c.scenario = scenario_from_string(doc.at("scenario").get<std::string>());
  c.path = token_path_from_string(doc.at("token_path").get<std::string>());
  c.fusion = fusion_mode_from_string(doc.at("fusion_mode").get<std::string>());
  c.weights.lambda1 = doc.at("lambda1").get<double>();
  c.weights.lambda2 = doc.at("lambda2").get<double>();
  c.weights.lambda_s = doc.at("lambda_s").get<double>();
  c.weights.lambda_c = doc.at("lambda_c").get<double>();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const SsrModel& model, const json& extra) {
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& p : model.params().all()) {
    table.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}});
    offset += p.tensor.size();
  }
  const json header = {{"format_version", kCheckpointVersion},
                       {"model", model_config_to_json(model.model_config())},
                       {"scenario", scenario_config_to_json(model.scenario())},
                       {"label_space", label_space_to_json(model.labels())},
                       {"tensors", table},
                       {"extra", extra}};
  const std::string text = header.dump();

  std::string buf(kMagic, sizeof(kMagic));
  put<std::uint32_t>(buf, kCheckpointVersion);
  put<std::uint64_t>(buf, text.size());
  buf += text;
  for (const auto& p : model.params().all()) {
    const auto v = p.tensor.values();
    buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(fmt::format("cannot write {}", tmp.string()));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError(fmt::format("write failed for {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open checkpoint {}", path.string()));
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(fmt::format("{} is not a checkpoint", path.string()));
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(buf, pos);
  if (version != kCheckpointVersion) {
    throw CheckpointError(fmt::format("{}: unsupported format version {}", path.string(), version));
  }
  const auto header_len = take<std::uint64_t>(buf, pos);
  if (pos + header_len > buf.size()) throw CheckpointError("checkpoint header truncated");

  json header;
  try {
    header = json::parse(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                         buf.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(fmt::format("{}: bad header: {}", path.string(), e.what()));
  }
  pos += header_len;

  try {
    SsrModel model(model_config_from_json(header.at("model")), scenario_config_from_json(header.at("scenario")),
                   label_space_from_json(header.at("label_space")), 0);
    const json& table = header.at("tensors");
    if (table.size() != model.params().size()) {
      throw CheckpointError(fmt::format("{}: {} tensors stored, model has {}", path.string(), table.size(),
                                        model.params().size()));
    }
    const std::size_t data_start = pos;
    for (const auto& entry : table) {
      const auto name = entry.at("name").get<std::string>();
      Parameter* p = model.params().find(name);
      if (!p) throw CheckpointError(fmt::format("{}: unknown tensor '{}'", path.string(), name));
      if (entry.at("shape").get<Shape>() != p->tensor.shape()) {
        throw CheckpointError(fmt::format("{}: tensor '{}' has shape {} but the model expects {}", path.string(), name,
                                          shape_str(entry.at("shape").get<Shape>()), shape_str(p->tensor.shape())));
      }
      const std::size_t begin = data_start + entry.at("offset").get<std::size_t>() * sizeof(double);
      const std::size_t bytes = p->tensor.size() * sizeof(double);
      if (begin + bytes > buf.size()) throw CheckpointError(fmt::format("{}: tensor data truncated", path.string()));
      std::memcpy(p->tensor.mutable_values().data(), buf.data() + begin, bytes);
    }
    return {std::move(model), header.value("extra", json::object()), fnv1a_hex(buf)};
  } catch (const json::exception& e) {
    throw CheckpointError(fmt::format("{}: bad header: {}", path.string(), e.what()));
  }
}

}  // namespace ssr
