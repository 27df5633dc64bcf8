#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ssr/recognizer.hpp"

namespace ssr {

/// Raised for unreadable, truncated, or inconsistent checkpoint files.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& doc);
nlohmann::json scenario_config_to_json(const ScenarioConfig& c);
ScenarioConfig scenario_config_from_json(const nlohmann::json& doc);

/// File layout: "SSRCKPT\0", u32 version, u64 header length, JSON header
/// (configs, label space, tensor table, `extra`), then every parameter as
/// little-endian doubles in table order.
void save_checkpoint(const std::filesystem::path& path, const SsrModel& model,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  SsrModel model;
  nlohmann::json extra;
  /// FNV-1a 64 of the file bytes, hex.
  std::string hash;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ssr
