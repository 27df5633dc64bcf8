#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssr/adam.hpp"
#include "ssr/recognizer.hpp"

namespace ssr {

/// Training run settings. The text form is one `key = value` per line with
/// `#` comments; keys are the field names below.
struct RunConfig {
  std::filesystem::path train_data;
  std::filesystem::path test_data;
  std::filesystem::path label_space;
  std::filesystem::path output_dir = "runs/default";

  std::string scenario = "labels_full";
  /// Empty means the scenario's natural path.
  std::string token_path;
  std::string fusion_mode = "convex";
  std::string preset = "desk";  // desk | full

  std::uint64_t seed = 0;
  /// Unset values take the preset default (desk: 300 / 16, full: 200 / 128).
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  AdamConfig adam;
  LossWeights weights;

  std::optional<std::size_t> width;
  std::optional<std::size_t> memory_heads;
  std::optional<std::size_t> k_neighbors;
  std::optional<std::size_t> transformer_layers;
  std::optional<std::size_t> transformer_heads;
  std::optional<std::size_t> max_strokes;
  std::optional<double> tau;
  std::optional<double> kernel_epsilon;

  /// Stop once train Acc@1 (and train C-Metric in labels_full) reach these.
  std::optional<double> stop_train_acc;
  std::optional<double> stop_train_c_metric;
  /// Seeds used by `sweep`; empty means just `seed`.
  std::vector<std::uint64_t> sweep_seeds;

  std::size_t resolved_epochs() const;
  std::size_t resolved_batch_size() const;
  ModelConfig model_config() const;
  ScenarioConfig scenario_config() const;

  void validate() const;
  std::string to_text() const;
};

/// Relative paths are resolved against `base_dir`. Unknown keys and
/// malformed values throw with the offending line number.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ssr
