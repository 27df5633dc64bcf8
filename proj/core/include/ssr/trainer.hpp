#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssr/adam.hpp"
#include "ssr/recognizer.hpp"
#include "ssr/run_config.hpp"

namespace ssr {

/// Thrown when a batch produces a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalMetrics {
  std::size_t samples = 0;
  double acc_at_1 = 0.0;
  std::optional<double> c_metric;            // labels_full only
  std::optional<double> existence_accuracy;  // prior_info only
};

nlohmann::json metrics_to_json(const EvalMetrics& m);

/// Throws on an empty dataset or a label space that differs from the model's.
EvalMetrics evaluate(const SsrModel& model, const Dataset& data);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  /// Per-sample loss parts and totals averaged over the epoch.
  LossValues losses;
  std::optional<EvalMetrics> train;
  std::optional<EvalMetrics> test;
  double seconds = 0.0;
};

nlohmann::json epoch_to_json(const EpochRecord& r);

struct TrainSettings {
  std::size_t epochs = 300;
  std::size_t batch_size = 16;
  AdamConfig adam;
  std::uint64_t seed = 0;
  /// Empty disables all file output (metrics log, checkpoints, NaN dumps).
  std::filesystem::path output_dir;
  bool eval_train = true;
  std::optional<double> stop_train_acc;
  std::optional<double> stop_train_c_metric;
  /// Echoed into checkpoints.
  nlohmann::json run_echo = nlohmann::json::object();
};

struct TrainCallbacks {
  /// After each sample: its loss parts and the total that was backpropagated.
  std::function<void(const LossParts&, const Tensor& total)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  EvalMetrics best;
  std::filesystem::path best_checkpoint;  // empty without output_dir
  bool stopped_early = false;
};

/// Mini-batch training. Each sample is a separate graph; its total loss is
/// scaled by 1/batch and backpropagated, so gradients accumulate to the batch
/// mean before one Adam step. Best-epoch selection uses test Acc@1 when a
/// test set is given, otherwise train Acc@1.
TrainResult train(SsrModel& model, const Dataset& train_set, const Dataset* test_set, const TrainSettings& settings,
                  const TrainCallbacks& callbacks = {});

struct LoadedRun {
  Dataset train;
  std::optional<Dataset> test;
  LabelSpace labels;
};

/// Loads the label space (or derives the composition from training labels)
/// and the train/test stroke files named by the config.
LoadedRun load_run_data(const RunConfig& config);

TrainSettings settings_from(const RunConfig& config);

/// One row of the ablation matrix over scenarios, token paths and fusion modes.
struct SweepRow {
  Scenario scenario;
  TokenPath path;
  FusionMode fusion;
};

/// The ten configurations of the scenario/feature ablation, in table order.
std::vector<SweepRow> ablation_rows();

struct SweepResult {
  SweepRow row;
  std::vector<std::uint64_t> seeds;
  std::vector<EvalMetrics> per_seed;  // best-epoch metrics
  EvalMetrics mean;
};

/// Runs every ablation row for every seed; writes sweep.jsonl and sweep.tsv
/// to the output directory when one is set.
std::vector<SweepResult> run_sweep(const RunConfig& config,
                                   const std::function<void(const SweepResult&)>& on_row = {});

/// Writes features.tsv: one row per stroke (Q features, assignment row,
/// predicted and true component) followed by K*H memory key rows.
/// Returns the path written.
std::filesystem::path export_features(const SsrModel& model, const Dataset& data, const std::filesystem::path& out_dir);

struct FeatureRow {
  std::string kind;  // "stroke" or "key"
  std::optional<std::size_t> sample;  // strokes only
  std::size_t index = 0;               // stroke index, or component id for keys
  std::size_t head = 0;                // key head, or the head chosen for the argmax-C component
  std::optional<std::size_t> predicted;
  std::optional<std::size_t> truth;
  std::vector<double> assignment;
  std::vector<double> features;
};

std::vector<FeatureRow> read_features(const std::filesystem::path& path);

}  // namespace ssr
