#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssr/embedding.hpp"
#include "ssr/scm.hpp"
#include "ssr/sketch.hpp"
#include "ssr/stroke_graph.hpp"
#include "ssr/transformer.hpp"

namespace ssr {

/// Which labels are available during training.
enum class Scenario {
  kLabelsFull,    // category + per-stroke component labels
  kPriorInfo,     // category + per-category composition prior
  kCategoryOnly,  // category labels only
};

/// Which SCM output feeds the transformer: N stroke tokens or K component tokens.
enum class TokenPath { kStroke, kComponent };

/// kKeysOnly exists only on the stroke path.
enum class FusionMode { kConvex, kKeysOnly, kStrokesOnly };

std::string to_string(Scenario s);
std::string to_string(TokenPath p);
std::string to_string(FusionMode f);
Scenario scenario_from_string(const std::string& s);
TokenPath token_path_from_string(const std::string& s);
FusionMode fusion_mode_from_string(const std::string& s);

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 20.0;
  double lambda_s = 10.0;
  double lambda_c = 10.0;
};

struct ScenarioConfig {
  Scenario scenario = Scenario::kLabelsFull;
  TokenPath path = TokenPath::kStroke;
  FusionMode fusion = FusionMode::kConvex;
  LossWeights weights;

  /// labels_full needs the stroke path, prior_info the component path, and
  /// keys-only fusion is stroke-path only.
  void validate() const;
  /// The scenario's natural path with convex fusion.
  static ScenarioConfig defaults_for(Scenario s);
};

struct ModelConfig {
  std::size_t width = 64;
  std::size_t max_strokes = kDefaultMaxStrokes;
  std::size_t memory_heads = 4;
  std::size_t transformer_layers = 2;
  std::size_t transformer_heads = 4;
  std::size_t mlp_ratio = 4;
  GraphConfig graph;
  KernelConfig kernel;

  static ModelConfig desk();
  /// ViT-Base sized transformer and 768-wide stroke features.
  static ModelConfig full();
  void validate() const;
};

/// Output heads: f_w2 (category), f_w3 (per-stroke component), f_w4
/// (per-component existence). f_w1 lives in SemanticMemory.
struct RecognitionHeads {
  Linear category;
  Linear segment;
  Linear existence;
};

struct ForwardResult {
  Tensor embeddings;  // [N, d]
  Tensor q;           // [N, d]
  AssignmentMatrix assignment;
  Tensor tokens;  // Fs [N, d] or Fc [K, d]
  EncoderOutput encoded;
  Tensor class_logits;                   // [1, categories]
  std::optional<Tensor> segment_logits;  // [N, K], stroke path
  std::optional<Tensor> existence_logits;  // [K, 1], component path
  KnnStats knn;
  bool epsilon_ok = true;
};

/// Named loss terms. L1 keys, L2 assignment, L4 category, L5 segmentation,
/// L6 composition.
struct LossParts {
  std::optional<Tensor> l1, l2, l4, l5, l6;
};

/// Plain-number view of LossParts plus the combined total.
struct LossValues {
  std::optional<double> l1, l2, l4, l5, l6;
  double total = 0.0;
};

LossValues loss_values(const LossParts& parts, const Tensor& total);

/// Mean cross-entropy over rows of `logits` against integer targets.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

/// Balanced BCE on logits (flattened), averaged over entries; the weights
/// come from balance_weights over the 0/1 targets.
Tensor balanced_bce_with_logits(const Tensor& logits, std::span<const std::uint8_t> targets);

struct L3Parts {
  Tensor l3;
  Tensor l4;
  Tensor aux;  // L5 (segmentation) or L6 (composition)
};

/// L3 = CE(category) + lambda_s * mean_i CE(f_w3(token_i), y_s[i]).
L3Parts loss_segmentation(const Tensor& class_logits, const Tensor& segment_logits, std::size_t category,
                          std::span<const std::size_t> stroke_components, double lambda_s);

/// L3 = CE(category) + lambda_c * bBCE(f_w4(component tokens), y_e).
L3Parts loss_prior(const Tensor& class_logits, const Tensor& existence_logits, std::size_t category,
                   std::span<const std::uint8_t> composition, double lambda_c);

/// L = lambda1 L1 + lambda2 L2 + L3, with L2 only for labels_full and L3's
/// auxiliary term chosen by scenario. Absent required parts throw.
Tensor total_loss(const LossParts& parts, const ScenarioConfig& scenario);

struct Prediction {
  std::vector<double> category_probs;
  std::size_t category = 0;
  /// Stroke path: argmax f_w3 per stroke with its softmax probability.
  std::vector<std::size_t> stroke_components;
  std::vector<double> stroke_confidence;
  /// Component path: sigmoid(f_w4) per component.
  std::vector<double> existence_probs;
  /// argmax_j C per stroke (available in every scenario).
  std::vector<std::size_t> assigned_components;
  std::vector<std::vector<double>> assignment;
  std::vector<std::size_t> head_choice;
};

/// The full network: embedding -> dynamic graph -> SCM -> transformer -> heads.
class SsrModel {
 public:
  SsrModel(const ModelConfig& model, const ScenarioConfig& scenario, LabelSpace labels, std::uint64_t seed);

  SsrModel(const SsrModel&) = delete;
  SsrModel& operator=(const SsrModel&) = delete;
  SsrModel(SsrModel&&) = default;
  SsrModel& operator=(SsrModel&&) = default;

  ForwardResult forward(const Sketch& sketch) const;

  /// Scenario-active terms for one sample; L1 only when `include_l1`.
  LossParts losses(const ForwardResult& fwd, const Sketch& sketch, bool include_l1 = true) const;

  Prediction predict(const Sketch& sketch) const;
  Prediction predict(const ForwardResult& fwd) const;

  const ModelConfig& model_config() const { return model_; }
  const ScenarioConfig& scenario() const { return scenario_; }
  const LabelSpace& labels() const { return labels_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  const StrokeEmbedding& embedding() const { return embedding_; }
  const GraphModule& graph() const { return graph_; }
  const SemanticMemory& memory() const { return memory_; }
  const TransformerEncoder& encoder() const { return encoder_; }
  const RecognitionHeads& heads() const { return heads_; }

 private:
  ModelConfig model_;
  ScenarioConfig scenario_;
  LabelSpace labels_;
  ParameterSet params_;
  StrokeEmbedding embedding_;
  GraphModule graph_;
  SemanticMemory memory_;
  TransformerEncoder encoder_;
  RecognitionHeads heads_;
};

}  // namespace ssr
