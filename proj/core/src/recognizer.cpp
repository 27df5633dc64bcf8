#include "ssr/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace ssr {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kLabelsFull: return "labels_full";
    case Scenario::kPriorInfo: return "prior_info";
    case Scenario::kCategoryOnly: return "category_only";
  }
  return "labels_full";
}

std::string to_string(TokenPath p) { return p == TokenPath::kStroke ? "stroke" : "component"; }

std::string to_string(FusionMode f) {
  switch (f) {
    case FusionMode::kConvex: return "convex";
    case FusionMode::kKeysOnly: return "keys_only";
    case FusionMode::kStrokesOnly: return "strokes_only";
  }
  return "convex";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "labels_full") return Scenario::kLabelsFull;
  if (s == "prior_info") return Scenario::kPriorInfo;
  if (s == "category_only") return Scenario::kCategoryOnly;
  throw std::invalid_argument(fmt::format("unknown scenario '{}'", s));
}

TokenPath token_path_from_string(const std::string& s) {
  if (s == "stroke") return TokenPath::kStroke;
  if (s == "component") return TokenPath::kComponent;
  throw std::invalid_argument(fmt::format("unknown token path '{}'", s));
}

FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "convex") return FusionMode::kConvex;
  if (s == "keys_only") return FusionMode::kKeysOnly;
  if (s == "strokes_only") return FusionMode::kStrokesOnly;
  throw std::invalid_argument(fmt::format("unknown fusion mode '{}'", s));
}

void ScenarioConfig::validate() const {
  if (scenario == Scenario::kLabelsFull && path != TokenPath::kStroke) {
    throw std::invalid_argument("labels_full requires the stroke token path");
  }
  if (scenario == Scenario::kPriorInfo && path != TokenPath::kComponent) {
    throw std::invalid_argument("prior_info requires the component token path");
  }
  if (path == TokenPath::kComponent && fusion == FusionMode::kKeysOnly) {
    throw std::invalid_argument("keys_only fusion is defined for the stroke path only");
  }
}

ScenarioConfig ScenarioConfig::defaults_for(Scenario s) {
  ScenarioConfig c;
  c.scenario = s;
  c.path = s == Scenario::kPriorInfo ? TokenPath::kComponent : TokenPath::kStroke;
  return c;
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.width = 768;
  c.transformer_layers = 12;
  c.transformer_heads = 12;
  return c;
}

void ModelConfig::validate() const {
  if (width == 0 || width % 2 != 0) throw std::invalid_argument("model width must be even and positive");
  if (max_strokes == 0) throw std::invalid_argument("max_strokes must be positive");
  if (memory_heads == 0) throw std::invalid_argument("memory_heads must be positive");
  if (graph.k == 0) throw std::invalid_argument("graph k must be positive");
  if (!(kernel.tau > 0.0) || !(kernel.epsilon > 0.0)) throw std::invalid_argument("kernel tau/epsilon must be positive");
}

LossValues loss_values(const LossParts& parts, const Tensor& total) {
  LossValues v;
  auto get = [](const std::optional<Tensor>& t) -> std::optional<double> {
    return t ? std::optional<double>(t->item()) : std::nullopt;
  };
  v.l1 = get(parts.l1);
  v.l2 = get(parts.l2);
  v.l4 = get(parts.l4);
  v.l5 = get(parts.l5);
  v.l6 = get(parts.l6);
  v.total = total.item();
  return v;
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    throw ShapeError(fmt::format("cross_entropy: logits {} for {} targets", shape_str(logits.shape()), targets.size()));
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<double> onehot(n * c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= c) throw std::out_of_range(fmt::format("cross_entropy: target {} >= {} classes", targets[i], c));
    onehot[i * c + targets[i]] = 1.0;
  }
  return mul_scalar(sum(mul(Tensor({n, c}, std::move(onehot)), log_softmax(logits, 1))), -1.0 / static_cast<double>(n));
}

Tensor balanced_bce_with_logits(const Tensor& logits, std::span<const std::uint8_t> targets) {
  if (logits.size() != targets.size()) {
    throw ShapeError(fmt::format("balanced_bce: logits {} for {} targets", shape_str(logits.shape()), targets.size()));
  }
  const std::size_t n = targets.size();
  std::vector<double> y(n);
  std::size_t ones = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = targets[i] ? 1.0 : 0.0;
    ones += targets[i] ? 1 : 0;
  }
  const BalanceWeights w = balance_weights(ones, n - ones);
  const Tensor z = reshape(logits, {n});
  const Tensor t({n}, std::move(y));
  const Tensor pos = sum(mul(t, log_sigmoid(z)));
  const Tensor negative = sum(mul(1.0 - t, log_sigmoid(neg(z))));
  return mul_scalar(add(mul_scalar(pos, w.positive), mul_scalar(negative, w.negative)), -1.0 / static_cast<double>(n));
}

L3Parts loss_segmentation(const Tensor& class_logits, const Tensor& segment_logits, std::size_t category,
                          std::span<const std::size_t> stroke_components, double lambda_s) {
  const std::size_t y[] = {category};
  Tensor l4 = cross_entropy(class_logits, y);
  Tensor l5 = cross_entropy(segment_logits, stroke_components);
  Tensor l3 = add(l4, mul_scalar(l5, lambda_s));
  return {std::move(l3), std::move(l4), std::move(l5)};
}

L3Parts loss_prior(const Tensor& class_logits, const Tensor& existence_logits, std::size_t category,
                   std::span<const std::uint8_t> composition, double lambda_c) {
  const std::size_t y[] = {category};
  Tensor l4 = cross_entropy(class_logits, y);
  Tensor l6 = balanced_bce_with_logits(existence_logits, composition);
  Tensor l3 = add(l4, mul_scalar(l6, lambda_c));
  return {std::move(l3), std::move(l4), std::move(l6)};
}

Tensor total_loss(const LossParts& parts, const ScenarioConfig& scenario) {
  auto need = [](const std::optional<Tensor>& t, const char* name) -> const Tensor& {
    if (!t) throw std::invalid_argument(fmt::format("total_loss: missing {}", name));
    return *t;
  };
  const LossWeights& w = scenario.weights;
  Tensor keys = mul_scalar(need(parts.l1, "L1"), w.lambda1);
  const Tensor& l4 = need(parts.l4, "L4");
  switch (scenario.scenario) {
    case Scenario::kLabelsFull: {
      const Tensor l3 = add(l4, mul_scalar(need(parts.l5, "L5"), w.lambda_s));
      return add(add(keys, mul_scalar(need(parts.l2, "L2"), w.lambda2)), l3);
    }
    case Scenario::kPriorInfo: return add(keys, add(l4, mul_scalar(need(parts.l6, "L6"), w.lambda_c)));
    case Scenario::kCategoryOnly: return add(keys, l4);
  }
  throw std::invalid_argument("total_loss: unknown scenario");
}

SsrModel::SsrModel(const ModelConfig& model, const ScenarioConfig& scenario, LabelSpace labels, std::uint64_t seed)
    : model_(model), scenario_(scenario), labels_(std::move(labels)) {
  model_.validate();
  scenario_.validate();
  labels_.validate();
  if (scenario_.scenario == Scenario::kPriorInfo && !labels_.has_composition()) {
    throw std::invalid_argument("prior_info needs a composition table in the label space");
  }
  Rng rng(seed);
  const std::size_t d = model_.width;
  const std::size_t k = labels_.num_components();
  embedding_ = StrokeEmbedding(params_, d, model_.max_strokes, rng);
  graph_ = GraphModule(params_, d, model_.graph, rng);
  memory_ = SemanticMemory(params_, k, model_.memory_heads, d, model_.kernel, rng);
  TransformerConfig tc;
  tc.width = d;
  tc.layers = model_.transformer_layers;
  tc.heads = model_.transformer_heads;
  tc.mlp_ratio = model_.mlp_ratio;
  tc.max_tokens = std::max(model_.max_strokes, k);
  encoder_ = TransformerEncoder(params_, tc, rng);
  heads_.category = Linear(params_, "head.category", d, labels_.num_categories(), rng);
  heads_.segment = Linear(params_, "head.segment", d, k, rng);
  heads_.existence = Linear(params_, "head.existence", d, 1, rng);
}

ForwardResult SsrModel::forward(const Sketch& sketch) const {
  ForwardResult r;
  r.embeddings = embedding_.embed(sketch);
  r.q = graph_(r.embeddings, &r.knn);
  r.assignment = memory_.parse(r.q);
  r.epsilon_ok = kernel_epsilon_ok(r.q, memory_.bank(), memory_.kernel());
  if (scenario_.path == TokenPath::kStroke) {
    const StrokeFusion mode = scenario_.fusion == FusionMode::kConvex     ? StrokeFusion::kConvex
                              : scenario_.fusion == FusionMode::kKeysOnly ? StrokeFusion::kKeysOnly
                                                                          : StrokeFusion::kStrokesOnly;
    r.tokens = fuse_stroke_level(r.q, r.assignment, memory_.bank(), mode);
  } else {
    const ComponentFusion mode =
        scenario_.fusion == FusionMode::kConvex ? ComponentFusion::kConvex : ComponentFusion::kStrokesOnly;
    r.tokens = fuse_component_level(r.q, r.assignment, memory_.bank(), mode);
  }
  r.encoded = encoder_.encode(r.tokens);
  r.class_logits = heads_.category(r.encoded.class_out);
  if (scenario_.path == TokenPath::kStroke) {
    r.segment_logits = heads_.segment(r.encoded.token_outs);
  } else {
    r.existence_logits = heads_.existence(r.encoded.token_outs);
  }
  return r;
}

LossParts SsrModel::losses(const ForwardResult& fwd, const Sketch& sketch, bool include_l1) const {
  LossParts parts;
  if (include_l1) parts.l1 = memory_.key_loss();
  switch (scenario_.scenario) {
    case Scenario::kLabelsFull: {
      if (!sketch.stroke_components) throw std::invalid_argument("labels_full: sketch has no stroke labels");
      parts.l2 = assignment_loss(fwd.assignment.c, *sketch.stroke_components);
      L3Parts l3 = loss_segmentation(fwd.class_logits, *fwd.segment_logits, sketch.category,
                                     *sketch.stroke_components, scenario_.weights.lambda_s);
      parts.l4 = l3.l4;
      parts.l5 = l3.aux;
      break;
    }
    case Scenario::kPriorInfo: {
      const auto ye = labels_.composition_vector(sketch.category);
      L3Parts l3 = loss_prior(fwd.class_logits, *fwd.existence_logits, sketch.category, ye,
                              scenario_.weights.lambda_c);
      parts.l4 = l3.l4;
      parts.l6 = l3.aux;
      break;
    }
    case Scenario::kCategoryOnly: {
      const std::size_t y[] = {sketch.category};
      parts.l4 = cross_entropy(fwd.class_logits, y);
      break;
    }
  }
  return parts;
}

Prediction SsrModel::predict(const Sketch& sketch) const { return predict(forward(sketch)); }

Prediction SsrModel::predict(const ForwardResult& fwd) const {
  Prediction p;
  const Tensor probs = softmax(fwd.class_logits.detach(), 1);
  p.category_probs.assign(probs.values().begin(), probs.values().end());
  p.category = static_cast<std::size_t>(std::max_element(p.category_probs.begin(), p.category_probs.end()) -
                                        p.category_probs.begin());
  if (fwd.segment_logits) {
    const Tensor sp = softmax(fwd.segment_logits->detach(), 1);
    const std::size_t n = sp.dim(0), k = sp.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = sp.values().subspan(i * k, k);
      const auto it = std::max_element(row.begin(), row.end());
      p.stroke_components.push_back(static_cast<std::size_t>(it - row.begin()));
      p.stroke_confidence.push_back(*it);
    }
  }
  if (fwd.existence_logits) {
    const Tensor ep = sigmoid(fwd.existence_logits->detach());
    p.existence_probs.assign(ep.values().begin(), ep.values().end());
  }
  p.assigned_components = fwd.assignment.hard_assignment();
  const std::size_t n = fwd.assignment.strokes(), k = fwd.assignment.components();
  const auto c = fwd.assignment.c.values();
  for (std::size_t i = 0; i < n; ++i) p.assignment.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(i * k),
                                                                c.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
  p.head_choice = fwd.assignment.head_choice;
  return p;
}

}  // namespace ssr
