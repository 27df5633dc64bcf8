#include "ssr/scm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace ssr {
namespace {

void require_finite(const Tensor& t, const char* what) {
  for (double v : t.values())
    if (!std::isfinite(v)) throw std::invalid_argument(fmt::format("{}: non-finite input", what));
}

}  // namespace

MemoryBank::MemoryBank(ParameterSet& params, std::size_t components, std::size_t heads, std::size_t width,
                       Rng& rng)
    : keys_(params.normal("scm.keys", {components, heads, width}, kInitStd, rng)) {}

MemoryBank::MemoryBank(Tensor keys) : keys_(std::move(keys)) {
  if (keys_.rank() != 3) throw ShapeError("memory keys must be [K, H, d], got " + shape_str(keys_.shape()));
}

Tensor MemoryBank::flat() const { return reshape(keys_, {components() * heads(), width()}); }

std::vector<std::size_t> AssignmentMatrix::hard_assignment() const {
  const std::size_t n = strokes(), k = components();
  std::vector<std::size_t> out(n);
  const auto v = c.values();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::size_t>(std::max_element(v.begin() + static_cast<std::ptrdiff_t>(i * k),
                                                       v.begin() + static_cast<std::ptrdiff_t>((i + 1) * k)) -
                                      (v.begin() + static_cast<std::ptrdiff_t>(i * k)));
  }
  return out;
}

Tensor kernel_scores(const Tensor& q, const MemoryBank& bank, const KernelConfig& cfg) {
  if (q.rank() != 2 || q.dim(1) != bank.width()) {
    throw ShapeError(fmt::format("kernel_scores: stroke features {} vs keys {}", shape_str(q.shape()),
                                 shape_str(bank.keys().shape())));
  }
  if (!(cfg.tau > 0.0) || !(cfg.epsilon > 0.0)) throw std::invalid_argument("kernel_scores: tau and epsilon must be positive");
  require_finite(q, "kernel_scores");
  require_finite(bank.keys(), "kernel_scores");
  const std::size_t n = q.dim(0), k = bank.components(), h = bank.heads();
  const Tensor dist = reshape(squared_distance(q, bank.flat()), {n, k, h});
  const Tensor sim = pow(add_scalar(mul_scalar(dist, 1.0 / cfg.tau), cfg.epsilon), -(cfg.tau + 1.0) / 2.0);
  return div(sim, sum(sim, 1, /*keepdim=*/true));
}

bool kernel_epsilon_ok(const Tensor& q, const MemoryBank& bank, const KernelConfig& cfg) {
  const Tensor dist = squared_distance(q.detach(), bank.flat().detach());
  double total = 0.0;
  for (double v : dist.values()) total += v / cfg.tau;
  return cfg.epsilon < 0.01 * total / static_cast<double>(dist.size());
}

AssignmentMatrix assign(const Tensor& scores) {
  if (scores.rank() != 3) throw ShapeError("assign: scores must be [N, K, H], got " + shape_str(scores.shape()));
  MaxResult pooled = max(scores, 2);
  AssignmentMatrix a;
  a.c = softmax(pooled.values, 1);
  a.head_choice = std::move(pooled.indices);
  a.max_conf = max(a.c, 1, /*keepdim=*/true).values;
  return a;
}

Tensor assigned_keys(const AssignmentMatrix& a, const MemoryBank& bank) {
  const std::size_t n = a.strokes(), k = a.components(), h = bank.heads();
  if (k != bank.components()) throw ShapeError("assigned_keys: assignment width differs from component count");
  std::vector<std::size_t> rows(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) rows[i * k + j] = j * h + a.head_choice[i * k + j];
  const Tensor selected = reshape(gather_rows(bank.flat(), rows), {n, k, bank.width()});
  return sum(mul(reshape(a.c, {n, k, 1}), selected), 1);
}

Tensor fuse_stroke_level(const Tensor& q, const AssignmentMatrix& a, const MemoryBank& bank, StrokeFusion mode) {
  switch (mode) {
    case StrokeFusion::kStrokesOnly: return q;
    case StrokeFusion::kKeysOnly: return assigned_keys(a, bank);
    case StrokeFusion::kConvex: {
      const Tensor& conf = a.max_conf;
      return add(mul(1.0 - conf, q), mul(conf, assigned_keys(a, bank)));
    }
  }
  throw std::invalid_argument("fuse_stroke_level: unknown mode");
}

std::vector<std::size_t> majority_heads(const AssignmentMatrix& a, std::size_t heads) {
  const std::size_t n = a.strokes(), k = a.components();
  std::vector<std::size_t> out(k, 0);
  std::vector<std::size_t> votes(heads);
  for (std::size_t j = 0; j < k; ++j) {
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++votes[a.head_choice[i * k + j]];
    out[j] = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return out;
}

Tensor fuse_component_level(const Tensor& q, const AssignmentMatrix& a, const MemoryBank& bank,
                            ComponentFusion mode) {
  const Tensor pooled = matmul(transpose(a.c), q);
  switch (mode) {
    case ComponentFusion::kStrokesOnly: return pooled;
    case ComponentFusion::kConvex: {
      const std::size_t k = a.components(), h = bank.heads();
      const Tensor g = reshape(max(a.c, 0).values, {k, 1});
      std::vector<std::size_t> rows = majority_heads(a, h);
      for (std::size_t j = 0; j < k; ++j) rows[j] += j * h;
      const Tensor key_rows = gather_rows(bank.flat(), rows);
      return add(mul(1.0 - g, pooled), mul(g, key_rows));
    }
  }
  throw std::invalid_argument("fuse_component_level: unknown mode");
}

BalanceWeights balance_weights(std::size_t ones, std::size_t zeros) {
  if (ones == 0 || zeros == 0) return {1.0, 1.0};
  const double total = static_cast<double>(ones + zeros);
  return {static_cast<double>(zeros) / total, static_cast<double>(ones) / total};
}

Tensor key_classifier_loss(const MemoryBank& bank, const Linear& classifier) {
  const std::size_t k = bank.components(), h = bank.heads();
  if (classifier.out_features() != k) throw ShapeError("key classifier width differs from component count");
  const Tensor logp = log_softmax(classifier(bank.flat()), 1);
  std::vector<double> target(k * h * k, 0.0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t hh = 0; hh < h; ++hh) target[(j * h + hh) * k + j] = 1.0;
  return mul_scalar(sum(mul(Tensor({k * h, k}, std::move(target)), logp)), -1.0 / static_cast<double>(k * h));
}

Tensor assignment_loss(const Tensor& c, std::span<const std::size_t> stroke_components) {
  const std::size_t n = c.dim(0), k = c.dim(1);
  if (stroke_components.size() != n) {
    throw ShapeError(fmt::format("assignment_loss: {} labels for {} strokes", stroke_components.size(), n));
  }
  std::vector<double> gt(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (stroke_components[i] >= k) throw std::out_of_range("assignment_loss: component id out of range");
    gt[i * k + stroke_components[i]] = 1.0;
  }
  const BalanceWeights w = balance_weights(n, n * k - n);
  const Tensor target({n, k}, std::move(gt));
  const Tensor clamped = clamp(c, 1e-12, 1.0 - 1e-12);
  const Tensor pos = sum(mul(target, log(clamped)));
  const Tensor negative = sum(mul(1.0 - target, log(1.0 - clamped)));
  return mul_scalar(add(mul_scalar(pos, w.positive), mul_scalar(negative, w.negative)),
                    -1.0 / static_cast<double>(n * k));
}

SemanticMemory::SemanticMemory(ParameterSet& params, std::size_t components, std::size_t heads,
                               std::size_t width, KernelConfig kernel, Rng& rng)
    : bank_(params, components, heads, width, rng),
      classifier_(params, "scm.key_classifier", width, components, rng),
      kernel_(kernel) {}

}  // namespace ssr
