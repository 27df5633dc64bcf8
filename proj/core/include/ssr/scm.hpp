#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ssr/nn.hpp"

namespace ssr {

/// Student-t kernel settings: tau is the degrees of freedom, epsilon the
/// bias added to every scaled squared distance.
struct KernelConfig {
  double tau = 1.0;
  double epsilon = 1e-6;
};

/// K component types, each stored as H learnable key vectors of width d.
class MemoryBank {
 public:
  MemoryBank() = default;
  MemoryBank(ParameterSet& params, std::size_t components, std::size_t heads, std::size_t width, Rng& rng);
  /// Wraps an existing [K, H, d] tensor (tests, oracles).
  explicit MemoryBank(Tensor keys);

  /// [K * H, d]; row j * H + h is head h of component j.
  Tensor flat() const;
  const Tensor& keys() const { return keys_; }
  std::size_t components() const { return keys_.dim(0); }
  std::size_t heads() const { return keys_.dim(1); }
  std::size_t width() const { return keys_.dim(2); }

 private:
  Tensor keys_;  // [K, H, d]
};

/// Soft stroke-to-component assignment after head pooling.
struct AssignmentMatrix {
  Tensor c;                              // [N, K], rows sum to 1
  std::vector<std::size_t> head_choice;  // [N * K], argmax head per (stroke, component)
  Tensor max_conf;                       // [N, 1], row max of c

  std::size_t strokes() const { return c.dim(0); }
  std::size_t components() const { return c.dim(1); }
  /// argmax_j c[i, j] per stroke.
  std::vector<std::size_t> hard_assignment() const;
};

/// [N, K, H]: per head, the normalized kernel similarity between stroke
/// feature q_i and key k_{j,h}, normalized over j.
Tensor kernel_scores(const Tensor& q, const MemoryBank& bank, const KernelConfig& cfg);

/// True when epsilon is below 1% of the mean scaled squared distance.
bool kernel_epsilon_ok(const Tensor& q, const MemoryBank& bank, const KernelConfig& cfg);

/// Max-pools heads (recording the chosen head) then applies softmax over j.
AssignmentMatrix assign(const Tensor& scores);

enum class StrokeFusion { kConvex, kKeysOnly, kStrokesOnly };
enum class ComponentFusion { kConvex, kStrokesOnly };

/// [N, d]: row i = sum_j C[i, j] * key(j, head_choice[i, j]).
Tensor assigned_keys(const AssignmentMatrix& a, const MemoryBank& bank);

/// Fs [N, d]. kConvex: (1 - max_conf) * Q + max_conf * (C K_sel).
Tensor fuse_stroke_level(const Tensor& q, const AssignmentMatrix& a, const MemoryBank& bank, StrokeFusion mode);

/// Majority head per component over strokes; ties go to the lowest head.
std::vector<std::size_t> majority_heads(const AssignmentMatrix& a, std::size_t heads);

/// Fc [K, d]. kConvex: (1 - g) * (C^T Q) + g * K_bar with g_j = max_i C[i, j]
/// and K_bar the majority-head key of each component.
Tensor fuse_component_level(const Tensor& q, const AssignmentMatrix& a, const MemoryBank& bank,
                            ComponentFusion mode);

/// Positive/negative term weights of the balanced BCE: positives are
/// weighted by the fraction of zeros and negatives by the fraction of ones.
/// If one class is absent the other gets weight 1.
struct BalanceWeights {
  double positive = 1.0;
  double negative = 1.0;
};
BalanceWeights balance_weights(std::size_t ones, std::size_t zeros);

/// L1: mean cross-entropy of classifying every key head as its component.
Tensor key_classifier_loss(const MemoryBank& bank, const Linear& classifier);

/// L2: balanced negative log-likelihood of C against one-hot stroke labels,
/// averaged over the N * K entries. C is clamped to [1e-12, 1 - 1e-12].
Tensor assignment_loss(const Tensor& c, std::span<const std::size_t> stroke_components);

/// SCM parameters: memory keys plus the key classifier f_w1.
class SemanticMemory {
 public:
  SemanticMemory() = default;
  SemanticMemory(ParameterSet& params, std::size_t components, std::size_t heads, std::size_t width,
                 KernelConfig kernel, Rng& rng);

  const MemoryBank& bank() const { return bank_; }
  const Linear& key_classifier() const { return classifier_; }
  const KernelConfig& kernel() const { return kernel_; }

  AssignmentMatrix parse(const Tensor& q) const { return assign(kernel_scores(q, bank_, kernel_)); }
  Tensor key_loss() const { return key_classifier_loss(bank_, classifier_); }

 private:
  MemoryBank bank_;
  Linear classifier_;
  KernelConfig kernel_;
};

}  // namespace ssr
