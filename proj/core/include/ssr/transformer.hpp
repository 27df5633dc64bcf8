#pragma once

#include <cstddef>
#include <vector>

#include "ssr/nn.hpp"

namespace ssr {

struct TransformerConfig {
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  /// Longest token sequence, excluding the class token.
  std::size_t max_tokens = 64;

  void validate() const;
};

/// Pre-norm block: x += MHSA(LN(x)); x += MLP(LN(x)).
struct EncoderBlock {
  LayerNorm norm1;
  Linear qkv;
  Linear proj;
  LayerNorm norm2;
  Linear fc1;
  Linear fc2;
};

struct EncoderOutput {
  Tensor class_out;   // [1, d]
  Tensor token_outs;  // [T, d]
};

/// ViT-style encoder with a learned class token and learned positional
/// embeddings (position 0 belongs to the class token).
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(ParameterSet& params, const TransformerConfig& config, Rng& rng);

  /// `valid[t] == false` removes token t from attention entirely: it is
  /// neither a key nor does its output influence any other position.
  /// An empty `valid` means every token is valid.
  EncoderOutput encode(const Tensor& tokens, const std::vector<bool>& valid = {}) const;

  const TransformerConfig& config() const { return config_; }

 private:
  Tensor block_forward(const EncoderBlock& block, const Tensor& x, const Tensor* mask_bias) const;

  TransformerConfig config_;
  Tensor class_token_;  // [1, d]
  Tensor positions_;    // [max_tokens + 1, d]
  std::vector<EncoderBlock> blocks_;
  LayerNorm final_norm_;
};

}  // namespace ssr
