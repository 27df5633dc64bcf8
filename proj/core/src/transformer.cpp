#include "ssr/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace ssr {

void TransformerConfig::validate() const {
  if (width == 0 || heads == 0 || width % heads != 0) {
    throw std::invalid_argument(fmt::format("transformer width {} not divisible by {} heads", width, heads));
  }
  if (layers == 0) throw std::invalid_argument("transformer needs at least one layer");
  if (max_tokens == 0) throw std::invalid_argument("transformer max_tokens must be positive");
}

TransformerEncoder::TransformerEncoder(ParameterSet& params, const TransformerConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  const std::size_t d = config_.width;
  class_token_ = params.normal("transformer.class_token", {1, d}, kInitStd, rng);
  positions_ = params.normal("transformer.positions", {config_.max_tokens + 1, d}, kInitStd, rng);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = fmt::format("transformer.block{}", l);
    blocks_.push_back({LayerNorm(params, p + ".norm1", d), Linear(params, p + ".qkv", d, 3 * d, rng),
                       Linear(params, p + ".proj", d, d, rng), LayerNorm(params, p + ".norm2", d),
                       Linear(params, p + ".fc1", d, config_.mlp_ratio * d, rng),
                       Linear(params, p + ".fc2", config_.mlp_ratio * d, d, rng)});
  }
  final_norm_ = LayerNorm(params, "transformer.norm", d);
}

Tensor TransformerEncoder::block_forward(const EncoderBlock& block, const Tensor& x, const Tensor* mask_bias) const {
  const std::size_t d = config_.width;
  const std::size_t dh = d / config_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tensor qkv = block.qkv(block.norm1(x));
  std::vector<Tensor> heads;
  heads.reserve(config_.heads);
  for (std::size_t h = 0; h < config_.heads; ++h) {
    const Tensor q = slice(qkv, 1, h * dh, (h + 1) * dh);
    const Tensor k = slice(qkv, 1, d + h * dh, d + (h + 1) * dh);
    const Tensor v = slice(qkv, 1, 2 * d + h * dh, 2 * d + (h + 1) * dh);
    Tensor scores = mul_scalar(matmul(q, transpose(k)), scale);
    if (mask_bias) scores = add(scores, *mask_bias);
    heads.push_back(matmul(softmax(scores, 1), v));
  }
  const Tensor attended = add(x, block.proj(concat(heads, 1)));
  return add(attended, block.fc2(gelu(block.fc1(block.norm2(attended)))));
}

EncoderOutput TransformerEncoder::encode(const Tensor& tokens, const std::vector<bool>& valid) const {
  const std::size_t d = config_.width;
  if (tokens.rank() != 2 || tokens.dim(1) != d) {
    throw ShapeError(fmt::format("encode: tokens {} do not have width {}", shape_str(tokens.shape()), d));
  }
  const std::size_t t = tokens.dim(0);
  if (t > config_.max_tokens) {
    throw std::out_of_range(fmt::format("encode: {} tokens exceeds max_tokens {}", t, config_.max_tokens));
  }
  if (!valid.empty() && valid.size() != t) {
    throw ShapeError(fmt::format("encode: mask has {} entries for {} tokens", valid.size(), t));
  }

  Tensor x = add(concat({class_token_, tokens}, 0), slice(positions_, 0, 0, t + 1));

  // Additive key mask: masked columns get a bias that underflows exp to 0.
  Tensor mask_bias;
  bool any_masked = false;
  for (bool v : valid) any_masked = any_masked || !v;
  if (any_masked) {
    std::vector<double> bias((t + 1) * (t + 1), 0.0);
    for (std::size_t r = 0; r <= t; ++r)
      for (std::size_t c = 1; c <= t; ++c)
        if (!valid[c - 1]) bias[r * (t + 1) + c] = -1e30;
    mask_bias = Tensor({t + 1, t + 1}, std::move(bias));
  }
  for (const auto& block : blocks_) x = block_forward(block, x, any_masked ? &mask_bias : nullptr);
  x = final_norm_(x);
  return {slice(x, 0, 0, 1), slice(x, 0, 1, t + 1)};
}

}  // namespace ssr
