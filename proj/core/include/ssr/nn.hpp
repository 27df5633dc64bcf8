#pragma once

#include <cstddef>
#include <string>

#include "ssr/ops.hpp"
#include "ssr/parameter.hpp"

namespace ssr {

inline constexpr double kInitStd = 0.02;

/// y = x W + b with W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
         double stddev = kInitStd);

  Tensor operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

/// Learned affine applied after layer_norm.
struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  LayerNorm(ParameterSet& params, const std::string& name, std::size_t width);

  Tensor operator()(const Tensor& x) const { return add(mul(layer_norm(x), gain), bias); }
};

}  // namespace ssr
