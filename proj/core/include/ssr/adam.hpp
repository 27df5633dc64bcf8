#pragma once

#include <cstddef>

#include "ssr/parameter.hpp"

namespace ssr {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamStepStats {
  std::size_t updated = 0;
  /// Parameters with no gradient this step; left untouched.
  std::size_t skipped = 0;
};

/// Bias-corrected Adam update over every parameter that received a gradient,
/// followed by clearing all gradients.
AdamStepStats adam_step(ParameterSet& params, const AdamConfig& config);

}  // namespace ssr
