#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ssr {

/// Fraction of samples whose predicted category equals the label.
double acc_at_1(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);

/// Correctly labeled strokes over all strokes, pooled across sketches.
double c_metric(const std::vector<std::vector<std::size_t>>& predicted,
                const std::vector<std::vector<std::size_t>>& labels);

/// Per-component existence accuracy at threshold 0.5, pooled over samples.
double existence_accuracy(const std::vector<std::vector<double>>& probabilities,
                          const std::vector<std::vector<std::uint8_t>>& targets);

}  // namespace ssr
