#include "ssr/metrics.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace ssr {

double acc_at_1(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size()) {
    throw std::invalid_argument(fmt::format("acc_at_1: {} predictions for {} labels", predicted.size(), labels.size()));
  }
  if (predicted.empty()) throw std::invalid_argument("acc_at_1: empty evaluation set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double c_metric(const std::vector<std::vector<std::size_t>>& predicted,
                const std::vector<std::vector<std::size_t>>& labels) {
  if (predicted.size() != labels.size()) {
    throw std::invalid_argument(fmt::format("c_metric: {} sketches predicted, {} labeled", predicted.size(), labels.size()));
  }
  std::size_t correct = 0, total = 0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (predicted[s].size() != labels[s].size()) {
      throw std::invalid_argument(fmt::format("c_metric: sketch {} has {} predictions for {} strokes", s,
                                              predicted[s].size(), labels[s].size()));
    }
    for (std::size_t i = 0; i < labels[s].size(); ++i) correct += predicted[s][i] == labels[s][i] ? 1 : 0;
    total += labels[s].size();
  }
  if (total == 0) throw std::invalid_argument("c_metric: no strokes");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double existence_accuracy(const std::vector<std::vector<double>>& probabilities,
                          const std::vector<std::vector<std::uint8_t>>& targets) {
  if (probabilities.size() != targets.size()) {
    throw std::invalid_argument("existence_accuracy: sample count mismatch");
  }
  std::size_t correct = 0, total = 0;
  for (std::size_t s = 0; s < targets.size(); ++s) {
    if (probabilities[s].size() != targets[s].size()) {
      throw std::invalid_argument(fmt::format("existence_accuracy: sample {} length mismatch", s));
    }
    for (std::size_t j = 0; j < targets[s].size(); ++j) {
      correct += (probabilities[s][j] >= 0.5) == (targets[s][j] != 0) ? 1 : 0;
    }
    total += targets[s].size();
  }
  if (total == 0) throw std::invalid_argument("existence_accuracy: empty evaluation set");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace ssr
