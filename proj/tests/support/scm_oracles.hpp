#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ssr/scm.hpp"

namespace ssr::testing {

/// Plain-loop kernel scores, flattened [N][K][H].
inline std::vector<double> naive_scores(const Tensor& q, const Tensor& keys, double tau, double eps) {
  const std::size_t n = q.dim(0), k = keys.dim(0), h = keys.dim(1), d = keys.dim(2);
  std::vector<double> out(n * k * h);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t hh = 0; hh < h; ++hh) {
      double total = 0;
      for (std::size_t j = 0; j < k; ++j) {
        double dist = 0;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = q.at(i, c) - keys.at((j * h + hh) * d + c);
          dist += diff * diff;
        }
        const double s = std::pow(eps + dist / tau, -(tau + 1) / 2);
        out[(i * k + j) * h + hh] = s;
        total += s;
      }
      for (std::size_t j = 0; j < k; ++j) out[(i * k + j) * h + hh] /= total;
    }
  return out;
}

/// Stroke-level fusion by explicit loops over strokes, components and columns.
inline std::vector<double> naive_stroke_fusion(const Tensor& q, const AssignmentMatrix& a, const MemoryBank& bank,
                                               StrokeFusion mode) {
  const std::size_t n = q.dim(0), d = q.dim(1), k = bank.components(), h = bank.heads();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double conf = 0;
    for (std::size_t j = 0; j < k; ++j) conf = std::max(conf, a.c.at(i, j));
    for (std::size_t c = 0; c < d; ++c) {
      double ck = 0;
      for (std::size_t j = 0; j < k; ++j)
        ck += a.c.at(i, j) * bank.keys().at((j * h + a.head_choice[i * k + j]) * d + c);
      const double qv = q.at(i, c);
      out[i * d + c] = mode == StrokeFusion::kConvex     ? (1 - conf) * qv + conf * ck
                       : mode == StrokeFusion::kKeysOnly ? ck
                                                         : qv;
    }
  }
  return out;
}

/// Component-level fusion by explicit loops, with majority-vote heads.
inline std::vector<double> naive_component_fusion(const Tensor& q, const AssignmentMatrix& a, const MemoryBank& bank,
                                                  ComponentFusion mode) {
  const std::size_t n = q.dim(0), d = q.dim(1), k = bank.components(), h = bank.heads();
  std::vector<double> out(k * d);
  for (std::size_t j = 0; j < k; ++j) {
    double g = 0;
    std::vector<std::size_t> votes(h, 0);
    for (std::size_t i = 0; i < n; ++i) {
      g = std::max(g, a.c.at(i, j));
      ++votes[a.head_choice[i * k + j]];
    }
    std::size_t head = 0;
    for (std::size_t hh = 1; hh < h; ++hh)
      if (votes[hh] > votes[head]) head = hh;
    for (std::size_t c = 0; c < d; ++c) {
      double pooled = 0;
      for (std::size_t i = 0; i < n; ++i) pooled += a.c.at(i, j) * q.at(i, c);
      const double key = bank.keys().at((j * h + head) * d + c);
      out[j * d + c] = mode == ComponentFusion::kConvex ? (1 - g) * pooled + g * key : pooled;
    }
  }
  return out;
}

}  // namespace ssr::testing
