#include "ssr/stroke_graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ssr {

std::size_t StrokeGraph::in_degree(std::size_t node) const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [node](const auto& e) { return e.second == node; }));
}

StrokeGraph StrokeGraph::unite(const StrokeGraph& other) const {
  if (other.num_nodes != num_nodes) throw std::invalid_argument("unite: graphs differ in node count");
  StrokeGraph g{num_nodes, {}};
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto* src : {&edges, &other.edges})
    for (const auto& e : *src)
      if (seen.insert(e).second) g.edges.push_back(e);
  return g;
}

StrokeGraph build_sequential_graph(std::size_t n) {
  if (n == 0) throw std::invalid_argument("build_sequential_graph: no strokes");
  StrokeGraph g{n, {}};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    g.edges.emplace_back(i, i + 1);
    g.edges.emplace_back(i + 1, i);
  }
  return g;
}

StrokeGraph dilated_knn(const Tensor& features, std::size_t k, std::size_t dilation, KnnStats* stats) {
  if (features.rank() != 2) throw std::invalid_argument("dilated_knn: features must be [N, d]");
  if (k == 0 || dilation == 0) throw std::invalid_argument("dilated_knn: k and dilation must be positive");
  const std::size_t n = features.dim(0), d = features.dim(1);
  StrokeGraph g{n, {}};
  if (n <= 1) return g;
  const auto v = features.values();
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < n; ++i) {
    ranked.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = v[i * d + c] - v[j * d + c];
        s += diff * diff;
      }
      ranked.emplace_back(s, j);
    }
    std::sort(ranked.begin(), ranked.end());
    const std::size_t available = n - 1;
    if (k * dilation > available && stats) ++stats->clamped;
    bool any = false;
    for (std::size_t m = 1; m <= k && m * dilation <= available; ++m) {
      g.edges.emplace_back(ranked[m * dilation - 1].second, i);
      any = true;
    }
    if (!any) g.edges.emplace_back(ranked.back().second, i);
  }
  return g;
}

EdgeConvLayer::EdgeConvLayer(ParameterSet& params, const std::string& name, std::size_t width, Rng& rng)
    : hidden(params, name + ".hidden", 2 * width, width, rng), out(params, name + ".out", width, width, rng) {}

Tensor EdgeConvLayer::edge_messages(const Tensor& x, const StrokeGraph& graph) const {
  std::vector<std::size_t> src, dst;
  src.reserve(graph.edges.size());
  dst.reserve(graph.edges.size());
  for (const auto& [s, t] : graph.edges) {
    src.push_back(s);
    dst.push_back(t);
  }
  const Tensor xi = gather_rows(x, dst);
  const Tensor xj = gather_rows(x, src);
  return out(gelu(hidden(concat({xi, sub(xj, xi)}, 1))));
}

Tensor EdgeConvLayer::operator()(const Tensor& x, const StrokeGraph& graph) const {
  if (x.rank() != 2 || x.dim(0) != graph.num_nodes) {
    throw std::invalid_argument("edgeconv: feature rows do not match graph nodes");
  }
  if (graph.edges.empty()) return x;
  std::vector<std::size_t> dst;
  dst.reserve(graph.edges.size());
  for (const auto& e : graph.edges) dst.push_back(e.second);
  return add(x, segment_max(edge_messages(x, graph), dst, graph.num_nodes));
}

GraphModule::GraphModule(ParameterSet& params, std::size_t width, GraphConfig config, Rng& rng)
    : config_(config),
      layer1_(params, "graph.layer1", width, rng),
      layer2_(params, "graph.layer2", width, rng) {}

Tensor GraphModule::operator()(const Tensor& embeddings, KnnStats* stats) const {
  const std::size_t n = embeddings.dim(0);
  const StrokeGraph g1 =
      build_sequential_graph(n).unite(dilated_knn(embeddings, config_.k, config_.dilation1, stats));
  const Tensor x1 = layer1_(embeddings, g1);
  const StrokeGraph g2 = dilated_knn(x1, config_.k, config_.dilation2, stats);
  return layer2_(x1, g2);
}

}  // namespace ssr
