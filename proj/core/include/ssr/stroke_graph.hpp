#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ssr/nn.hpp"

namespace ssr {

/// Directed stroke graph. Edge (src, dst) carries src's feature to dst.
struct StrokeGraph {
  std::size_t num_nodes = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::size_t in_degree(std::size_t node) const;
  /// Union with another graph on the same nodes; duplicate edges dropped,
  /// order is this graph's edges then the new ones.
  StrokeGraph unite(const StrokeGraph& other) const;
};

/// Bidirectional edges between consecutive strokes.
StrokeGraph build_sequential_graph(std::size_t n);

struct KnnStats {
  /// Nodes for which k * dilation exceeded the available neighbors.
  std::size_t clamped = 0;
};

/// For each node, sorts the other nodes by Euclidean distance (ties to the
/// lower index) and keeps ranks dilation, 2*dilation, ..., k*dilation as
/// incoming edges. When fewer than k*dilation neighbors exist the stride
/// runs over what is available; if even rank `dilation` is missing, the
/// farthest neighbor is used.
StrokeGraph dilated_knn(const Tensor& features, std::size_t k, std::size_t dilation,
                        KnnStats* stats = nullptr);

/// EdgeConv layer with residual: x_i' = x_i + max_j MLP([x_i, x_j - x_i]).
/// The MLP is Linear(2d, d) -> GELU -> Linear(d, d).
struct EdgeConvLayer {
  Linear hidden;
  Linear out;

  EdgeConvLayer() = default;
  EdgeConvLayer(ParameterSet& params, const std::string& name, std::size_t width, Rng& rng);

  /// Edge-MLP outputs, one row per edge.
  Tensor edge_messages(const Tensor& x, const StrokeGraph& graph) const;
  Tensor operator()(const Tensor& x, const StrokeGraph& graph) const;
};

struct GraphConfig {
  std::size_t k = 4;
  std::size_t dilation1 = 1;
  std::size_t dilation2 = 2;
};

/// Two dynamic EdgeConv layers. Layer 1 runs on sequential edges united with
/// a dilation-1 k-NN graph of the input; layer 2 runs on a dilation-2 k-NN
/// graph recomputed from layer 1's output.
class GraphModule {
 public:
  GraphModule() = default;
  GraphModule(ParameterSet& params, std::size_t width, GraphConfig config, Rng& rng);

  Tensor operator()(const Tensor& embeddings, KnnStats* stats = nullptr) const;

  const GraphConfig& config() const { return config_; }
  const EdgeConvLayer& layer(std::size_t i) const { return i == 0 ? layer1_ : layer2_; }

 private:
  GraphConfig config_;
  EdgeConvLayer layer1_;
  EdgeConvLayer layer2_;
};

}  // namespace ssr
