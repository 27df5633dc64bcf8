#pragma once

#include <cstddef>
#include <span>

#include "ssr/nn.hpp"
#include "ssr/sketch.hpp"

namespace ssr {

/// Single-layer LSTM over a batch of variable-length point sequences.
/// Gate columns are laid out [input | forget | output | cell].
struct LstmDirection {
  Tensor w_ih;  // [4, 4h]
  Tensor w_hh;  // [h, 4h]
  Tensor bias;  // [4h]
  std::size_t hidden = 0;

  LstmDirection() = default;
  LstmDirection(ParameterSet& params, const std::string& name, std::size_t input, std::size_t hidden, Rng& rng);

  /// Final hidden state per sequence, [S, h]. `reversed` feeds each
  /// sequence back to front.
  Tensor run(std::span<const Stroke> strokes, bool reversed) const;
};

/// Stroke embedding: shape (bidirectional LSTM) + order (learned table) +
/// location (linear map of the first point).
class StrokeEmbedding {
 public:
  StrokeEmbedding() = default;
  StrokeEmbedding(ParameterSet& params, std::size_t width, std::size_t max_strokes, Rng& rng);

  /// Shape embeddings of all strokes at once, [N, d].
  Tensor shape_embed(std::span<const Stroke> strokes) const;
  /// [d] shape embedding of a single stroke.
  Tensor shape_embed(const Stroke& stroke) const;
  /// [d] row of the order table.
  Tensor order_embed(std::size_t index) const;
  /// [d] linear embedding of a point's coordinates.
  Tensor location_embed(const Point& first_point) const;

  /// [N, d]: row i = shape(s_i) + order(i) + location(first point of s_i).
  Tensor embed(const Sketch& sketch) const;

  std::size_t width() const { return width_; }
  std::size_t max_strokes() const { return max_strokes_; }

  const Tensor& order_table() const { return order_table_; }
  const Linear& location() const { return location_; }

 private:
  std::size_t width_ = 0;
  std::size_t max_strokes_ = 0;
  LstmDirection forward_;
  LstmDirection backward_;
  Linear shape_out_;
  Tensor order_table_;
  Linear location_;
};

}  // namespace ssr
