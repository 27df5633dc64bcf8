#include "ssr/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace ssr {

LstmDirection::LstmDirection(ParameterSet& params, const std::string& name, std::size_t input,
                             std::size_t h, Rng& rng)
    : hidden(h) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  w_ih = params.uniform(name + ".w_ih", {input, 4 * h}, bound, rng);
  w_hh = params.uniform(name + ".w_hh", {h, 4 * h}, bound, rng);
  bias = params.uniform(name + ".bias", {4 * h}, bound, rng);
}

Tensor LstmDirection::run(std::span<const Stroke> strokes, bool reversed) const {
  const std::size_t s_count = strokes.size();
  const std::size_t h = hidden;
  std::size_t steps = 0;
  for (const auto& s : strokes) steps = std::max(steps, s.size());

  // Time-major input [steps * S, 4]: (x, y, touching, lifting), zero padded.
  std::vector<double> x(steps * s_count * 4, 0.0);
  for (std::size_t i = 0; i < s_count; ++i) {
    const auto& pts = strokes[i].points();
    for (std::size_t t = 0; t < pts.size(); ++t) {
      const auto& p = pts[reversed ? pts.size() - 1 - t : t];
      double* row = x.data() + (t * s_count + i) * 4;
      row[0] = p.x;
      row[1] = p.y;
      row[2] = p.pen == PenState::kTouching ? 1.0 : 0.0;
      row[3] = p.pen == PenState::kLifting ? 1.0 : 0.0;
    }
  }
  const Tensor projected = add(matmul(Tensor({steps * s_count, 4}, std::move(x)), w_ih), bias);

  Tensor hs = Tensor::zeros({s_count, h});
  Tensor cs = Tensor::zeros({s_count, h});
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor z = add(slice(projected, 0, t * s_count, (t + 1) * s_count), matmul(hs, w_hh));
    const Tensor gates = sigmoid(slice(z, 1, 0, 3 * h));
    const Tensor in_gate = slice(gates, 1, 0, h);
    const Tensor forget_gate = slice(gates, 1, h, 2 * h);
    const Tensor out_gate = slice(gates, 1, 2 * h, 3 * h);
    const Tensor cell = tanh(slice(z, 1, 3 * h, 4 * h));
    const Tensor c_next = add(mul(forget_gate, cs), mul(in_gate, cell));
    const Tensor h_next = mul(out_gate, tanh(c_next));

    bool all_active = true;
    std::vector<double> mask(s_count * h);
    for (std::size_t i = 0; i < s_count; ++i) {
      const bool active = t < strokes[i].size();
      all_active = all_active && active;
      std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(i * h), h, active ? 1.0 : 0.0);
    }
    if (all_active) {
      cs = c_next;
      hs = h_next;
    } else {
      // Finished sequences hold their last state.
      const Tensor m({s_count, h}, std::move(mask));
      cs = add(cs, mul(m, sub(c_next, cs)));
      hs = add(hs, mul(m, sub(h_next, hs)));
    }
  }
  return hs;
}

StrokeEmbedding::StrokeEmbedding(ParameterSet& params, std::size_t width, std::size_t max_strokes, Rng& rng)
    : width_(width), max_strokes_(max_strokes) {
  if (width == 0 || width % 2 != 0) {
    throw std::invalid_argument(fmt::format("embedding width must be even and positive, got {}", width));
  }
  forward_ = LstmDirection(params, "embed.lstm_fwd", 4, width / 2, rng);
  backward_ = LstmDirection(params, "embed.lstm_bwd", 4, width / 2, rng);
  shape_out_ = Linear(params, "embed.shape_out", width, width, rng);
  order_table_ = params.normal("embed.order", {max_strokes, width}, kInitStd, rng);
  location_ = Linear(params, "embed.location", 2, width, rng);
}

Tensor StrokeEmbedding::shape_embed(std::span<const Stroke> strokes) const {
  for (const auto& s : strokes)
    if (s.size() == 0) throw std::invalid_argument("shape_embed: empty stroke");
  return shape_out_(concat({forward_.run(strokes, false), backward_.run(strokes, true)}, 1));
}

Tensor StrokeEmbedding::shape_embed(const Stroke& stroke) const {
  return reshape(shape_embed(std::span<const Stroke>(&stroke, 1)), {width_});
}

Tensor StrokeEmbedding::order_embed(std::size_t index) const {
  if (index >= max_strokes_) {
    throw std::out_of_range(fmt::format("order index {} out of range (max_strokes {})", index, max_strokes_));
  }
  const std::size_t idx[] = {index};
  return reshape(gather_rows(order_table_, idx), {width_});
}

Tensor StrokeEmbedding::location_embed(const Point& p) const {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("location_embed: non-finite point");
  return reshape(location_(Tensor({1, 2}, {p.x, p.y})), {width_});
}

Tensor StrokeEmbedding::embed(const Sketch& sketch) const {
  const std::size_t n = sketch.num_strokes();
  if (n == 0) throw std::invalid_argument("embed: sketch has no strokes");
  if (n > max_strokes_) {
    throw std::out_of_range(fmt::format("embed: {} strokes exceeds max_strokes {}", n, max_strokes_));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> first(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    first[2 * i] = sketch.strokes[i].front().x;
    first[2 * i + 1] = sketch.strokes[i].front().y;
  }
  const Tensor shape = shape_embed(sketch.strokes);
  const Tensor ord = gather_rows(order_table_, order);
  const Tensor loc = location_(Tensor({n, 2}, std::move(first)));
  return add(add(shape, ord), loc);
}

}  // namespace ssr
