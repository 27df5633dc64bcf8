#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ssr/embedding.hpp"
#include "test_util.hpp"

namespace ssr {
namespace {

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain-loop LSTM over one stroke; returns the final hidden state.
std::vector<double> naive_lstm(const LstmDirection& dir, const Stroke& stroke, bool reversed) {
  const std::size_t h = dir.hidden;
  std::vector<double> hs(h, 0.0), cs(h, 0.0);
  const auto& pts = stroke.points();
  for (std::size_t t = 0; t < pts.size(); ++t) {
    const Point& p = pts[reversed ? pts.size() - 1 - t : t];
    const double in[4] = {p.x, p.y, p.pen == PenState::kTouching ? 1.0 : 0.0, p.pen == PenState::kLifting ? 1.0 : 0.0};
    std::vector<double> z(4 * h);
    for (std::size_t g = 0; g < 4 * h; ++g) {
      double acc = dir.bias.at(g);
      for (std::size_t k = 0; k < 4; ++k) acc += in[k] * dir.w_ih.at(k, g);
      for (std::size_t k = 0; k < h; ++k) acc += hs[k] * dir.w_hh.at(k, g);
      z[g] = acc;
    }
    for (std::size_t k = 0; k < h; ++k) {
      const double i = sigm(z[k]), f = sigm(z[h + k]), o = sigm(z[2 * h + k]), g = std::tanh(z[3 * h + k]);
      cs[k] = f * cs[k] + i * g;
      hs[k] = o * std::tanh(cs[k]);
    }
  }
  return hs;
}

struct Fixture {
  ParameterSet params;
  Rng rng{3};
  StrokeEmbedding emb{params, 8, 16, rng};
};

TEST(StrokeEmbedding, OddWidthRejected) {
  ParameterSet params;
  Rng rng(1);
  EXPECT_THROW(StrokeEmbedding(params, 7, 16, rng), std::invalid_argument);
}

TEST(StrokeEmbedding, BatchedLstmMatchesPerStrokeLoop) {
  ParameterSet params;
  Rng rng(5);
  LstmDirection dir(params, "lstm", 4, 3, rng);
  std::mt19937_64 data_rng(9);
  const Sketch s = testing::random_sketch(6, 2, 2, data_rng);  // lengths 2..6
  for (bool reversed : {false, true}) {
    const Tensor batched = dir.run(s.strokes, reversed);
    for (std::size_t i = 0; i < s.num_strokes(); ++i) {
      const auto ref = naive_lstm(dir, s.strokes[i], reversed);
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(batched.at(i, k), ref[k], 1e-12) << i << "," << k;
    }
  }
}

TEST(StrokeEmbedding, EmbedIsSumOfShapeOrderLocation) {
  Fixture f;
  std::mt19937_64 data_rng(2);
  const Sketch s = testing::random_sketch(5, 2, 2, data_rng);
  const Tensor e = f.emb.embed(s);
  ASSERT_EQ(e.shape(), (Shape{5, 8}));
  for (std::size_t i = 0; i < 5; ++i) {
    const Tensor shape = f.emb.shape_embed(s.strokes[i]);
    const Tensor order = f.emb.order_embed(i);
    const Tensor loc = f.emb.location_embed(s.strokes[i].front());
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(e.at(i, c), shape.at(c) + order.at(c) + loc.at(c), 1e-12);
  }
}

TEST(StrokeEmbedding, ShapeDependsOnlyOnTheStroke) {
  Fixture f;
  const Stroke a = testing::line_stroke(0, 0, 1, 1, 4);
  const Stroke b = testing::line_stroke(0.2, 0.9, 0.7, 0.1, 7);
  const Tensor alone = f.emb.shape_embed(a);
  const Stroke pair[] = {b, a};
  const Tensor batched = f.emb.shape_embed(pair);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(batched.at(1, c), alone.at(c), 1e-12);
}

TEST(StrokeEmbedding, OrderAndLocationEmbeddings) {
  Fixture f;
  const Tensor o3 = f.emb.order_embed(3);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(o3.at(c), f.emb.order_table().at(3, c));
  EXPECT_THROW(f.emb.order_embed(16), std::out_of_range);

  // Location is affine in the first point.
  const Tensor l0 = f.emb.location_embed({0.0, 0.0});
  const Tensor l1 = f.emb.location_embed({1.0, 0.0});
  const Tensor l2 = f.emb.location_embed({2.0, 0.0});
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(l2.at(c) - l1.at(c), l1.at(c) - l0.at(c), 1e-12);
  EXPECT_THROW(f.emb.location_embed({NAN, 0.0}), std::invalid_argument);
}

TEST(StrokeEmbedding, TooManyStrokesRejected) {
  Fixture f;
  std::mt19937_64 data_rng(2);
  EXPECT_THROW(f.emb.embed(testing::random_sketch(17, 2, 2, data_rng)), std::out_of_range);
  EXPECT_THROW(f.emb.embed(Sketch{}), std::invalid_argument);
}

TEST(StrokeEmbedding, GradientsMatchFiniteDifferences) {
  ParameterSet params;
  Rng rng(8);
  StrokeEmbedding emb(params, 4, 8, rng);
  std::mt19937_64 data_rng(4);
  const Sketch s = testing::random_sketch(3, 2, 2, data_rng);
  const Tensor w = testing::random_tensor({3, 4}, data_rng, -1, 1, false);
  std::vector<Tensor> inputs;
  for (auto& p : params.all()) inputs.push_back(p.tensor);
  const auto r = testing::check_gradients([&](const std::vector<Tensor>&) { return sum(mul(emb.embed(s), w)); },
                                          inputs);
  EXPECT_LE(r.max_rel_error, 1e-4);
}

}  // namespace
}  // namespace ssr
