#pragma once

#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "test_util.hpp"

namespace ssr::testing {

struct PrimitiveCase {
  std::string name;
  // Builds inputs for one instance and returns the scalar function under test.
  std::function<std::pair<std::vector<Tensor>, std::function<Tensor(const std::vector<Tensor>&)>>(std::mt19937_64&)>
      make;
};

inline std::size_t dim(std::mt19937_64& rng, std::size_t lo = 1, std::size_t hi = 5) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Values whose distance to every kink point exceeds `gap`.
inline Tensor away_from(Shape shape, std::mt19937_64& rng, std::vector<double> kinks, double gap) {
  Tensor t = random_tensor(std::move(shape), rng, -2.0, 2.0);
  for (double& v : t.mutable_values())
    for (double k : kinks)
      if (std::abs(v - k) < gap) v = k + (v < k ? -gap : gap);
  return t;
}

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

/// One entry per differentiable primitive; each `make` draws a random
/// instance and returns its inputs with a scalar probe of the output.
inline std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> cases;
  auto unary = [&cases](std::string name, std::function<Tensor(const Tensor&)> op, double lo, double hi) {
    cases.push_back({name, [op, lo, hi](std::mt19937_64& rng) {
                       const Shape s{dim(rng), dim(rng)};
                       const auto seed = rng();
                       Fn f = [op, seed](const std::vector<Tensor>& in) {
                         std::mt19937_64 wr(seed);
                         return probe(op(in[0]), wr);
                       };
                       return std::make_pair(std::vector<Tensor>{random_tensor(s, rng, lo, hi)}, f);
                     }});
  };
  unary("exp", [](const Tensor& x) { return exp(x); }, -2, 2);
  unary("log", [](const Tensor& x) { return log(x); }, 0.5, 3);
  unary("tanh", [](const Tensor& x) { return tanh(x); }, -3, 3);
  unary("sigmoid", [](const Tensor& x) { return sigmoid(x); }, -6, 6);
  unary("log_sigmoid", [](const Tensor& x) { return log_sigmoid(x); }, -6, 6);
  unary("gelu", [](const Tensor& x) { return gelu(x); }, -3, 3);
  unary("pow", [](const Tensor& x) { return pow(x, -1.5); }, 0.5, 2);
  unary("add_scalar", [](const Tensor& x) { return add_scalar(x, 0.7); }, -2, 2);
  unary("mul_scalar", [](const Tensor& x) { return mul_scalar(x, -1.3); }, -2, 2);
  unary("transpose", [](const Tensor& x) { return transpose(x); }, -2, 2);
  unary("layer_norm", [](const Tensor& x) { return layer_norm(x); }, -2, 2);
  unary("log_softmax_rows", [](const Tensor& x) { return log_softmax(x, 1); }, -3, 3);
  unary("softmax_cols", [](const Tensor& x) { return softmax(x, 0); }, -3, 3);
  unary("reshape", [](const Tensor& x) { return reshape(x, {x.size()}); }, -2, 2);
  unary("mean_all", [](const Tensor& x) { return mul_scalar(mean(x), 3.0); }, -2, 2);
  unary("sum_axis1", [](const Tensor& x) { return sum(x, 1, true); }, -2, 2);
  unary("mean_axis0", [](const Tensor& x) { return mean(x, 0); }, -2, 2);

  auto binary = [&cases](std::string name, std::function<Tensor(const Tensor&, const Tensor&)> op, bool broadcast,
                         bool positive_b) {
    cases.push_back({name, [op, broadcast, positive_b](std::mt19937_64& rng) {
                       const std::size_t r = dim(rng), c = dim(rng);
                       Shape sa{r, c}, sb{r, c};
                       if (broadcast) {
                         // Alternate between row, column, and rank-1 broadcasts.
                         const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
                         sb = kind == 0 ? Shape{1, c} : kind == 1 ? Shape{r, 1} : Shape{c};
                       }
                       Tensor b = positive_b ? random_tensor(sb, rng, 0.5, 2.0) : random_tensor(sb, rng);
                       if (positive_b)
                         for (double& v : b.mutable_values())
                           if (std::bernoulli_distribution(0.5)(rng)) v = -v;
                       auto w = random_tensor({r, c}, rng, -1, 1, false);
                       Fn f = [op, w](const std::vector<Tensor>& in) { return sum(mul(op(in[0], in[1]), w)); };
                       return std::make_pair(std::vector<Tensor>{random_tensor(sa, rng), b}, f);
                     }});
  };
  binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, false, false);
  binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, false, false);
  binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, false, false);
  binary("div", [](const Tensor& a, const Tensor& b) { return div(a, b); }, false, true);
  binary("add_broadcast", [](const Tensor& a, const Tensor& b) { return add(a, b); }, true, false);
  binary("sub_broadcast", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, true, false);
  binary("mul_broadcast", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, true, false);
  binary("div_broadcast", [](const Tensor& a, const Tensor& b) { return div(a, b); }, true, true);

  cases.push_back({"matmul", [](std::mt19937_64& rng) {
                     const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
                     auto w = random_tensor({m, n}, rng, -1, 1, false);
                     Fn f = [w](const std::vector<Tensor>& in) { return sum(mul(matmul(in[0], in[1]), w)); };
                     return std::make_pair(std::vector<Tensor>{random_tensor({m, k}, rng), random_tensor({k, n}, rng)},
                                           f);
                   }});
  cases.push_back({"concat", [](std::mt19937_64& rng) {
                     const std::size_t axis = dim(rng, 0, 1);
                     const std::size_t r = dim(rng), c = dim(rng), extra = dim(rng);
                     const Shape sb = axis == 0 ? Shape{extra, c} : Shape{r, extra};
                     const Shape so = axis == 0 ? Shape{r + extra, c} : Shape{r, c + extra};
                     auto w = random_tensor(so, rng, -1, 1, false);
                     Fn f = [w, axis](const std::vector<Tensor>& in) { return sum(mul(concat(in, axis), w)); };
                     return std::make_pair(std::vector<Tensor>{random_tensor({r, c}, rng), random_tensor(sb, rng)}, f);
                   }});
  cases.push_back({"slice", [](std::mt19937_64& rng) {
                     const std::size_t r = dim(rng, 2, 6), c = dim(rng);
                     const std::size_t b = dim(rng, 0, r - 1), e = dim(rng, b + 1, r);
                     auto w = random_tensor({e - b, c}, rng, -1, 1, false);
                     Fn f = [w, b, e](const std::vector<Tensor>& in) { return sum(mul(slice(in[0], 0, b, e), w)); };
                     return std::make_pair(std::vector<Tensor>{random_tensor({r, c}, rng)}, f);
                   }});
  cases.push_back({"max_axis", [](std::mt19937_64& rng) {
                     const std::size_t axis = dim(rng, 0, 2);
                     Shape s{dim(rng), dim(rng), dim(rng)};
                     Shape reduced = s;
                     reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(axis));
                     auto w = random_tensor(reduced, rng, -1, 1, false);
                     Fn f = [axis, w](const std::vector<Tensor>& in) { return sum(mul(max(in[0], axis).values, w)); };
                     return std::make_pair(std::vector<Tensor>{random_tensor(s, rng)}, f);
                   }});
  cases.push_back({"softmax_3d", [](std::mt19937_64& rng) {
                     const std::size_t axis = dim(rng, 0, 2);
                     const Shape s{dim(rng), dim(rng), dim(rng)};
                     auto w = random_tensor(s, rng, -1, 1, false);
                     Fn f = [axis, w](const std::vector<Tensor>& in) { return sum(mul(softmax(in[0], axis), w)); };
                     return std::make_pair(std::vector<Tensor>{random_tensor(s, rng, -3, 3)}, f);
                   }});
  cases.push_back({"clamp", [](std::mt19937_64& rng) {
                     const Shape s{dim(rng), dim(rng)};
                     auto w = random_tensor(s, rng, -1, 1, false);
                     Fn f = [w](const std::vector<Tensor>& in) { return sum(mul(clamp(in[0], -1.0, 1.0), w)); };
                     return std::make_pair(std::vector<Tensor>{away_from(s, rng, {-1.0, 1.0}, 1e-3)}, f);
                   }});
  cases.push_back({"gather_rows", [](std::mt19937_64& rng) {
                     const std::size_t rows = dim(rng), c = dim(rng), n = dim(rng, 1, 8);
                     std::vector<std::size_t> idx(n);
                     for (auto& i : idx) i = dim(rng, 0, rows - 1);
                     auto w = random_tensor({n, c}, rng, -1, 1, false);
                     Fn f = [w, idx](const std::vector<Tensor>& in) { return sum(mul(gather_rows(in[0], idx), w)); };
                     return std::make_pair(std::vector<Tensor>{random_tensor({rows, c}, rng)}, f);
                   }});
  cases.push_back({"squared_distance", [](std::mt19937_64& rng) {
                     const std::size_t n = dim(rng), m = dim(rng), d = dim(rng);
                     auto w = random_tensor({n, m}, rng, -1, 1, false);
                     Fn f = [w](const std::vector<Tensor>& in) { return sum(mul(squared_distance(in[0], in[1]), w)); };
                     return std::make_pair(std::vector<Tensor>{random_tensor({n, d}, rng), random_tensor({m, d}, rng)},
                                           f);
                   }});
  cases.push_back({"segment_max", [](std::mt19937_64& rng) {
                     const std::size_t n = dim(rng, 1, 8), c = dim(rng), segs = dim(rng, 1, 4);
                     std::vector<std::size_t> ids(n);
                     for (auto& i : ids) i = dim(rng, 0, segs - 1);
                     auto w = random_tensor({segs, c}, rng, -1, 1, false);
                     Fn f = [w, ids, segs](const std::vector<Tensor>& in) {
                       return sum(mul(segment_max(in[0], ids, segs), w));
                     };
                     return std::make_pair(std::vector<Tensor>{random_tensor({n, c}, rng)}, f);
                   }});
  return cases;
}

}  // namespace ssr::testing
