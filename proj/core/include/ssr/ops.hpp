#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssr/tensor.hpp"

// Differentiable primitives. Every function here records a backward rule
// when any operand requires a gradient; shape mismatches throw ShapeError
// naming both operand shapes.
namespace ssr {

// Element-wise binary operations with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator-(double s, const Tensor& a) { return add_scalar(neg(a), s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// log(sigmoid(a)) evaluated without overflow.
Tensor log_sigmoid(const Tensor& a);
/// tanh approximation of GELU.
Tensor gelu(const Tensor& a);
Tensor pow(const Tensor& a, double exponent);
/// Gradient passes only where lo <= a <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

/// [m, k] x [k, n] -> [m, n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Rank-2 transpose.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);

Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, std::size_t axis, bool keepdim = false);

struct MaxResult {
  Tensor values;
  /// Position along the reduced axis for every output element.
  std::vector<std::size_t> indices;
};
/// Max along `axis`; ties resolve to the lowest index and the backward pass
/// routes gradient only to that position.
MaxResult max(const Tensor& a, std::size_t axis, bool keepdim = false);

Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

/// Normalizes each row of the last axis to zero mean and unit variance.
Tensor layer_norm(const Tensor& a, double eps = 1e-6);

/// Row lookup into a rank-2 table: out[i] = table[indices[i]].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

/// out[i, j] = ||a_i - b_j||^2 for rank-2 row sets.
Tensor squared_distance(const Tensor& a, const Tensor& b);

/// out[s] = element-wise max of the rows of `a` with segment id s; segments
/// with no rows produce zeros. Ties go to the lowest row index.
Tensor segment_max(const Tensor& a, std::span<const std::size_t> segment_ids,
                   std::size_t num_segments);

}  // namespace ssr
