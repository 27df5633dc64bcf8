#include "ssr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/Core>
#include <fmt/format.h>

namespace ssr {
namespace {

using detail::Node;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using CMatMap = Eigen::Map<const RowMajor>;

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Parent gradient buffer if that parent participates in the backward pass.
double* grad_of(Node& out, std::size_t parent) {
  Node* p = out.parents[parent].get();
  return p->requires_grad ? p->grad.data() : nullptr;
}

const double* value_of(Node& out, std::size_t parent) { return out.parents[parent]->value.data(); }

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(fmt::format("{}: axis {} out of range for shape {}", op, axis, shape_str(shape)));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(fmt::format("{}: expected rank {}, got shape {}", op, rank, shape_str(a.shape())));
  }
}

// Index maps from each output element back into the two operands.
struct Broadcast {
  Shape out;
  bool same = false;
  std::shared_ptr<std::vector<std::size_t>> ia;
  std::shared_ptr<std::vector<std::size_t>> ib;
};

Broadcast broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank - a.size(), 1), pb(rank - b.size(), 1);
  pa.insert(pa.end(), a.begin(), a.end());
  pb.insert(pb.end(), b.begin(), b.end());
  bc.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw ShapeError(
          fmt::format("{}: cannot broadcast {} with {}", op, shape_str(a), shape_str(b)));
    }
    bc.out[i] = pa[i] == 1 ? pb[i] : pa[i];
  }
  // Strides of each operand in output coordinates (zero on broadcast axes).
  std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
  std::size_t ra = 1, rb = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : ra;
    sb[i] = pb[i] == 1 ? 0 : rb;
    ra *= pa[i];
    rb *= pb[i];
  }
  const std::size_t n = shape_numel(bc.out);
  bc.ia = std::make_shared<std::vector<std::size_t>>(n);
  bc.ib = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t offa = 0, offb = 0;
  for (std::size_t k = 0; k < n; ++k) {
    (*bc.ia)[k] = offa;
    (*bc.ib)[k] = offb;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      offa += sa[d];
      offb += sb[d];
      if (idx[d] < bc.out[d]) break;
      offa -= sa[d] * idx[d];
      offb -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return bc;
}

// f(x, y) -> value; dfa/dfb(x, y, out) -> local partial derivatives.
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, DA dfa, DB dfb) {
  Broadcast bc = broadcast_shapes(a.shape(), b.shape(), op);
  const std::size_t n = shape_numel(bc.out);
  std::vector<double> out(n);
  const auto av = a.values();
  const auto bv = b.values();
  if (bc.same) {
    for (std::size_t k = 0; k < n; ++k) out[k] = f(av[k], bv[k]);
  } else {
    for (std::size_t k = 0; k < n; ++k) out[k] = f(av[(*bc.ia)[k]], bv[(*bc.ib)[k]]);
  }
  return Tensor::make_result(bc.out, std::move(out), {a, b}, [bc, dfa, dfb](Node& node) {
    const double* x = value_of(node, 0);
    const double* y = value_of(node, 1);
    double* gx = grad_of(node, 0);
    double* gy = grad_of(node, 1);
    const std::size_t m = node.value.size();
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = bc.same ? k : (*bc.ia)[k];
      const std::size_t j = bc.same ? k : (*bc.ib)[k];
      const double g = node.grad[k];
      if (gx) gx[i] += g * dfa(x[i], y[j], node.value[k]);
      if (gy) gy[j] += g * dfb(x[i], y[j], node.value[k]);
    }
  });
}

// f(x) -> value; df(x, y) -> derivative given input and output.
template <class F, class D>
Tensor unary(const Tensor& a, F f, D df) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = f(av[k]);
  return Tensor::make_result(a.shape(), std::move(out), {a}, [df](Node& node) {
    const double* x = value_of(node, 0);
    double* gx = grad_of(node, 0);
    for (std::size_t k = 0; k < node.value.size(); ++k) gx[k] += node.grad[k] * df(x[k], node.value[k]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double z) { return -z / y; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor log_sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(-x); });
}

Tensor gelu(const Tensor& a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double k = 0.044715;
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + k * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(c * (x + k * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * k * x * x);
      });
}

Tensor pow(const Tensor& a, double exponent) {
  return unary(
      a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError(
        fmt::format("matmul: inner dimensions differ, {} x {}", shape_str(a.shape()), shape_str(b.shape())));
  }
  std::vector<double> out(m * n);
  MatMap(out.data(), m, n).noalias() = CMatMap(a.values().data(), m, k) * CMatMap(b.values().data(), k, n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& node) {
    const CMatMap g(node.grad.data(), m, n);
    if (double* ga = grad_of(node, 0)) {
      MatMap(ga, m, k).noalias() += g * CMatMap(value_of(node, 1), k, n).transpose();
    }
    if (double* gb = grad_of(node, 1)) {
      MatMap(gb, k, n).noalias() += CMatMap(value_of(node, 0), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  const auto av = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return Tensor::make_result({c, r}, std::move(out), {a}, [r, c](Node& node) {
    double* ga = grad_of(node, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += node.grad[j * r + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw ShapeError(fmt::format("reshape: {} cannot become {}", shape_str(a.shape()), shape_str(shape)));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [](Node& node) {
    double* ga = grad_of(node, 0);
    for (std::size_t k = 0; k < node.value.size(); ++k) ga[k] += node.grad[k];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts.front().shape();
  Shape out_shape = first;
  split_axis(first, axis, "concat");
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw ShapeError(fmt::format("concat: shapes {} and {} differ off axis {}", shape_str(first),
                                   shape_str(s), axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_axis(out_shape, axis, "concat");
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[axis] * os.inner;
    const auto pv = p.values();
    for (std::size_t o = 0; o < os.outer; ++o)
      std::copy_n(pv.data() + o * w, w, out.data() + o * os.len * os.inner + offset);
    widths.push_back(w);
    offset += w;
  }
  return Tensor::make_result(out_shape, std::move(out), parts, [os, widths](Node& node) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      const std::size_t w = widths[p];
      if (double* gp = grad_of(node, p)) {
        for (std::size_t o = 0; o < os.outer; ++o) {
          const double* src = node.grad.data() + o * os.len * os.inner + offset;
          for (std::size_t k = 0; k < w; ++k) gp[o * w + k] += src[k];
        }
      }
      offset += w;
    }
  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_axis(a.shape(), axis, "slice");
  if (begin > end || end > s.len) {
    throw ShapeError(fmt::format("slice: range [{}, {}) invalid for axis {} of shape {}", begin, end,
                                 axis, shape_str(a.shape())));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t w = (end - begin) * s.inner;
  const auto av = a.values();
  std::vector<double> out(s.outer * w);
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(av.data() + o * s.len * s.inner + begin * s.inner, w, out.data() + o * w);
  return Tensor::make_result(std::move(out_shape), std::move(out), {a}, [s, w, begin](Node& node) {
    double* ga = grad_of(node, 0);
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = ga + o * s.len * s.inner + begin * s.inner;
      for (std::size_t k = 0; k < w; ++k) dst[k] += node.grad[o * w + k];
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return Tensor::make_result({}, {total}, {a}, [](Node& node) {
    double* ga = grad_of(node, 0);
    const double g = node.grad[0];
    const std::size_t n = node.parents[0]->value.size();
    for (std::size_t k = 0; k < n; ++k) ga[k] += g;
  });
}

Tensor sum(const Tensor& a, std::size_t axis, bool keepdim) {
  const AxisSplit s = split_axis(a.shape(), axis, "sum");
  Shape out_shape = a.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  const auto av = a.values();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.len; ++l)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += av[(o * s.len + l) * s.inner + i];
  return Tensor::make_result(std::move(out_shape), std::move(out), {a}, [s](Node& node) {
    double* ga = grad_of(node, 0);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t l = 0; l < s.len; ++l)
        for (std::size_t i = 0; i < s.inner; ++i) ga[(o * s.len + l) * s.inner + i] += node.grad[o * s.inner + i];
  });
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor mean(const Tensor& a, std::size_t axis, bool keepdim) {
  const double len = static_cast<double>(a.dim(axis));
  return mul_scalar(sum(a, axis, keepdim), 1.0 / len);
}

MaxResult max(const Tensor& a, std::size_t axis, bool keepdim) {
  const AxisSplit s = split_axis(a.shape(), axis, "max");
  if (s.len == 0) throw ShapeError(fmt::format("max: empty axis in shape {}", shape_str(a.shape())));
  Shape out_shape = a.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  const auto av = a.values();
  std::vector<double> out(s.outer * s.inner);
  auto arg = std::make_shared<std::vector<std::size_t>>(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = 0;
      double bv = av[o * s.len * s.inner + i];
      for (std::size_t l = 1; l < s.len; ++l) {
        const double v = av[(o * s.len + l) * s.inner + i];
        if (v > bv) {
          bv = v;
          best = l;
        }
      }
      out[o * s.inner + i] = bv;
      (*arg)[o * s.inner + i] = best;
    }
  }
  Tensor values = Tensor::make_result(std::move(out_shape), std::move(out), {a}, [s, arg](Node& node) {
    double* ga = grad_of(node, 0);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t k = o * s.inner + i;
        ga[(o * s.len + (*arg)[k]) * s.inner + i] += node.grad[k];
      }
  });
  return {std::move(values), *arg};
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "softmax");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) m = std::max(m, av[base + l * s.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) z += (out[base + l * s.inner] = std::exp(av[base + l * s.inner] - m));
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= z;
    }
  }
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](Node& node) {
    double* ga = grad_of(node, 0);
    const double* y = node.value.data();
    const double* g = node.grad.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        double dot = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) dot += g[base + l * s.inner] * y[base + l * s.inner];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = base + l * s.inner;
          ga[k] += y[k] * (g[k] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "log_softmax");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) m = std::max(m, av[base + l * s.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) z += std::exp(av[base + l * s.inner] - m);
      const double lse = m + std::log(z);
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] = av[base + l * s.inner] - lse;
    }
  }
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](Node& node) {
    double* ga = grad_of(node, 0);
    const double* y = node.value.data();
    const double* g = node.grad.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        double gs = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) gs += g[base + l * s.inner];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = base + l * s.inner;
          ga[k] += g[k] - std::exp(y[k]) * gs;
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& a, double eps) {
  if (a.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t width = a.shape().back();
  const std::size_t rows = a.size() / width;
  const auto av = a.values();
  std::vector<double> out(av.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * width;
    double mu = 0.0;
    for (std::size_t c = 0; c < width; ++c) mu += x[c];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t c = 0; c < width; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= static_cast<double>(width);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = (x[c] - mu) * is;
  }
  return Tensor::make_result(a.shape(), std::move(out), {a}, [width, rows, inv_std](Node& node) {
    double* ga = grad_of(node, 0);
    const double n = static_cast<double>(width);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = node.value.data() + r * width;
      const double* g = node.grad.data() + r * width;
      double gm = 0.0, gy = 0.0;
      for (std::size_t c = 0; c < width; ++c) {
        gm += g[c];
        gy += g[c] * y[c];
      }
      gm /= n;
      gy /= n;
      for (std::size_t c = 0; c < width; ++c) ga[r * width + c] += (*inv_std)[r] * (g[c] - gm - y[c] * gy);
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_rank(table, 2, "gather_rows");
  const std::size_t rows = table.dim(0), width = table.dim(1);
  auto idx = std::make_shared<std::vector<std::size_t>>(indices.begin(), indices.end());
  std::vector<double> out(idx->size() * width);
  const auto tv = table.values();
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const std::size_t r = (*idx)[i];
    if (r >= rows) {
      throw ShapeError(fmt::format("gather_rows: index {} out of range for table {}", r, shape_str(table.shape())));
    }
    std::copy_n(tv.data() + r * width, width, out.data() + i * width);
  }
  return Tensor::make_result({idx->size(), width}, std::move(out), {table}, [idx, width](Node& node) {
    double* gt = grad_of(node, 0);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      double* dst = gt + (*idx)[i] * width;
      const double* src = node.grad.data() + i * width;
      for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
    }
  });
}

Tensor squared_distance(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "squared_distance");
  require_rank(b, 2, "squared_distance");
  const std::size_t n = a.dim(0), m = b.dim(0), d = a.dim(1);
  if (b.dim(1) != d) {
    throw ShapeError(fmt::format("squared_distance: row widths differ, {} vs {}", shape_str(a.shape()),
                                 shape_str(b.shape())));
  }
  const double* av = a.values().data();
  const double* bv = b.values().data();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = av[i * d + c] - bv[j * d + c];
        s += diff * diff;
      }
      out[i * m + j] = s;
    }
  return Tensor::make_result({n, m}, std::move(out), {a, b}, [n, m, d](Node& node) {
    const double* av = value_of(node, 0);
    const double* bv = value_of(node, 1);
    double* ga = grad_of(node, 0);
    double* gb = grad_of(node, 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double g = 2.0 * node.grad[i * m + j];
        if (g == 0.0) continue;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = g * (av[i * d + c] - bv[j * d + c]);
          if (ga) ga[i * d + c] += diff;
          if (gb) gb[j * d + c] -= diff;
        }
      }
  });
}

Tensor segment_max(const Tensor& a, std::span<const std::size_t> segment_ids, std::size_t num_segments) {
  require_rank(a, 2, "segment_max");
  const std::size_t rows = a.dim(0), width = a.dim(1);
  if (segment_ids.size() != rows) {
    throw ShapeError(fmt::format("segment_max: {} segment ids for shape {}", segment_ids.size(),
                                 shape_str(a.shape())));
  }
  const auto av = a.values();
  std::vector<double> out(num_segments * width, 0.0);
  auto arg = std::make_shared<std::vector<std::size_t>>(num_segments * width, kNone);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t s = segment_ids[r];
    if (s >= num_segments) {
      throw ShapeError(fmt::format("segment_max: segment {} >= {}", s, num_segments));
    }
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t k = s * width + c;
      const double v = av[r * width + c];
      if ((*arg)[k] == kNone || v > out[k]) {
        out[k] = v;
        (*arg)[k] = r;
      }
    }
  }
  return Tensor::make_result({num_segments, width}, std::move(out), {a}, [arg, width](Node& node) {
    double* ga = grad_of(node, 0);
    for (std::size_t k = 0; k < arg->size(); ++k) {
      const std::size_t r = (*arg)[k];
      if (r != kNone) ga[r * width + k % width] += node.grad[k];
    }
  });
}

}  // namespace ssr
