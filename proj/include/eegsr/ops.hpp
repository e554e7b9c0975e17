#pragma once

// Differentiable tensor ops. Each backward rule is expressed with ops from
// this header, which gives the gradient penalty its double backward.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "eegsr/autograd.hpp"
#include "eegsr/tensor.hpp"

namespace eegsr {

template <class T>
Var<T> constant(Tensor<T> value) {
  return Var<T>(std::move(value), false);
}

namespace detail {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapR = Eigen::Map<MatR<T>>;
template <class T>
using CMapR = Eigen::Map<const MatR<T>>;

template <class T, class F>
Tensor<T> map_values(const Tensor<T>& x, F f) {
  Tensor<T> out(x.shape());
  const T* src = x.data();
  T* dst = out.data();
  for (std::size_t i = 0, n = x.size(); i < n; ++i) dst[i] = f(src[i]);
  return out;
}

template <class T, class F>
Tensor<T> zip_values(const Tensor<T>& a, const Tensor<T>& b, F f, const char* what) {
  expect_shape(a.shape(), b.shape(), what);
  Tensor<T> out(a.shape());
  const T* pa = a.data();
  const T* pb = b.data();
  T* dst = out.data();
  for (std::size_t i = 0, n = a.size(); i < n; ++i) dst[i] = f(pa[i], pb[i]);
  return out;
}

inline void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_str(s));
  }
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  auto v = detail::zip_values(a.value(), b.value(), [](T x, T y) { return x + y; }, "add");
  return make_op<T>(
      std::move(v), {a, b},
      [](std::span<const Var<T>>, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{g, g};
      },
      "add");
}

template <class T>
Var<T> scale(const Var<T>& a, T c) {
  auto v = detail::map_values(a.value(), [c](T x) { return c * x; });
  return make_op<T>(
      std::move(v), {a},
      [c](std::span<const Var<T>>, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{scale(g, c)};
      },
      "scale");
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  auto v = detail::zip_values(a.value(), b.value(), [](T x, T y) { return x - y; }, "sub");
  return make_op<T>(
      std::move(v), {a, b},
      [](std::span<const Var<T>>, const Var<T>& g, const std::vector<bool>& needs) {
        std::vector<Var<T>> out(2);
        out[0] = g;
        if (needs[1]) out[1] = scale(g, T(-1));
        return out;
      },
      "sub");
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  auto v = detail::zip_values(a.value(), b.value(), [](T x, T y) { return x * y; }, "mul");
  return make_op<T>(
      std::move(v), {a, b},
      [](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>& needs) {
        std::vector<Var<T>> out(2);
        if (needs[0]) out[0] = mul(g, in[1]);
        if (needs[1]) out[1] = mul(g, in[0]);
        return out;
      },
      "mul");
}

template <class T>
Var<T> elu(const Var<T>& x, T alpha = T(1));

namespace detail {

/// d/dx ELU; differentiable once more through a frozen curvature factor.
template <class T>
Var<T> elu_deriv(const Var<T>& x, T alpha) {
  auto v = map_values(x.value(), [alpha](T z) { return z >= T(0) ? T(1) : alpha * std::exp(z); });
  return make_op<T>(
      std::move(v), {x},
      [alpha](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        auto curv = map_values(in[0].value(),
                               [alpha](T z) { return z >= T(0) ? T(0) : alpha * std::exp(z); });
        return std::vector<Var<T>>{mul(g, frozen(std::move(curv), {in[0]}, "elu_curvature"))};
      },
      "elu_deriv");
}

}  // namespace detail

/// x for x > 0, alpha (e^x - 1) otherwise. The derivative at 0 is taken as 1.
template <class T>
Var<T> elu(const Var<T>& x, T alpha) {
  auto v = detail::map_values(x.value(),
                              [alpha](T z) { return z > T(0) ? z : alpha * std::expm1(z); });
  return make_op<T>(
      std::move(v), {x},
      [alpha](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{mul(g, detail::elu_deriv(in[0], alpha))};
      },
      "elu");
}

template <class T>
Var<T> relu(const Var<T>& x) {
  auto v = detail::map_values(x.value(), [](T z) { return z > T(0) ? z : T(0); });
  return make_op<T>(
      std::move(v), {x},
      [](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        auto mask = detail::map_values(in[0].value(), [](T z) { return z > T(0) ? T(1) : T(0); });
        return std::vector<Var<T>>{mul(g, constant(std::move(mask)))};
      },
      "relu");
}

/// log(x + eps)
template <class T>
Var<T> log(const Var<T>& x, T eps = T(0)) {
  auto v = detail::map_values(x.value(), [eps](T z) { return std::log(z + eps); });
  return make_op<T>(
      std::move(v), {x},
      [eps](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        auto inv = detail::map_values(in[0].value(), [eps](T z) { return T(1) / (z + eps); });
        return std::vector<Var<T>>{mul(g, frozen(std::move(inv), {in[0]}, "log"))};
      },
      "log");
}

/// Elementwise square root; the derivative at 0 is taken as 0.
template <class T>
Var<T> sqrt(const Var<T>& x) {
  auto v = detail::map_values(x.value(), [](T z) { return std::sqrt(z); });
  return make_op<T>(
      std::move(v), {x},
      [](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        auto d = detail::map_values(in[0].value(), [](T z) {
          T r = std::sqrt(z);
          return r > T(0) ? T(0.5) / r : T(0);
        });
        return std::vector<Var<T>>{mul(g, frozen(std::move(d), {in[0]}, "sqrt"))};
      },
      "sqrt");
}

template <class T>
Var<T> abs(const Var<T>& x) {
  auto v = detail::map_values(x.value(), [](T z) { return std::abs(z); });
  return make_op<T>(
      std::move(v), {x},
      [](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        auto sign = detail::map_values(in[0].value(), [](T z) {
          return z > T(0) ? T(1) : (z < T(0) ? T(-1) : T(0));
        });
        return std::vector<Var<T>>{mul(g, constant(std::move(sign)))};
      },
      "abs");
}

// ----------------------------------------------------------------- reductions

template <class T>
Var<T> expand(const Var<T>& s, const Shape& shape);

template <class T>
Var<T> sum_all(const Var<T>& x) {
  T total = T(0);
  for (T v : x.value().values()) total += v;
  return make_op<T>(
      Tensor<T>::scalar(total), {x},
      [](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{expand(g, in[0].shape())};
      },
      "sum_all");
}

/// Broadcasts a one-element tensor to `shape`.
template <class T>
Var<T> expand(const Var<T>& s, const Shape& shape) {
  if (s.size() != 1) throw ShapeError("expand: source must hold one element, got " + shape_str(s.shape()));
  return make_op<T>(
      Tensor<T>(shape, s.value()[0]), {s},
      [](std::span<const Var<T>>, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{sum_all(g)};
      },
      "expand");
}

template <class T>
Var<T> mean(const Var<T>& x) {
  return scale(sum_all(x), T(1) / static_cast<T>(x.size()));
}

template <class T>
Var<T> expand_per_sample(const Var<T>& s, const Shape& shape);

/// Sum over every axis except the leading one: (N, ...) -> (N).
template <class T>
Var<T> sum_per_sample(const Var<T>& x) {
  const auto& xv = x.value();
  std::size_t n = xv.dim(0), per = xv.stride0();
  Tensor<T> out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    T acc = T(0);
    for (std::size_t j = 0; j < per; ++j) acc += xv[i * per + j];
    out[i] = acc;
  }
  return make_op<T>(
      std::move(out), {x},
      [](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{expand_per_sample(g, in[0].shape())};
      },
      "sum_per_sample");
}

/// (N) -> shape, repeating entry i over sample i.
template <class T>
Var<T> expand_per_sample(const Var<T>& s, const Shape& shape) {
  std::size_t n = shape.at(0);
  expect_shape(Shape{n}, s.shape(), "expand_per_sample");
  Tensor<T> out(shape);
  std::size_t per = out.stride0();
  for (std::size_t i = 0; i < n; ++i) std::fill_n(out.data() + i * per, per, s.value()[i]);
  return make_op<T>(
      std::move(out), {s},
      [](std::span<const Var<T>>, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{sum_per_sample(g)};
      },
      "expand_per_sample");
}

template <class T>
Var<T> reshape(const Var<T>& x, const Shape& shape) {
  return make_op<T>(
      x.value().reshaped(shape), {x},
      [](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{reshape(g, in[0].shape())};
      },
      "reshape");
}

/// (N, ...) -> (N, prod(...))
template <class T>
Var<T> flatten(const Var<T>& x) {
  if (x.shape().size() == 2) return x;
  return reshape(x, Shape{x.shape()[0], x.value().stride0()});
}

// -------------------------------------------------------- per-channel bias

template <class T>
Var<T> broadcast_channel(const Var<T>& b, const Shape& shape);

/// Sum over every axis except axis 1: (N, C, ...) -> (C).
template <class T>
Var<T> reduce_to_channel(const Var<T>& x) {
  const auto& xv = x.value();
  std::size_t n = xv.dim(0), c = xv.dim(1), inner = xv.size() / (n * c);
  Tensor<T> out(Shape{c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* p = xv.data() + (i * c + ch) * inner;
      T acc = T(0);
      for (std::size_t j = 0; j < inner; ++j) acc += p[j];
      out[ch] += acc;
    }
  return make_op<T>(
      std::move(out), {x},
      [](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{broadcast_channel(g, in[0].shape())};
      },
      "reduce_to_channel");
}

template <class T>
Var<T> broadcast_channel(const Var<T>& b, const Shape& shape) {
  std::size_t n = shape.at(0), c = shape.at(1);
  expect_shape(Shape{c}, b.shape(), "broadcast_channel");
  Tensor<T> out(shape);
  std::size_t inner = out.size() / (n * c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::fill_n(out.data() + (i * c + ch) * inner, inner, b.value()[ch]);
  return make_op<T>(
      std::move(out), {b},
      [](std::span<const Var<T>>, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{reduce_to_channel(g)};
      },
      "broadcast_channel");
}

/// x + b with b indexed by axis 1.
template <class T>
Var<T> bias_add(const Var<T>& x, const Var<T>& b) {
  const auto& xv = x.value();
  if (xv.rank() < 2) throw ShapeError("bias_add: input needs a batch and channel axis, got " + shape_str(xv.shape()));
  std::size_t n = xv.dim(0), c = xv.dim(1), inner = xv.size() / (n * c);
  expect_shape(Shape{c}, b.shape(), "bias_add");
  Tensor<T> out = xv;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      T* p = out.data() + (i * c + ch) * inner;
      T bv = b.value()[ch];
      for (std::size_t j = 0; j < inner; ++j) p[j] += bv;
    }
  return make_op<T>(
      std::move(out), {x, b},
      [](std::span<const Var<T>>, const Var<T>& g, const std::vector<bool>& needs) {
        std::vector<Var<T>> out(2);
        out[0] = g;
        if (needs[1]) out[1] = reduce_to_channel(g);
        return out;
      },
      "bias_add");
}

// -------------------------------------------------------------------- matmul

/// op(a) * op(b) for 2-d tensors, op = transpose when the flag is set.
template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool ta = false, bool tb = false) {
  detail::require_rank(a.shape(), 2, "matmul lhs");
  detail::require_rank(b.shape(), 2, "matmul rhs");
  std::size_t ar = a.shape()[0], ac = a.shape()[1], br = b.shape()[0], bc = b.shape()[1];
  std::size_t m = ta ? ac : ar, k = ta ? ar : ac, k2 = tb ? bc : br, n = tb ? br : bc;
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ, lhs " + shape_str(a.shape()) + (ta ? "^T" : "") +
                     " vs rhs " + shape_str(b.shape()) + (tb ? "^T" : ""));
  }
  Tensor<T> out(Shape{m, n});
  detail::CMapR<T> A(a.value().data(), ar, ac), B(b.value().data(), br, bc);
  detail::MapR<T> C(out.data(), m, n);
  if (!ta && !tb) C.noalias() = A * B;
  else if (ta && !tb) C.noalias() = A.transpose() * B;
  else if (!ta && tb) C.noalias() = A * B.transpose();
  else C.noalias() = A.transpose() * B.transpose();
  return make_op<T>(
      std::move(out), {a, b},
      [ta, tb](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>& needs) {
        std::vector<Var<T>> out(2);
        if (needs[0]) out[0] = ta ? matmul(in[1], g, tb, true) : matmul(g, in[1], false, !tb);
        if (needs[1]) out[1] = tb ? matmul(g, in[0], true, ta) : matmul(in[0], g, !ta, false);
        return out;
      },
      "matmul");
}

/// Fully connected layer: x (N, F) * W^T (F, O) + b.
template <class T>
Var<T> dense(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  return bias_add(matmul(x, w, false, true), b);
}

// ---------------------------------------------------------------- convolution

/// Geometry of a 2-d convolution with "same" zero padding: output extent is
/// ceil(in / stride); when the padding total is odd the extra zero goes to
/// the bottom/right.
struct ConvGeometry {
  std::size_t kh = 1, kw = 1, sh = 1, sw = 1;
  std::size_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  std::size_t pad_top = 0, pad_left = 0;

  static ConvGeometry same(std::size_t in_h, std::size_t in_w, std::size_t kh, std::size_t kw,
                           std::size_t sh = 1, std::size_t sw = 1) {
    if (kh == 0 || kw == 0 || sh == 0 || sw == 0) throw ShapeError("conv2d: kernel and stride must be positive");
    ConvGeometry g;
    g.kh = kh; g.kw = kw; g.sh = sh; g.sw = sw;
    g.in_h = in_h; g.in_w = in_w;
    g.out_h = (in_h + sh - 1) / sh;
    g.out_w = (in_w + sw - 1) / sw;
    std::size_t need_h = (g.out_h - 1) * sh + kh;
    std::size_t need_w = (g.out_w - 1) * sw + kw;
    g.pad_top = need_h > in_h ? (need_h - in_h) / 2 : 0;
    g.pad_left = need_w > in_w ? (need_w - in_w) / 2 : 0;
    return g;
  }
};

namespace detail {

// cols is (C*kh*kw, out_h*out_w) row-major.
template <class T>
void im2col(const T* x, std::size_t channels, const ConvGeometry& g, T* cols) {
  const std::size_t P = g.out_h * g.out_w;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = cols + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.sh + i) - static_cast<std::ptrdiff_t>(g.pad_top);
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) {
            std::fill_n(dst, g.out_w, T(0));
            continue;
          }
          const T* src = x + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.sw + j) - static_cast<std::ptrdiff_t>(g.pad_left);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) ? T(0) : src[ix];
          }
        }
      }
}

template <class T>
void col2im_add(const T* cols, std::size_t channels, const ConvGeometry& g, T* x) {
  const std::size_t P = g.out_h * g.out_w;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = cols + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.sh + i) - static_cast<std::ptrdiff_t>(g.pad_top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          T* dst = x + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.sw + j) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.in_w)) dst[ix] += src[ox];
          }
        }
      }
}

inline void check_conv_shapes(const Shape& x, const Shape& w, const char* what) {
  require_rank(x, 4, what);
  require_rank(w, 4, what);
  if (x[1] != w[1]) {
    throw ShapeError(std::string(what) + ": input has " + std::to_string(x[1]) +
                     " maps but kernel expects " + std::to_string(w[1]) + " (input " + shape_str(x) +
                     ", kernel " + shape_str(w) + ")");
  }
}

}  // namespace detail

template <class T>
Var<T> conv2d_input_grad(const Var<T>& gy, const Var<T>& w, const Shape& x_shape, std::size_t sh,
                         std::size_t sw);
template <class T>
Var<T> conv2d_weight_grad(const Var<T>& x, const Var<T>& gy, const Shape& w_shape, std::size_t sh,
                          std::size_t sw);

/// Cross-correlation of x (N, Cin, H, W) with w (Cout, Cin, kh, kw), same
/// zero padding. No bias.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, std::size_t sh = 1, std::size_t sw = 1) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  detail::check_conv_shapes(xs, ws, "conv2d");
  auto g = ConvGeometry::same(xs[2], xs[3], ws[2], ws[3], sh, sw);
  const std::size_t N = xs[0], Cin = xs[1], Cout = ws[0];
  const std::size_t K = Cin * g.kh * g.kw, P = g.out_h * g.out_w;
  Tensor<T> out(Shape{N, Cout, g.out_h, g.out_w});
  detail::MatR<T> cols(K, P);
  detail::CMapR<T> W(w.value().data(), Cout, K);
  for (std::size_t n = 0; n < N; ++n) {
    detail::im2col(x.value().data() + n * Cin * g.in_h * g.in_w, Cin, g, cols.data());
    detail::MapR<T> Y(out.data() + n * Cout * P, Cout, P);
    Y.noalias() = W * cols;
  }
  return make_op<T>(
      std::move(out), {x, w},
      [sh, sw](std::span<const Var<T>> in, const Var<T>& gy, const std::vector<bool>& needs) {
        std::vector<Var<T>> r(2);
        if (needs[0]) r[0] = conv2d_input_grad(gy, in[1], in[0].shape(), sh, sw);
        if (needs[1]) r[1] = conv2d_weight_grad(in[0], gy, in[1].shape(), sh, sw);
        return r;
      },
      "conv2d");
}

/// Adjoint of conv2d with respect to its input (a transposed convolution).
template <class T>
Var<T> conv2d_input_grad(const Var<T>& gy, const Var<T>& w, const Shape& x_shape, std::size_t sh,
                         std::size_t sw) {
  const Shape& ws = w.shape();
  detail::check_conv_shapes(x_shape, ws, "conv2d_input_grad");
  auto g = ConvGeometry::same(x_shape[2], x_shape[3], ws[2], ws[3], sh, sw);
  const std::size_t N = x_shape[0], Cin = x_shape[1], Cout = ws[0];
  const std::size_t K = Cin * g.kh * g.kw, P = g.out_h * g.out_w;
  expect_shape(Shape{N, Cout, g.out_h, g.out_w}, gy.shape(), "conv2d_input_grad upstream");
  Tensor<T> out(x_shape);
  detail::MatR<T> cols(K, P);
  detail::CMapR<T> W(w.value().data(), Cout, K);
  for (std::size_t n = 0; n < N; ++n) {
    detail::CMapR<T> G(gy.value().data() + n * Cout * P, Cout, P);
    cols.noalias() = W.transpose() * G;
    detail::col2im_add(cols.data(), Cin, g, out.data() + n * Cin * g.in_h * g.in_w);
  }
  return make_op<T>(
      std::move(out), {gy, w},
      [sh, sw](std::span<const Var<T>> in, const Var<T>& up, const std::vector<bool>& needs) {
        std::vector<Var<T>> r(2);
        if (needs[0]) r[0] = conv2d(up, in[1], sh, sw);
        if (needs[1]) r[1] = conv2d_weight_grad(up, in[0], in[1].shape(), sh, sw);
        return r;
      },
      "conv2d_input_grad");
}

/// Adjoint of conv2d with respect to its kernel.
template <class T>
Var<T> conv2d_weight_grad(const Var<T>& x, const Var<T>& gy, const Shape& w_shape, std::size_t sh,
                          std::size_t sw) {
  const Shape& xs = x.shape();
  detail::check_conv_shapes(xs, w_shape, "conv2d_weight_grad");
  auto g = ConvGeometry::same(xs[2], xs[3], w_shape[2], w_shape[3], sh, sw);
  const std::size_t N = xs[0], Cin = xs[1], Cout = w_shape[0];
  const std::size_t K = Cin * g.kh * g.kw, P = g.out_h * g.out_w;
  expect_shape(Shape{N, Cout, g.out_h, g.out_w}, gy.shape(), "conv2d_weight_grad upstream");
  Tensor<T> out(w_shape);
  detail::MapR<T> DW(out.data(), Cout, K);
  detail::MatR<T> cols(K, P);
  for (std::size_t n = 0; n < N; ++n) {
    detail::im2col(x.value().data() + n * Cin * g.in_h * g.in_w, Cin, g, cols.data());
    detail::CMapR<T> G(gy.value().data() + n * Cout * P, Cout, P);
    DW.noalias() += G * cols.transpose();
  }
  return make_op<T>(
      std::move(out), {x, gy},
      [sh, sw](std::span<const Var<T>> in, const Var<T>& up, const std::vector<bool>& needs) {
        std::vector<Var<T>> r(2);
        if (needs[0]) r[0] = conv2d_input_grad(in[1], up, in[0].shape(), sh, sw);
        if (needs[1]) r[1] = conv2d(in[0], up, sh, sw);
        return r;
      },
      "conv2d_weight_grad");
}

// ------------------------------------------------------- concat / slice

template <class T>
Var<T> pad_axis1(const Var<T>& x, std::size_t offset, std::size_t total);

/// Maps [offset, offset + count) of axis 1.
template <class T>
Var<T> slice_axis1(const Var<T>& x, std::size_t offset, std::size_t count) {
  const auto& xv = x.value();
  std::size_t n = xv.dim(0), c = xv.dim(1), inner = xv.size() / (n * c);
  if (offset + count > c) throw ShapeError("slice_axis1: range exceeds " + std::to_string(c) + " maps");
  Shape s = xv.shape();
  s[1] = count;
  Tensor<T> out(s);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(xv.data() + (i * c + offset) * inner, count * inner, out.data() + i * count * inner);
  return make_op<T>(
      std::move(out), {x},
      [offset, c](std::span<const Var<T>>, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{pad_axis1(g, offset, c)};
      },
      "slice");
}

/// Embeds x at [offset, offset + C) of a zero tensor with `total` maps.
template <class T>
Var<T> pad_axis1(const Var<T>& x, std::size_t offset, std::size_t total) {
  const auto& xv = x.value();
  std::size_t n = xv.dim(0), c = xv.dim(1), inner = xv.size() / (n * c);
  Shape s = xv.shape();
  s[1] = total;
  Tensor<T> out(s);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(xv.data() + i * c * inner, c * inner, out.data() + (i * total + offset) * inner);
  return make_op<T>(
      std::move(out), {x},
      [offset, c](std::span<const Var<T>>, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{slice_axis1(g, offset, c)};
      },
      "pad");
}

/// Stacks inputs along the map axis.
template <class T>
Var<T> concat(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  if (xs.size() == 1) return xs[0];
  Shape base = xs[0].shape();
  std::size_t total = 0;
  for (const auto& x : xs) {
    Shape s = x.shape();
    if (s.size() != base.size() || s.size() < 2) throw ShapeError("concat: rank mismatch " + shape_str(s) + " vs " + shape_str(base));
    s[1] = base[1];
    if (s != base) throw ShapeError("concat: spatial shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(xs[0].shape()));
    total += x.shape()[1];
  }
  Shape os = base;
  os[1] = total;
  Tensor<T> out(os);
  std::size_t n = base[0], inner = xs[0].value().stride0() / base[1];
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& x : xs) {
    std::size_t c = x.shape()[1];
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(x.value().data() + i * c * inner, c * inner, out.data() + (i * total + off) * inner);
    offsets.push_back(off);
    off += c;
  }
  return make_op<T>(
      std::move(out), xs,
      [offsets](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>& needs) {
        std::vector<Var<T>> r(in.size());
        for (std::size_t k = 0; k < in.size(); ++k)
          if (needs[k]) r[k] = slice_axis1(g, offsets[k], in[k].shape()[1]);
        return r;
      },
      "concat");
}

// -------------------------------------------------------------- upsampling

template <class T>
Var<T> upsample_rows_sum(const Var<T>& g, std::size_t factor);

/// Nearest-neighbour upsampling along the height axis of (N, C, H, W):
/// output row i is input row floor(i / factor).
template <class T>
Var<T> upsample_nn(const Var<T>& x, std::size_t factor) {
  if (factor < 1) throw ShapeError("upsample_nn: factor must be >= 1");
  detail::require_rank(x.shape(), 4, "upsample_nn");
  if (factor == 1) return x;
  const Shape& s = x.shape();
  std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  Tensor<T> out(Shape{s[0], s[1], h * factor, w});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t r = 0; r < h * factor; ++r)
      std::copy_n(x.value().data() + (p * h + r / factor) * w, w, out.data() + (p * h * factor + r) * w);
  return make_op<T>(
      std::move(out), {x},
      [factor](std::span<const Var<T>>, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{upsample_rows_sum(g, factor)};
      },
      "upsample_nn");
}

/// Adjoint of upsample_nn: sums each group of `factor` rows.
template <class T>
Var<T> upsample_rows_sum(const Var<T>& g, std::size_t factor) {
  const Shape& s = g.shape();
  detail::require_rank(s, 4, "upsample_rows_sum");
  if (s[2] % factor) throw ShapeError("upsample_rows_sum: height not divisible by factor");
  std::size_t planes = s[0] * s[1], h = s[2] / factor, w = s[3];
  Tensor<T> out(Shape{s[0], s[1], h, w});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t r = 0; r < h * factor; ++r) {
      const T* src = g.value().data() + (p * h * factor + r) * w;
      T* dst = out.data() + (p * h + r / factor) * w;
      for (std::size_t c = 0; c < w; ++c) dst[c] += src[c];
    }
  return make_op<T>(
      std::move(out), {g},
      [factor](std::span<const Var<T>>, const Var<T>& up, const std::vector<bool>&) {
        return std::vector<Var<T>>{upsample_nn(up, factor)};
      },
      "upsample_rows_sum");
}

// ------------------------------------------------------------------- softmax

/// Row-wise softmax of (N, K).
template <class T>
Var<T> softmax(const Var<T>& x) {
  detail::require_rank(x.shape(), 2, "softmax");
  std::size_t n = x.shape()[0], k = x.shape()[1];
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x.value().data() + i * k;
    T* dst = out.data() + i * k;
    T mx = *std::max_element(row, row + k);
    T total = T(0);
    for (std::size_t j = 0; j < k; ++j) total += dst[j] = std::exp(row[j] - mx);
    for (std::size_t j = 0; j < k; ++j) dst[j] /= total;
  }
  Tensor<T> y = out;
  return make_op<T>(
      std::move(out), {x},
      [y](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        auto yv = frozen(y, {in[0]}, "softmax");
        auto dot = sum_per_sample(mul(g, yv));
        return std::vector<Var<T>>{mul(yv, sub(g, expand_per_sample(dot, g.shape())))};
      },
      "softmax");
}

// ------------------------------------------------------------------- dropout

/// Inverted dropout: in training, zero each element with probability `rate`
/// and scale survivors by 1/(1 - rate). Identity otherwise.
template <class T>
Var<T> dropout(const Var<T>& x, double rate, bool training, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor<T> mask(x.shape());
  T s = T(1) / static_cast<T>(1.0 - rate);
  for (auto& m : mask.values()) m = keep(rng) ? s : T(0);
  return mul(x, constant(std::move(mask)));
}

// -------------------------------------------------------------------- losses

template <class T>
Var<T> mse_loss(const Var<T>& pred, const Var<T>& target) {
  expect_shape(target.shape(), pred.shape(), "mse_loss");
  auto d = sub(pred, target);
  return mean(mul(d, d));
}

template <class T>
Var<T> mae_loss(const Var<T>& pred, const Var<T>& target) {
  expect_shape(target.shape(), pred.shape(), "mae_loss");
  return mean(abs(sub(pred, target)));
}

/// -sum(target * log(pred + 1e-12)) averaged over the batch. `pred` holds
/// probability rows, `target` one-hot rows.
template <class T>
Var<T> cross_entropy_loss(const Var<T>& pred, const Var<T>& target) {
  expect_shape(target.shape(), pred.shape(), "cross_entropy_loss");
  auto ll = sum_all(mul(target, log(pred, T(1e-12))));
  return scale(ll, T(-1) / static_cast<T>(pred.shape()[0]));
}

/// Mean binary cross-entropy of sigmoid(logits) against soft targets.
template <class T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& targets) {
  expect_shape(logits.shape(), targets.shape(), "bce_with_logits");
  std::size_t n = logits.size();
  T total = T(0);
  Tensor<T> dz(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    T z = logits.value()[i], t = targets[i];
    // softplus(z) - t z, computed stably
    total += std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z))) - t * z;
    dz[i] = (T(1) / (T(1) + std::exp(-z)) - t) / static_cast<T>(n);
  }
  total /= static_cast<T>(n);
  return make_op<T>(
      Tensor<T>::scalar(total), {logits},
      [dz](std::span<const Var<T>> in, const Var<T>& g, const std::vector<bool>&) {
        return std::vector<Var<T>>{
            mul(expand(g, in[0].shape()), frozen(dz, {in[0]}, "bce_with_logits"))};
      },
      "bce_with_logits");
}

enum class LossKind { MSE, MAE, CrossEntropy };

template <class T>
Var<T> loss(LossKind kind, const Var<T>& pred, const Var<T>& target) {
  switch (kind) {
    case LossKind::MSE: return mse_loss(pred, target);
    case LossKind::MAE: return mae_loss(pred, target);
    case LossKind::CrossEntropy: return cross_entropy_loss(pred, target);
  }
  throw Error("unknown loss kind");
}

}  // namespace eegsr
