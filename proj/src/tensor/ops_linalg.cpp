// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Core>

#include "ops_internal.hpp"

namespace vitdae {

using detail::gemm;
using detail::Node;
using detail::parent_data;
using detail::parent_grad;
using detail::parent_wants_grad;
using detail::require;

namespace detail {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const Mat>;
  const auto rows = static_cast<Eigen::Index>(m);
  const auto cols = static_cast<Eigen::Index>(n);
  const auto depth = static_cast<Eigen::Index>(k);
  Eigen::Map<Mat> out(c, rows, cols);
  if (beta == T(0)) {
    out.setZero();
  } else if (beta != T(1)) {
    out *= beta;
  }
  ConstMap lhs(a, trans_a ? depth : rows, trans_a ? rows : depth);
  ConstMap rhs(b, trans_b ? cols : depth, trans_b ? depth : cols);
  if (!trans_a && !trans_b) {
    out.noalias() += alpha * lhs * rhs;
  } else if (trans_a && !trans_b) {
    out.noalias() += alpha * lhs.transpose() * rhs;
  } else if (!trans_a && trans_b) {
    out.noalias() += alpha * lhs * rhs.transpose();
  } else {
    out.noalias() += alpha * lhs.transpose() * rhs.transpose();
  }
}

template void gemm(bool, bool, std::size_t, std::size_t, std::size_t, float, const float*,
                   const float*, float, float*);
template void gemm(bool, bool, std::size_t, std::size_t, std::size_t, double, const double*,
                   const double*, double, double*);

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: expected matrices, got " +
                                              shape_str(a.shape()) + " and " +
                                              shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dimension mismatch " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  std::vector<T> out(m * n);
  gemm<T>(false, false, m, n, k, T(1), a.data().data(), b.data().data(), T(0), out.data());
  return detail::make_result<T>(Shape{m, n}, std::move(out), {a, b}, [m, n, k](Node<T>& self) {
    const T* g = self.grad.data();
    if (parent_wants_grad(self, 0))
      gemm<T>(false, true, m, k, n, T(1), g, parent_data(self, 1).data(), T(1),
              parent_grad(self, 0).data());
    if (parent_wants_grad(self, 1))
      gemm<T>(true, false, k, n, m, T(1), parent_data(self, 0).data(), g, T(1),
              parent_grad(self, 1).data());
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require(w.rank() == 2, "linear: weight must be [in,out], got " + shape_str(w.shape()));
  require(x.rank() >= 1 && x.shape().back() == w.dim(0),
          "linear: input " + shape_str(x.shape()) + " does not match weight " +
              shape_str(w.shape()));
  const std::size_t in = w.dim(0), outw = w.dim(1);
  const std::size_t rows = x.numel() / in;
  const bool has_bias = bias.defined();
  if (has_bias)
    require(bias.shape() == Shape{outw}, "linear: bias must be [" + std::to_string(outw) +
                                             "], got " + shape_str(bias.shape()));
  std::vector<T> out(rows * outw);
  if (has_bias) {
    auto bd = bias.data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(bd.begin(), bd.end(), &out[r * outw]);
  }
  gemm<T>(false, false, rows, outw, in, T(1), x.data().data(), w.data().data(),
          has_bias ? T(1) : T(0), out.data());
  Shape shape = x.shape();
  shape.back() = outw;
  auto backward = [rows, in, outw](Node<T>& self) {
    const T* g = self.grad.data();
    if (parent_wants_grad(self, 0))
      gemm<T>(false, true, rows, in, outw, T(1), g, parent_data(self, 1).data(), T(1),
              parent_grad(self, 0).data());
    if (parent_wants_grad(self, 1))
      gemm<T>(true, false, in, outw, rows, T(1), parent_data(self, 0).data(), g, T(1),
              parent_grad(self, 1).data());
    if (self.parents.size() > 2 && parent_wants_grad(self, 2)) {
      auto& gb = parent_grad(self, 2);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < outw; ++o) gb[o] += g[r * outw + o];
    }
  };
  if (has_bias)
    return detail::make_result<T>(std::move(shape), std::move(out), {x, w, bias}, backward);
  return detail::make_result<T>(std::move(shape), std::move(out), {x, w}, backward);
}

namespace {

struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t filters, kh, kw, stride, pad;
  std::size_t out_h, out_w;
  std::size_t patch() const { return channels * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

// cols[(c*kh + i)*kw + j, b*P + oy*out_w + ox] = x[b, c, oy*s - p + i, ox*s - p + j].
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* cols) {
  const std::size_t n = g.batch * g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = cols + ((c * g.kh + i) * g.kw + j) * n;
        for (std::size_t b = 0; b < g.batch; ++b) {
          const T* plane = x + (b * g.channels + c) * g.height * g.width;
          T* dst = row + b * g.positions();
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                            static_cast<std::ptrdiff_t>(g.pad);
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                              static_cast<std::ptrdiff_t>(g.pad);
              const bool inside = iy >= 0 && ix >= 0 &&
                                  iy < static_cast<std::ptrdiff_t>(g.height) &&
                                  ix < static_cast<std::ptrdiff_t>(g.width);
              dst[oy * g.out_w + ox] = inside ? plane[iy * g.width + ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* x) {
  const std::size_t n = g.batch * g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = cols + ((c * g.kh + i) * g.kw + j) * n;
        for (std::size_t b = 0; b < g.batch; ++b) {
          T* plane = x + (b * g.channels + c) * g.height * g.width;
          const T* src = row + b * g.positions();
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                              static_cast<std::ptrdiff_t>(g.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
              plane[iy * g.width + ix] += src[oy * g.out_w + ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad) {
  require(x.rank() == 4, "conv2d: input must be [B,C,H,W], got " + shape_str(x.shape()));
  require(w.rank() == 4, "conv2d: weight must be [F,C,kh,kw], got " + shape_str(w.shape()));
  require(w.dim(1) == x.dim(1), "conv2d: weight " + shape_str(w.shape()) +
                                    " does not match input channels of " +
                                    shape_str(x.shape()));
  require(stride >= 1, "conv2d: stride must be >= 1");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3),
                 stride, pad, 0, 0};
  const std::size_t padded_h = g.height + 2 * pad, padded_w = g.width + 2 * pad;
  require(g.kh <= padded_h && g.kw <= padded_w,
          "conv2d: kernel " + shape_str(w.shape()) + " larger than padded input " +
              shape_str(x.shape()));
  require((padded_h - g.kh) % stride == 0 && (padded_w - g.kw) % stride == 0,
          "conv2d: non-integral output extent for input " + shape_str(x.shape()) +
              ", kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) + ", stride " +
              std::to_string(stride) + ", pad " + std::to_string(pad));
  g.out_h = (padded_h - g.kh) / stride + 1;
  g.out_w = (padded_w - g.kw) / stride + 1;
  const bool has_bias = bias.defined();
  if (has_bias)
    require(bias.shape() == Shape{g.filters}, "conv2d: bias must be [" +
                                                  std::to_string(g.filters) + "], got " +
                                                  shape_str(bias.shape()));

  const std::size_t n = g.batch * g.positions();
  std::vector<T> cols(g.patch() * n);
  im2col(g, x.data().data(), cols.data());
  std::vector<T> tmp(g.filters * n);
  gemm<T>(false, false, g.filters, n, g.patch(), T(1), w.data().data(), cols.data(), T(0),
          tmp.data());
  std::vector<T> out(g.batch * g.filters * g.positions());
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t f = 0; f < g.filters; ++f) {
      const T add = has_bias ? bias.data()[f] : T(0);
      const T* src = &tmp[f * n + b * g.positions()];
      T* dst = &out[(b * g.filters + f) * g.positions()];
      for (std::size_t p = 0; p < g.positions(); ++p) dst[p] = src[p] + add;
    }

  auto backward = [g](Node<T>& self) {
    const std::size_t n = g.batch * g.positions();
    std::vector<T> grad_tmp(g.filters * n);
    for (std::size_t b = 0; b < g.batch; ++b)
      for (std::size_t f = 0; f < g.filters; ++f)
        std::copy_n(&self.grad[(b * g.filters + f) * g.positions()], g.positions(),
                    &grad_tmp[f * n + b * g.positions()]);
    const bool want_x = parent_wants_grad(self, 0);
    const bool want_w = parent_wants_grad(self, 1);
    if (want_w) {
      std::vector<T> cols(g.patch() * n);
      im2col(g, parent_data(self, 0).data(), cols.data());
      gemm<T>(false, true, g.filters, g.patch(), n, T(1), grad_tmp.data(), cols.data(), T(1),
              parent_grad(self, 1).data());
    }
    if (want_x) {
      std::vector<T> dcols(g.patch() * n);
      gemm<T>(true, false, g.patch(), n, g.filters, T(1), parent_data(self, 1).data(),
              grad_tmp.data(), T(0), dcols.data());
      col2im(g, dcols.data(), parent_grad(self, 0).data());
    }
    if (self.parents.size() > 2 && parent_wants_grad(self, 2)) {
      auto& gb = parent_grad(self, 2);
      for (std::size_t f = 0; f < g.filters; ++f) {
        T acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += grad_tmp[f * n + i];
        gb[f] += acc;
      }
    }
  };
  Shape shape{g.batch, g.filters, g.out_h, g.out_w};
  if (has_bias)
    return detail::make_result<T>(std::move(shape), std::move(out), {x, w, bias}, backward);
  return detail::make_result<T>(std::move(shape), std::move(out), {x, w}, backward);
}

VITDAE_INSTANTIATE_BINARY(matmul)
template Tensor<float> linear(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> linear(const Tensor<double>&, const Tensor<double>&,
                               const Tensor<double>&);
template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                              std::size_t, std::size_t);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&,
                               const Tensor<double>&, std::size_t, std::size_t);

}  // namespace vitdae
