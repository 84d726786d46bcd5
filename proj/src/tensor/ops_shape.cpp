// Copyright 2026 The vitdae Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>

#include "ops_internal.hpp"

namespace vitdae {

using detail::Node;
using detail::parent_grad;
using detail::parent_wants_grad;
using detail::require;

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  require(shape_numel(shape) == a.numel(), "reshape: cannot view " + shape_str(a.shape()) +
                                                " as " + shape_str(shape));
  auto src = a.data();
  std::vector<T> out(src.begin(), src.end());
  return detail::make_result<T>(std::move(shape), std::move(out), {a}, [](Node<T>& self) {
    auto& gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// For each output element, the flat index of its source element.
std::vector<std::size_t> permutation_map(const Shape& in_shape,
                                         const std::vector<std::size_t>& order) {
  const std::size_t rank = in_shape.size();
  const auto in_strides = strides_of(in_shape);
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[order[i]];
  const std::size_t n = shape_numel(in_shape);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += idx[i] * in_strides[order[i]];
    map[flat] = src;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return map;
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& order) {
  const std::size_t rank = a.rank();
  require(order.size() == rank, "permute: order has " + std::to_string(order.size()) +
                                    " axes for tensor " + shape_str(a.shape()));
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < rank; ++i)
    require(sorted[i] == i, "permute: order is not a permutation");
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = a.dim(order[i]);
  auto map = permutation_map(a.shape(), order);
  auto src = a.data();
  std::vector<T> out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = src[map[i]];
  return detail::make_result<T>(std::move(out_shape), std::move(out), {a},
                                [map = std::move(map)](Node<T>& self) {
                                  auto& gx = parent_grad(self, 0);
                                  for (std::size_t i = 0; i < map.size(); ++i)
                                    gx[map[i]] += self.grad[i];
                                });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), "concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    require(p.rank() == first.size(), "concat: rank mismatch " + shape_str(p.shape()) +
                                          " vs " + shape_str(first));
    for (std::size_t i = 0; i < first.size(); ++i)
      if (i != axis)
        require(p.dim(i) == first[i], "concat: extent mismatch " + shape_str(p.shape()) +
                                          " vs " + shape_str(first) + " off axis " +
                                          std::to_string(axis));
    out_shape[axis] += p.dim(axis);
  }
  const std::size_t outer =
      std::accumulate(first.begin(), first.begin() + axis, std::size_t{1}, std::multiplies<>());
  const std::size_t inner = std::accumulate(first.begin() + axis + 1, first.end(),
                                            std::size_t{1}, std::multiplies<>());
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.dim(axis) * inner);
  const std::size_t row = out_shape[axis] * inner;
  std::vector<T> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    auto src = parts[j].data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(&src[o * widths[j]], widths[j], &out[o * row + offset]);
    offset += widths[j];
  }
  return detail::make_result<T>(std::move(out_shape), std::move(out), parts,
                                [widths, outer, row](Node<T>& self) {
                                  std::size_t off = 0;
                                  for (std::size_t j = 0; j < widths.size(); ++j) {
                                    if (parent_wants_grad(self, j)) {
                                      auto& gx = parent_grad(self, j);
                                      for (std::size_t o = 0; o < outer; ++o)
                                        for (std::size_t i = 0; i < widths[j]; ++i)
                                          gx[o * widths[j] + i] += self.grad[o * row + off + i];
                                    }
                                    off += widths[j];
                                  }
                                });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t length) {
  require(axis < a.rank(), "slice: axis out of range for " + shape_str(a.shape()));
  require(length > 0 && start + length <= a.dim(axis),
          "slice: range [" + std::to_string(start) + "," + std::to_string(start + length) +
              ") exceeds extent " + std::to_string(a.dim(axis)));
  const Shape& in = a.shape();
  const std::size_t outer =
      std::accumulate(in.begin(), in.begin() + axis, std::size_t{1}, std::multiplies<>());
  const std::size_t inner =
      std::accumulate(in.begin() + axis + 1, in.end(), std::size_t{1}, std::multiplies<>());
  const std::size_t in_row = in[axis] * inner;
  const std::size_t width = length * inner;
  const std::size_t offset = start * inner;
  Shape out_shape = in;
  out_shape[axis] = length;
  auto src = a.data();
  std::vector<T> out(outer * width);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(&src[o * in_row + offset], width, &out[o * width]);
  return detail::make_result<T>(std::move(out_shape), std::move(out), {a},
                                [=](Node<T>& self) {
                                  auto& gx = parent_grad(self, 0);
                                  for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t i = 0; i < width; ++i)
                                      gx[o * in_row + offset + i] += self.grad[o * width + i];
                                });
}

template <typename T>
Tensor<T> repeat_leading(const Tensor<T>& a, std::size_t count) {
  require(count > 0, "repeat_leading: count must be positive");
  Shape out_shape{count};
  out_shape.insert(out_shape.end(), a.shape().begin(), a.shape().end());
  const std::size_t n = a.numel();
  auto src = a.data();
  std::vector<T> out(count * n);
  for (std::size_t c = 0; c < count; ++c) std::copy(src.begin(), src.end(), &out[c * n]);
  return detail::make_result<T>(std::move(out_shape), std::move(out), {a},
                                [count, n](Node<T>& self) {
                                  auto& gx = parent_grad(self, 0);
                                  for (std::size_t c = 0; c < count; ++c)
                                    for (std::size_t i = 0; i < n; ++i)
                                      gx[i] += self.grad[c * n + i];
                                });
}

template <typename T>
Tensor<T> add_trailing(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  bool ok = bs.size() <= as.size();
  for (std::size_t i = 0; ok && i < bs.size(); ++i) ok = as[as.size() - bs.size() + i] == bs[i];
  require(ok, "add_trailing: " + shape_str(bs) + " is not a trailing shape of " + shape_str(as));
  const std::size_t inner = b.numel();
  const std::size_t outer = a.numel() / inner;
  auto ad = a.data();
  auto bd = b.data();
  std::vector<T> out(a.numel());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = ad[o * inner + i] + bd[i];
  return detail::make_result<T>(as, std::move(out), {a, b}, [outer, inner](Node<T>& self) {
    if (parent_wants_grad(self, 0)) {
      auto& ga = parent_grad(self, 0);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    }
    if (parent_wants_grad(self, 1)) {
      auto& gb = parent_grad(self, 1);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) gb[i] += self.grad[o * inner + i];
    }
  });
}

template <typename T>
Tensor<T> channel_affine(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift) {
  require(x.rank() >= 2, "channel_affine: input must be [B,C,...], got " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0);
  const std::size_t channels = x.dim(1);
  const Shape want{batch, channels};
  require(scale.shape() == want && shift.shape() == want,
          "channel_affine: scale/shift must be " + shape_str(want) + ", got " +
              shape_str(scale.shape()) + " and " + shape_str(shift.shape()));
  const std::size_t inner = x.numel() / (batch * channels);
  auto xd = x.data();
  auto sd = scale.data();
  auto bd = shift.data();
  std::vector<T> out(x.numel());
  for (std::size_t bc = 0; bc < batch * channels; ++bc)
    for (std::size_t i = 0; i < inner; ++i)
      out[bc * inner + i] = xd[bc * inner + i] * sd[bc] + bd[bc];
  return detail::make_result<T>(x.shape(), std::move(out), {x, scale, shift},
                                [batch, channels, inner](Node<T>& self) {
                                  const auto& xv = self.parents[0]->data;
                                  const auto& sv = self.parents[1]->data;
                                  const auto& g = self.grad;
                                  const std::size_t bcs = batch * channels;
                                  if (parent_wants_grad(self, 0)) {
                                    auto& gx = parent_grad(self, 0);
                                    for (std::size_t bc = 0; bc < bcs; ++bc)
                                      for (std::size_t i = 0; i < inner; ++i)
                                        gx[bc * inner + i] += g[bc * inner + i] * sv[bc];
                                  }
                                  if (parent_wants_grad(self, 1)) {
                                    auto& gs = parent_grad(self, 1);
                                    for (std::size_t bc = 0; bc < bcs; ++bc) {
                                      T acc = 0;
                                      for (std::size_t i = 0; i < inner; ++i)
                                        acc += g[bc * inner + i] * xv[bc * inner + i];
                                      gs[bc] += acc;
                                    }
                                  }
                                  if (parent_wants_grad(self, 2)) {
                                    auto& gb = parent_grad(self, 2);
                                    for (std::size_t bc = 0; bc < bcs; ++bc) {
                                      T acc = 0;
                                      for (std::size_t i = 0; i < inner; ++i)
                                        acc += g[bc * inner + i];
                                      gb[bc] += acc;
                                    }
                                  }
                                });
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  require(x.rank() == 4, "upsample_nearest2x: expected [B,C,H,W], got " + shape_str(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2), w = x.dim(3);
  auto src = x.data();
  std::vector<T> out(planes * 4 * h * w);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < 2 * h; ++i)
      for (std::size_t j = 0; j < 2 * w; ++j)
        out[(p * 2 * h + i) * 2 * w + j] = src[(p * h + i / 2) * w + j / 2];
  return detail::make_result<T>(Shape{x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out), {x},
                                [planes, h, w](Node<T>& self) {
                                  auto& gx = parent_grad(self, 0);
                                  for (std::size_t p = 0; p < planes; ++p)
                                    for (std::size_t i = 0; i < 2 * h; ++i)
                                      for (std::size_t j = 0; j < 2 * w; ++j)
                                        gx[(p * h + i / 2) * w + j / 2] +=
                                            self.grad[(p * 2 * h + i) * 2 * w + j];
                                });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require(x.rank() >= 3, "global_avg_pool: expected [B,C,...], got " + shape_str(x.shape()));
  const std::size_t bcs = x.dim(0) * x.dim(1);
  const std::size_t inner = x.numel() / bcs;
  const T inv = T(1) / static_cast<T>(inner);
  auto src = x.data();
  std::vector<T> out(bcs, T(0));
  for (std::size_t bc = 0; bc < bcs; ++bc) {
    for (std::size_t i = 0; i < inner; ++i) out[bc] += src[bc * inner + i];
    out[bc] *= inv;
  }
  return detail::make_result<T>(Shape{x.dim(0), x.dim(1)}, std::move(out), {x},
                                [bcs, inner, inv](Node<T>& self) {
                                  auto& gx = parent_grad(self, 0);
                                  for (std::size_t bc = 0; bc < bcs; ++bc)
                                    for (std::size_t i = 0; i < inner; ++i)
                                      gx[bc * inner + i] += self.grad[bc] * inv;
                                });
}

template Tensor<float> reshape(const Tensor<float>&, Shape);
template Tensor<double> reshape(const Tensor<double>&, Shape);
template Tensor<float> permute(const Tensor<float>&, const std::vector<std::size_t>&);
template Tensor<double> permute(const Tensor<double>&, const std::vector<std::size_t>&);
template Tensor<float> concat(const std::vector<Tensor<float>>&, std::size_t);
template Tensor<double> concat(const std::vector<Tensor<double>>&, std::size_t);
template Tensor<float> slice(const Tensor<float>&, std::size_t, std::size_t, std::size_t);
template Tensor<double> slice(const Tensor<double>&, std::size_t, std::size_t, std::size_t);
template Tensor<float> repeat_leading(const Tensor<float>&, std::size_t);
template Tensor<double> repeat_leading(const Tensor<double>&, std::size_t);
VITDAE_INSTANTIATE_BINARY(add_trailing)
template Tensor<float> channel_affine(const Tensor<float>&, const Tensor<float>&,
                                      const Tensor<float>&);
template Tensor<double> channel_affine(const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&);
VITDAE_INSTANTIATE_UNARY(upsample_nearest2x)
VITDAE_INSTANTIATE_UNARY(global_avg_pool)

}  // namespace vitdae
