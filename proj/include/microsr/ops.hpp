#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "microsr/tensor.hpp"

namespace microsr {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
TensorPtr<T> make_op(Shape shape, std::vector<T> data, std::vector<TensorPtr<T>> parents,
                     std::function<void(Tensor<T>&)> backward_fn) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  auto out = make_tensor<T>(std::move(shape), std::move(data), rg);
  out->parents = std::move(parents);
  if (rg) out->backward_fn = std::move(backward_fn);
  return out;
}

template <typename T>
void check_same_shape(const char* op, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape != b->shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a->shape) + " vs " +
                     shape_str(b->shape));
  }
}

// Numerically stable sigmoid.
template <typename T>
inline T sigmoid_val(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

// softplus(x) = log(1 + e^x), evaluated without overflow for large |x|.
template <typename T>
inline T softplus_val(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  detail::check_same_shape("add", a, b);
  std::vector<T> y(a->data.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->data[i] + b->data[i];
  return detail::make_op<T>(a->shape, std::move(y), {a, b}, [](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i];
  });
}

template <typename T>
TensorPtr<T> sub(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  detail::check_same_shape("sub", a, b);
  std::vector<T> y(a->data.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->data[i] - b->data[i];
  return detail::make_op<T>(a->shape, std::move(y), {a, b}, [](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
  });
}

template <typename T>
TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  detail::check_same_shape("mul", a, b);
  std::vector<T> y(a->data.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->data[i] * b->data[i];
  return detail::make_op<T>(a->shape, std::move(y), {a, b}, [](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.data[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.data[i];
  });
}

template <typename T>
TensorPtr<T> scale(const TensorPtr<T>& a, T c) {
  std::vector<T> y(a->data.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * a->data[i];
  return detail::make_op<T>(a->shape, std::move(y), {a}, [c](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += c * self.grad[i];
  });
}

template <typename T>
TensorPtr<T> add_scalar(const TensorPtr<T>& a, T c) {
  std::vector<T> y(a->data.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->data[i] + c;
  return detail::make_op<T>(a->shape, std::move(y), {a}, [](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

template <typename T>
TensorPtr<T> neg(const TensorPtr<T>& a) {
  return scale(a, T(-1));
}

// |x| with sign subgradient, 0 at the kink.
template <typename T>
TensorPtr<T> abs_op(const TensorPtr<T>& a) {
  std::vector<T> y(a->data.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::abs(a->data[i]);
  return detail::make_op<T>(a->shape, std::move(y), {a}, [](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      T x = pa.data[i];
      T s = (x > T(0)) ? T(1) : (x < T(0) ? T(-1) : T(0));
      pa.grad[i] += s * self.grad[i];
    }
  });
}

template <typename T>
TensorPtr<T> square(const TensorPtr<T>& a) {
  std::vector<T> y(a->data.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->data[i] * a->data[i];
  return detail::make_op<T>(a->shape, std::move(y), {a}, [](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      pa.grad[i] += T(2) * pa.data[i] * self.grad[i];
  });
}

template <typename T>
TensorPtr<T> softplus(const TensorPtr<T>& a) {
  std::vector<T> y(a->data.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = detail::softplus_val(a->data[i]);
  return detail::make_op<T>(a->shape, std::move(y), {a}, [](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      pa.grad[i] += detail::sigmoid_val(pa.data[i]) * self.grad[i];
  });
}

// max(x, leak*x) for leak in [0,1). The subgradient at 0 takes the positive
// branch (slope 1).
template <typename T>
TensorPtr<T> leaky_relu(const TensorPtr<T>& a, T leak) {
  if (!(leak >= T(0) && leak <= T(1))) {
    throw NumericError("leaky_relu: leak must be in [0,1], got " + std::to_string(leak));
  }
  std::vector<T> y(a->data.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    T x = a->data[i];
    y[i] = (x >= T(0)) ? x : leak * x;
  }
  return detail::make_op<T>(a->shape, std::move(y), {a}, [leak](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      pa.grad[i] += ((pa.data[i] >= T(0)) ? T(1) : leak) * self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> sum_all(const TensorPtr<T>& a) {
  T s = T(0);
  for (T v : a->data) s += v;
  return detail::make_op<T>(Shape{1}, {s}, {a}, [](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    T g = self.grad[0];
    for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
  });
}

template <typename T>
TensorPtr<T> mean_all(const TensorPtr<T>& a) {
  if (a->data.empty()) throw ShapeError("mean_all: empty tensor");
  T s = T(0);
  for (T v : a->data) s += v;
  T n = static_cast<T>(a->data.size());
  return detail::make_op<T>(Shape{1}, {s / n}, {a}, [n](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    T g = self.grad[0] / n;
    for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
  });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> reshape(const TensorPtr<T>& a, Shape new_shape) {
  if (numel(new_shape) != a->size()) {
    throw ShapeError("reshape: cannot view " + shape_str(a->shape) + " as " +
                     shape_str(new_shape));
  }
  return detail::make_op<T>(std::move(new_shape), a->data, {a}, [](Tensor<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

// Concatenate NCHW tensors along the channel axis.
template <typename T>
TensorPtr<T> concat_channels(const std::vector<TensorPtr<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  for (const auto& p : parts) {
    if (p->shape.size() != 4) {
      throw ShapeError("concat_channels: expected NCHW, got " + shape_str(p->shape));
    }
    if (p->shape[0] != parts[0]->shape[0] || p->shape[2] != parts[0]->shape[2] ||
        p->shape[3] != parts[0]->shape[3]) {
      throw ShapeError("concat_channels: incompatible shapes " + shape_str(parts[0]->shape) +
                       " vs " + shape_str(p->shape));
    }
  }
  const std::int64_t n = parts[0]->shape[0];
  const std::int64_t h = parts[0]->shape[2];
  const std::int64_t w = parts[0]->shape[3];
  const std::int64_t hw = h * w;
  std::int64_t c_total = 0;
  for (const auto& p : parts) c_total += p->shape[1];

  std::vector<T> y(static_cast<std::size_t>(n * c_total * hw));
  for (std::int64_t in = 0; in < n; ++in) {
    std::int64_t c_off = 0;
    for (const auto& p : parts) {
      const std::int64_t c = p->shape[1];
      const T* src = p->data.data() + in * c * hw;
      T* dst = y.data() + (in * c_total + c_off) * hw;
      std::copy(src, src + c * hw, dst);
      c_off += c;
    }
  }
  return detail::make_op<T>(Shape{n, c_total, h, w}, std::move(y),
                            std::vector<TensorPtr<T>>(parts), [n, hw, c_total](Tensor<T>& self) {
                              for (std::int64_t in = 0; in < n; ++in) {
                                std::int64_t c_off = 0;
                                for (auto& pp : self.parents) {
                                  auto& p = *pp;
                                  const std::int64_t c = p.shape[1];
                                  if (p.requires_grad) {
                                    const T* g = self.grad.data() + (in * c_total + c_off) * hw;
                                    T* dst = p.grad.data() + in * c * hw;
                                    for (std::int64_t i = 0; i < c * hw; ++i) dst[i] += g[i];
                                  }
                                  c_off += c;
                                }
                              }
                            });
}

// ---------------------------------------------------------------------------
// Neural-network primitives
// ---------------------------------------------------------------------------

namespace detail {

// Gather conv windows of one sample into a (C*KH*KW) x (OH*OW) matrix whose
// row ordering matches the flat OIHW kernel layout.
template <typename T>
void im2col(const T* x, std::int64_t c_in, std::int64_t h, std::int64_t w, std::int64_t kh,
            std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t oh,
            std::int64_t ow, ColMat<T>& cols) {
  cols.setZero(c_in * kh * kw, oh * ow);
  for (std::int64_t c = 0; c < c_in; ++c) {
    const T* plane = x + c * h * w;
    for (std::int64_t ikh = 0; ikh < kh; ++ikh) {
      for (std::int64_t ikw = 0; ikw < kw; ++ikw) {
        const std::int64_t row = (c * kh + ikh) * kw + ikw;
        for (std::int64_t y = 0; y < oh; ++y) {
          const std::int64_t iy = y * stride - pad + ikh;
          if (iy < 0 || iy >= h) continue;
          for (std::int64_t xo = 0; xo < ow; ++xo) {
            const std::int64_t ix = xo * stride - pad + ikw;
            if (ix < 0 || ix >= w) continue;
            cols(row, y * ow + xo) = plane[iy * w + ix];
          }
        }
      }
    }
  }
}

// Scatter-add of the column gradient back onto one input sample.
template <typename T>
void col2im_add(const ColMat<T>& dcols, std::int64_t c_in, std::int64_t h, std::int64_t w,
                std::int64_t kh, std::int64_t kw, std::int64_t stride, std::int64_t pad,
                std::int64_t oh, std::int64_t ow, T* dx) {
  for (std::int64_t c = 0; c < c_in; ++c) {
    T* plane = dx + c * h * w;
    for (std::int64_t ikh = 0; ikh < kh; ++ikh) {
      for (std::int64_t ikw = 0; ikw < kw; ++ikw) {
        const std::int64_t row = (c * kh + ikh) * kw + ikw;
        for (std::int64_t y = 0; y < oh; ++y) {
          const std::int64_t iy = y * stride - pad + ikh;
          if (iy < 0 || iy >= h) continue;
          for (std::int64_t xo = 0; xo < ow; ++xo) {
            const std::int64_t ix = xo * stride - pad + ikw;
            if (ix < 0 || ix >= w) continue;
            plane[iy * w + ix] += dcols(row, y * ow + xo);
          }
        }
      }
    }
  }
}

}  // namespace detail

// 2D cross-correlation of an NCHW input with an OIHW kernel plus per-channel
// bias. Output spatial dims follow floor((H + 2*pad - KH)/stride) + 1.
template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& x, const TensorPtr<T>& kernel, const TensorPtr<T>& bias,
                    std::int64_t stride, std::int64_t pad) {
  if (x->shape.size() != 4)
    throw ShapeError("conv2d: input must be NCHW, got " + shape_str(x->shape));
  if (kernel->shape.size() != 4)
    throw ShapeError("conv2d: kernel must be OIHW, got " + shape_str(kernel->shape));
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (pad < 0) throw ShapeError("conv2d: padding must be >= 0");
  const std::int64_t n = x->shape[0], c_in = x->shape[1], h = x->shape[2], w = x->shape[3];
  const std::int64_t c_out = kernel->shape[0], kc = kernel->shape[1], kh = kernel->shape[2],
                     kw = kernel->shape[3];
  if (kc != c_in) {
    throw ShapeError("conv2d: input channels " + std::to_string(c_in) +
                     " != kernel input channels " + std::to_string(kc));
  }
  if (bias->shape != Shape{c_out}) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias->shape) + " != [" +
                     std::to_string(c_out) + "]");
  }
  const std::int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::int64_t ow = (w + 2 * pad - kw) / stride + 1;
  if (oh < 1 || ow < 1) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel->shape) + " larger than padded input " +
                     shape_str(x->shape));
  }

  std::vector<T> y(static_cast<std::size_t>(n * c_out * oh * ow));
  {
    Eigen::Map<const detail::RowMat<T>> wmat(kernel->data.data(), c_out, c_in * kh * kw);
    detail::ColMat<T> cols;
    for (std::int64_t in = 0; in < n; ++in) {
      detail::im2col(x->data.data() + in * c_in * h * w, c_in, h, w, kh, kw, stride, pad, oh, ow,
                     cols);
      Eigen::Map<detail::RowMat<T>> out(y.data() + in * c_out * oh * ow, c_out, oh * ow);
      out.noalias() = wmat * cols;
      for (std::int64_t o = 0; o < c_out; ++o) out.row(o).array() += bias->data[o];
    }
  }

  auto bw = [n, c_in, h, w, c_out, kh, kw, stride, pad, oh, ow](Tensor<T>& self) {
    auto& px = *self.parents[0];
    auto& pk = *self.parents[1];
    auto& pb = *self.parents[2];
    Eigen::Map<const detail::RowMat<T>> wmat(pk.data.data(), c_out, c_in * kh * kw);
    detail::ColMat<T> cols;
    detail::ColMat<T> dcols;
    for (std::int64_t in = 0; in < n; ++in) {
      Eigen::Map<const detail::RowMat<T>> g(self.grad.data() + in * c_out * oh * ow, c_out,
                                            oh * ow);
      if (pb.requires_grad) {
        for (std::int64_t o = 0; o < c_out; ++o) pb.grad[o] += g.row(o).sum();
      }
      if (pk.requires_grad) {
        detail::im2col(px.data.data() + in * c_in * h * w, c_in, h, w, kh, kw, stride, pad, oh, ow,
                       cols);
        Eigen::Map<detail::RowMat<T>> dw(pk.grad.data(), c_out, c_in * kh * kw);
        dw.noalias() += g * cols.transpose();
      }
      if (px.requires_grad) {
        dcols.noalias() = wmat.transpose() * g;
        detail::col2im_add(dcols, c_in, h, w, kh, kw, stride, pad, oh, ow,
                           px.grad.data() + in * c_in * h * w);
      }
    }
  };
  return detail::make_op<T>(Shape{n, c_out, oh, ow}, std::move(y), {x, kernel, bias},
                            std::move(bw));
}

// Affine map of a row batch: y = x * w + b, x is N x F, w is F x G, b is G.
template <typename T>
TensorPtr<T> dense(const TensorPtr<T>& x, const TensorPtr<T>& weight, const TensorPtr<T>& bias) {
  if (x->shape.size() != 2)
    throw ShapeError("dense: input must be N x F, got " + shape_str(x->shape));
  if (weight->shape.size() != 2)
    throw ShapeError("dense: weight must be F x G, got " + shape_str(weight->shape));
  const std::int64_t n = x->shape[0], f = x->shape[1];
  const std::int64_t wf = weight->shape[0], g = weight->shape[1];
  if (f != wf) {
    throw ShapeError("dense: inner dims disagree, input " + shape_str(x->shape) + " vs weight " +
                     shape_str(weight->shape));
  }
  if (bias->shape != Shape{g}) {
    throw ShapeError("dense: bias shape " + shape_str(bias->shape) + " != [" + std::to_string(g) +
                     "]");
  }
  std::vector<T> y(static_cast<std::size_t>(n * g));
  if (n > 0) {
    Eigen::Map<const detail::RowMat<T>> xm(x->data.data(), n, f);
    Eigen::Map<const detail::RowMat<T>> wm(weight->data.data(), f, g);
    Eigen::Map<detail::RowMat<T>> ym(y.data(), n, g);
    ym.noalias() = xm * wm;
    for (std::int64_t r = 0; r < n; ++r)
      for (std::int64_t c = 0; c < g; ++c) ym(r, c) += bias->data[c];
  }
  auto bw = [n, f, g](Tensor<T>& self) {
    if (n == 0) return;
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    Eigen::Map<const detail::RowMat<T>> gm(self.grad.data(), n, g);
    if (px.requires_grad) {
      Eigen::Map<const detail::RowMat<T>> wm(pw.data.data(), f, g);
      Eigen::Map<detail::RowMat<T>> dx(px.grad.data(), n, f);
      dx.noalias() += gm * wm.transpose();
    }
    if (pw.requires_grad) {
      Eigen::Map<const detail::RowMat<T>> xm(px.data.data(), n, f);
      Eigen::Map<detail::RowMat<T>> dw(pw.grad.data(), f, g);
      dw.noalias() += xm.transpose() * gm;
    }
    if (pb.requires_grad) {
      for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < g; ++c) pb.grad[c] += gm(r, c);
    }
  };
  return detail::make_op<T>(Shape{n, g}, std::move(y), {x, weight, bias}, std::move(bw));
}

// Nearest-neighbor upsampling: each pixel becomes a factor x factor block.
template <typename T>
TensorPtr<T> upsample_nearest(const TensorPtr<T>& x, std::int64_t factor) {
  if (x->shape.size() != 4)
    throw ShapeError("upsample_nearest: input must be NCHW, got " + shape_str(x->shape));
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  const std::int64_t n = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
  const std::int64_t oh = h * factor, ow = w * factor;
  std::vector<T> y(static_cast<std::size_t>(n * c * oh * ow));
  for (std::int64_t p = 0; p < n * c; ++p) {
    const T* src = x->data.data() + p * h * w;
    T* dst = y.data() + p * oh * ow;
    for (std::int64_t r = 0; r < oh; ++r) {
      const T* srow = src + (r / factor) * w;
      T* drow = dst + r * ow;
      for (std::int64_t q = 0; q < ow; ++q) drow[q] = srow[q / factor];
    }
  }
  auto bw = [n, c, h, w, factor, oh, ow](Tensor<T>& self) {
    auto& px = *self.parents[0];
    for (std::int64_t p = 0; p < n * c; ++p) {
      const T* g = self.grad.data() + p * oh * ow;
      T* dx = px.grad.data() + p * h * w;
      for (std::int64_t r = 0; r < oh; ++r)
        for (std::int64_t q = 0; q < ow; ++q) dx[(r / factor) * w + q / factor] += g[r * ow + q];
    }
  };
  return detail::make_op<T>(Shape{n, c, oh, ow}, std::move(y), {x}, std::move(bw));
}

// 2x2 stride-2 max pooling with floor semantics on odd dims. Ties route the
// gradient to the first maximum in scan order.
template <typename T>
TensorPtr<T> maxpool2x2(const TensorPtr<T>& x) {
  if (x->shape.size() != 4)
    throw ShapeError("maxpool2x2: input must be NCHW, got " + shape_str(x->shape));
  const std::int64_t n = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
  const std::int64_t oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1) throw ShapeError("maxpool2x2: input too small " + shape_str(x->shape));
  std::vector<T> y(static_cast<std::size_t>(n * c * oh * ow));
  auto argmax = std::make_shared<std::vector<std::int64_t>>(y.size());
  for (std::int64_t p = 0; p < n * c; ++p) {
    const T* src = x->data.data() + p * h * w;
    for (std::int64_t r = 0; r < oh; ++r) {
      for (std::int64_t q = 0; q < ow; ++q) {
        std::int64_t best = (2 * r) * w + 2 * q;
        T bv = src[best];
        const std::int64_t cand[3] = {(2 * r) * w + 2 * q + 1, (2 * r + 1) * w + 2 * q,
                                      (2 * r + 1) * w + 2 * q + 1};
        for (std::int64_t idx : cand) {
          if (src[idx] > bv) {
            bv = src[idx];
            best = idx;
          }
        }
        const std::int64_t o = r * ow + q;
        y[p * oh * ow + o] = bv;
        (*argmax)[p * oh * ow + o] = p * h * w + best;
      }
    }
  }
  auto bw = [argmax](Tensor<T>& self) {
    auto& px = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[(*argmax)[i]] += self.grad[i];
  };
  return detail::make_op<T>(Shape{n, c, oh, ow}, std::move(y), {x}, std::move(bw));
}

// Per-sample Gram matrix of NCHW feature maps: G = F * F^T / (C*H*W) with F
// the C x (H*W) unrolling. Position-invariant second-order statistic.
template <typename T>
TensorPtr<T> gram_matrix(const TensorPtr<T>& feat) {
  if (feat->shape.size() != 4)
    throw ShapeError("gram_matrix: input must be NCHW, got " + shape_str(feat->shape));
  const std::int64_t n = feat->shape[0], c = feat->shape[1], h = feat->shape[2],
                     w = feat->shape[3];
  const std::int64_t hw = h * w;
  const T norm = T(1) / static_cast<T>(c * hw);
  std::vector<T> y(static_cast<std::size_t>(n * c * c));
  for (std::int64_t in = 0; in < n; ++in) {
    Eigen::Map<const detail::RowMat<T>> f(feat->data.data() + in * c * hw, c, hw);
    Eigen::Map<detail::RowMat<T>> g(y.data() + in * c * c, c, c);
    g.noalias() = f * f.transpose();
    g *= norm;
  }
  auto bw = [n, c, hw, norm](Tensor<T>& self) {
    auto& pf = *self.parents[0];
    for (std::int64_t in = 0; in < n; ++in) {
      Eigen::Map<const detail::RowMat<T>> f(pf.data.data() + in * c * hw, c, hw);
      Eigen::Map<const detail::RowMat<T>> dg(self.grad.data() + in * c * c, c, c);
      Eigen::Map<detail::RowMat<T>> df(pf.grad.data() + in * c * hw, c, hw);
      df.noalias() += norm * ((dg + dg.transpose()) * f);
    }
  };
  return detail::make_op<T>(Shape{n, c, c}, std::move(y), {feat}, std::move(bw));
}

// Repeat a single-channel NCHW batch across `copies` channels (gradient sums
// back over the copies).
template <typename T>
TensorPtr<T> repeat_channel(const TensorPtr<T>& x, std::int64_t copies) {
  if (x->shape.size() != 4 || x->shape[1] != 1)
    throw ShapeError("repeat_channel: input must be Nx1xHxW, got " + shape_str(x->shape));
  if (copies < 1) throw ShapeError("repeat_channel: copies must be >= 1");
  const std::int64_t n = x->shape[0], h = x->shape[2], w = x->shape[3];
  const std::int64_t hw = h * w;
  std::vector<T> y(static_cast<std::size_t>(n * copies * hw));
  for (std::int64_t in = 0; in < n; ++in)
    for (std::int64_t c = 0; c < copies; ++c)
      std::copy(x->data.begin() + in * hw, x->data.begin() + (in + 1) * hw,
                y.begin() + (in * copies + c) * hw);
  auto bw = [n, copies, hw](Tensor<T>& self) {
    auto& px = *self.parents[0];
    for (std::int64_t in = 0; in < n; ++in)
      for (std::int64_t c = 0; c < copies; ++c) {
        const T* g = self.grad.data() + (in * copies + c) * hw;
        T* dst = px.grad.data() + in * hw;
        for (std::int64_t i = 0; i < hw; ++i) dst[i] += g[i];
      }
  };
  return detail::make_op<T>(Shape{n, copies, h, w}, std::move(y), {x}, std::move(bw));
}

}  // namespace microsr
