#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "octnet/tensor.hpp"
#include "octnet/threading.hpp"

namespace octnet {

enum class Padding { valid, same };

inline const char* padding_name(Padding p) { return p == Padding::valid ? "valid" : "same"; }

// Output spatial extent. valid: floor((in - k) / s) + 1; same: ceil(in / s).
inline int conv_out_dim(int in, int k, int stride, Padding pad) {
  // in < k needs an explicit branch: integer division truncates toward zero,
  // which would let a too-large kernel slip past the guard below.
  int out = pad == Padding::valid ? (in >= k ? (in - k) / stride + 1 : 0) : (in + stride - 1) / stride;
  if (out < 1) {
    throw SpecError("kernel " + std::to_string(k) + " stride " + std::to_string(stride) +
                    " over extent " + std::to_string(in) + " (" + padding_name(pad) +
                    ") yields output dim " + std::to_string(out));
  }
  return out;
}

struct PadAmount {
  int top = 0, bottom = 0, left = 0, right = 0;
  bool any() const { return top || bottom || left || right; }
};

// Same-padding split: symmetric, extra pixel on bottom/right when odd.
inline PadAmount same_pad_amount(int in_h, int in_w, int kh, int kw, int stride) {
  int out_h = (in_h + stride - 1) / stride;
  int out_w = (in_w + stride - 1) / stride;
  int pad_h = std::max(0, (out_h - 1) * stride + kh - in_h);
  int pad_w = std::max(0, (out_w - 1) * stride + kw - in_w);
  return {pad_h / 2, pad_h - pad_h / 2, pad_w / 2, pad_w - pad_w / 2};
}

struct ConvSpec {
  int kernel_h = 1;
  int kernel_w = 1;
  int in_channels = 1;
  int out_channels = 1;
  int stride = 1;
  Padding padding = Padding::valid;

  void validate() const {
    if (kernel_h < 1 || kernel_w < 1 || in_channels < 1 || out_channels < 1 || stride < 1) {
      throw SpecError("conv spec fields must be positive");
    }
  }
};

namespace detail {

inline void require_rank4(const Shape& s, const char* what) {
  if (s.size() != 4) throw ShapeError(std::string(what) + " must be rank 4 (NxHxWxC), got " + shape_str(s));
}

template <typename T>
Tensor<T> pad_nhwc(const Tensor<T>& in, const PadAmount& p, T fill = T(0)) {
  if (!p.any()) return in;
  int n = in.dim(0), h = in.dim(1), w = in.dim(2), c = in.dim(3);
  Tensor<T> out(Shape{n, h + p.top + p.bottom, w + p.left + p.right, c}, fill);
  for (int i = 0; i < n; ++i) {
    for (int y = 0; y < h; ++y) {
      const T* src = &in.at(i, y, 0, 0);
      T* dst = &out.at(i, y + p.top, p.left, 0);
      std::copy(src, src + static_cast<int64_t>(w) * c, dst);
    }
  }
  return out;
}

}  // namespace detail

// Direct cross-correlation over NHWC input with kernels laid out
// [kh, kw, in_channels, out_channels]. Bias may be empty.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const std::vector<T>& bias,
                 const ConvSpec& spec) {
  spec.validate();
  detail::require_rank4(input.shape(), "conv2d input");
  detail::require_rank4(kernels.shape(), "conv2d kernels");
  if (kernels.dim(0) != spec.kernel_h || kernels.dim(1) != spec.kernel_w ||
      kernels.dim(2) != spec.in_channels || kernels.dim(3) != spec.out_channels) {
    throw ShapeError("kernel tensor " + shape_str(kernels.shape()) + " does not match spec [" +
                     std::to_string(spec.kernel_h) + "x" + std::to_string(spec.kernel_w) + "x" +
                     std::to_string(spec.in_channels) + "x" + std::to_string(spec.out_channels) + "]");
  }
  if (input.dim(3) != spec.in_channels) {
    throw ShapeError("conv2d input " + shape_str(input.shape()) + " has " + std::to_string(input.dim(3)) +
                     " channels, kernels " + shape_str(kernels.shape()) + " expect " +
                     std::to_string(spec.in_channels));
  }
  if (!bias.empty() && static_cast<int>(bias.size()) != spec.out_channels) {
    throw ShapeError("bias length " + std::to_string(bias.size()) + " != out_channels " +
                     std::to_string(spec.out_channels));
  }

  int out_h = conv_out_dim(input.dim(1), spec.kernel_h, spec.stride, spec.padding);
  int out_w = conv_out_dim(input.dim(2), spec.kernel_w, spec.stride, spec.padding);

  Tensor<T> src = input;
  if (spec.padding == Padding::same) {
    src = detail::pad_nhwc(input, same_pad_amount(input.dim(1), input.dim(2), spec.kernel_h,
                                                  spec.kernel_w, spec.stride));
  }

  const int n = input.dim(0), cin = spec.in_channels, cout = spec.out_channels;
  const int kh = spec.kernel_h, kw = spec.kernel_w, stride = spec.stride;
  Tensor<T> out(Shape{n, out_h, out_w, cout});

  parallel_for(n, [&](int64_t i) {
    std::vector<T> acc(static_cast<size_t>(cout));
    for (int oh = 0; oh < out_h; ++oh) {
      for (int ow = 0; ow < out_w; ++ow) {
        if (bias.empty()) {
          std::fill(acc.begin(), acc.end(), T(0));
        } else {
          std::copy(bias.begin(), bias.end(), acc.begin());
        }
        for (int y = 0; y < kh; ++y) {
          for (int x = 0; x < kw; ++x) {
            const T* px = &src.at(static_cast<int>(i), oh * stride + y, ow * stride + x, 0);
            const T* krow = &kernels.at(y, x, 0, 0);
            for (int ic = 0; ic < cin; ++ic) {
              T a = px[ic];
              const T* k = krow + static_cast<int64_t>(ic) * cout;
              for (int oc = 0; oc < cout; ++oc) acc[static_cast<size_t>(oc)] += a * k[oc];
            }
          }
        }
        std::copy(acc.begin(), acc.end(), &out.at(static_cast<int>(i), oh, ow, 0));
      }
    }
  });
  return out;
}

// Per-channel spatial convolution; kernels [kh, kw, channels, 1].
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& kernels,
                           const std::vector<T>& bias, int stride, Padding padding) {
  detail::require_rank4(input.shape(), "depthwise_conv2d input");
  detail::require_rank4(kernels.shape(), "depthwise_conv2d kernels");
  if (kernels.dim(3) != 1) {
    throw ShapeError("depthwise kernels must have channel multiplier 1, got " + shape_str(kernels.shape()));
  }
  const int c = input.dim(3);
  if (kernels.dim(2) != c) {
    throw ShapeError("depthwise kernels " + shape_str(kernels.shape()) + " do not match input channels " +
                     std::to_string(c) + " of " + shape_str(input.shape()));
  }
  if (!bias.empty() && static_cast<int>(bias.size()) != c) {
    throw ShapeError("depthwise bias length " + std::to_string(bias.size()) + " != channels " + std::to_string(c));
  }
  if (stride < 1) throw SpecError("stride must be positive");

  const int kh = kernels.dim(0), kw = kernels.dim(1);
  int out_h = conv_out_dim(input.dim(1), kh, stride, padding);
  int out_w = conv_out_dim(input.dim(2), kw, stride, padding);

  Tensor<T> src = input;
  if (padding == Padding::same) {
    src = detail::pad_nhwc(input, same_pad_amount(input.dim(1), input.dim(2), kh, kw, stride));
  }

  const int n = input.dim(0);
  Tensor<T> out(Shape{n, out_h, out_w, c});
  parallel_for(n, [&](int64_t i) {
    std::vector<T> acc(static_cast<size_t>(c));
    for (int oh = 0; oh < out_h; ++oh) {
      for (int ow = 0; ow < out_w; ++ow) {
        if (bias.empty()) {
          std::fill(acc.begin(), acc.end(), T(0));
        } else {
          std::copy(bias.begin(), bias.end(), acc.begin());
        }
        for (int y = 0; y < kh; ++y) {
          for (int x = 0; x < kw; ++x) {
            const T* px = &src.at(static_cast<int>(i), oh * stride + y, ow * stride + x, 0);
            const T* k = &kernels.at(y, x, 0, 0);
            for (int ch = 0; ch < c; ++ch) acc[static_cast<size_t>(ch)] += px[ch] * k[ch];
          }
        }
        std::copy(acc.begin(), acc.end(), &out.at(static_cast<int>(i), oh, ow, 0));
      }
    }
  });
  return out;
}

enum class SeparableOrder { pointwise_first, depthwise_first };

inline const char* separable_order_name(SeparableOrder o) {
  return o == SeparableOrder::pointwise_first ? "pointwise_first" : "depthwise_first";
}

// Factorized convolution: a 1x1 cross-channel map composed with a per-channel
// spatial map, in either order. pointwise is [1,1,Cin,Cm]; depthwise is
// [kh,kw,Cm,1] for pointwise_first and [kh,kw,Cin,1] for depthwise_first
// (where the pointwise map then takes Cin -> Cm).
template <typename T>
Tensor<T> depthwise_separable_conv(const Tensor<T>& input, const Tensor<T>& pointwise,
                                   const Tensor<T>& depthwise, SeparableOrder order,
                                   const ConvSpec& spec) {
  detail::require_rank4(pointwise.shape(), "separable pointwise kernels");
  detail::require_rank4(depthwise.shape(), "separable depthwise kernels");
  if (pointwise.dim(0) != 1 || pointwise.dim(1) != 1) {
    throw ShapeError("pointwise kernels must be 1x1, got " + shape_str(pointwise.shape()));
  }
  const int cin = input.dim(3);
  const int cm = pointwise.dim(3);
  if (pointwise.dim(2) != cin) {
    throw ShapeError("separable channel chain mismatch: input has " + std::to_string(cin) +
                     " channels, pointwise " + shape_str(pointwise.shape()) + " expects " +
                     std::to_string(pointwise.dim(2)));
  }
  ConvSpec pw_spec{1, 1, cin, cm, 1, Padding::same};

  if (order == SeparableOrder::pointwise_first) {
    if (depthwise.dim(2) != cm) {
      throw ShapeError("separable channel chain mismatch: pointwise yields " + std::to_string(cm) +
                       " channels, depthwise " + shape_str(depthwise.shape()) + " expects " +
                       std::to_string(depthwise.dim(2)));
    }
    Tensor<T> mid = conv2d(input, pointwise, {}, pw_spec);
    return depthwise_conv2d(mid, depthwise, {}, spec.stride, spec.padding);
  }
  if (depthwise.dim(2) != cin) {
    throw ShapeError("separable channel chain mismatch: input has " + std::to_string(cin) +
                     " channels, depthwise " + shape_str(depthwise.shape()) + " expects " +
                     std::to_string(depthwise.dim(2)));
  }
  Tensor<T> mid = depthwise_conv2d(input, depthwise, {}, spec.stride, spec.padding);
  return conv2d(mid, pointwise, {}, pw_spec);
}

// Per-window channelwise maximum. Default padding is none (floor division);
// same mode clips windows to the valid region, as the backbone designs need.
// argmax_out, when given, receives the flat (h*W+w) source index per output
// cell, first occurrence winning ties in row-major window order.
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& input, int size, int stride,
                     Padding padding = Padding::valid, Tensor<int>* argmax_out = nullptr) {
  detail::require_rank4(input.shape(), "max_pool2d input");
  if (size < 1 || stride < 1) throw SpecError("pool size and stride must be >= 1");
  const int n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  int out_h = conv_out_dim(h, size, stride, padding);
  int out_w = conv_out_dim(w, size, stride, padding);
  PadAmount pad;
  if (padding == Padding::same) pad = same_pad_amount(h, w, size, size, stride);

  Tensor<T> out(Shape{n, out_h, out_w, c});
  if (argmax_out) *argmax_out = Tensor<int>(Shape{n, out_h, out_w, c});
  parallel_for(n, [&](int64_t i) {
    for (int oh = 0; oh < out_h; ++oh) {
      int y0 = oh * stride - pad.top;
      int y1 = std::min(y0 + size, h);
      y0 = std::max(y0, 0);
      for (int ow = 0; ow < out_w; ++ow) {
        int x0 = ow * stride - pad.left;
        int x1 = std::min(x0 + size, w);
        x0 = std::max(x0, 0);
        T* dst = &out.at(static_cast<int>(i), oh, ow, 0);
        int* arg = argmax_out ? &argmax_out->at(static_cast<int>(i), oh, ow, 0) : nullptr;
        for (int ch = 0; ch < c; ++ch) {
          T best = -std::numeric_limits<T>::infinity();
          int best_idx = -1;
          for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
              T v = input.at(static_cast<int>(i), y, x, ch);
              if (v > best) {
                best = v;
                best_idx = y * w + x;
              }
            }
          }
          dst[ch] = best;
          if (arg) arg[ch] = best_idx;
        }
      }
    }
  });
  return out;
}

// Matrix product plus broadcast bias: [N,D] x [D,M] -> [N,M].
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const std::vector<T>& bias) {
  if (input.rank() != 2) throw ShapeError("dense input must be rank 2, got " + shape_str(input.shape()));
  if (weights.rank() != 2) throw ShapeError("dense weights must be rank 2, got " + shape_str(weights.shape()));
  const int n = input.dim(0), d = input.dim(1), m = weights.dim(1);
  if (weights.dim(0) != d) {
    throw ShapeError("dense inner dims mismatch: input " + shape_str(input.shape()) + " vs weights " +
                     shape_str(weights.shape()));
  }
  if (!bias.empty() && static_cast<int>(bias.size()) != m) {
    throw ShapeError("dense bias length " + std::to_string(bias.size()) + " != units " + std::to_string(m));
  }
  Tensor<T> out(Shape{n, m});
  parallel_for(n, [&](int64_t i) {
    T* dst = &out.at(static_cast<int>(i), 0);
    if (bias.empty()) {
      std::fill(dst, dst + m, T(0));
    } else {
      std::copy(bias.begin(), bias.end(), dst);
    }
    const T* src = &input.at(static_cast<int>(i), 0);
    for (int k = 0; k < d; ++k) {
      T a = src[k];
      const T* wrow = &weights.at(k, 0);
      for (int j = 0; j < m; ++j) dst[j] += a * wrow[j];
    }
  });
  return out;
}

enum class ActKind { relu, relu6, softmax };

inline const char* act_name(ActKind k) {
  switch (k) {
    case ActKind::relu: return "relu";
    case ActKind::relu6: return "relu6";
    default: return "softmax";
  }
}

// relu / relu6 elementwise; softmax over the last axis in max-subtracted form.
template <typename T>
Tensor<T> activation(const Tensor<T>& input, ActKind kind) {
  Tensor<T> out = input;
  T* p = out.data();
  const int64_t total = out.size();
  if (kind == ActKind::relu) {
    for (int64_t i = 0; i < total; ++i) p[i] = p[i] > T(0) ? p[i] : T(0);
    return out;
  }
  if (kind == ActKind::relu6) {
    for (int64_t i = 0; i < total; ++i) p[i] = std::min(std::max(p[i], T(0)), T(6));
    return out;
  }
  const int k = out.dim(out.rank() - 1);
  const int64_t rows = total / k;
  for (int64_t r = 0; r < rows; ++r) {
    T* row = p + r * k;
    T mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int j = 0; j < k; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (int j = 0; j < k; ++j) row[j] /= sum;
  }
  return out;
}

}  // namespace octnet
