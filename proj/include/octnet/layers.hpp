#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "octnet/kernels.hpp"
#include "octnet/rng.hpp"
#include "octnet/tensor.hpp"

namespace octnet {

enum class Mode { train, infer };

inline const char* mode_name(Mode m) { return m == Mode::train ? "train" : "infer"; }

template <typename T>
Tensor<T> tensor_add(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("elementwise add of mismatched shapes " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor<T> out = a;
  const T* pb = b.data();
  T* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] += pb[i];
  return out;
}

// View into a layer parameter and its gradient buffer.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
  bool trainable;
};

// Activations/masks a layer squirrels away during forward for use by backward.
// Opaque to callers; `valid` guards against backward-without-forward.
template <typename T>
struct ForwardCache {
  bool valid = false;
  Mode mode = Mode::infer;
  Shape out_shape;
  Tensor<T> a, b;
  Tensor<int> idx;
  std::vector<ForwardCache<T>> children;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual std::string describe() const { return kind(); }

  // Shape inference + parameter allocation from the per-sample input shape
  // (no batch dimension). Returns the per-sample output shape.
  virtual Shape build(const Shape& input) = 0;

  virtual Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) = 0;

  virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) { (void)prefix, (void)out; }
  virtual void init_params(Rng& rng) { (void)rng; }

  // Seed plumbing for stochastic layers (dropout); no-op elsewhere.
  virtual void set_stochastic_seed(uint64_t seed) { (void)seed; }
  virtual void reset_stochastic_counter() {}

  const Shape& input_shape() const { return in_shape_; }
  const Shape& output_shape() const { return out_shape_; }
  bool built() const { return built_; }

  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

 protected:
  Shape finish_build(const Shape& in, Shape out) {
    check_shape_valid(in);
    check_shape_valid(out);
    in_shape_ = in;
    out_shape_ = std::move(out);
    built_ = true;
    return out_shape_;
  }

  void check_built() const {
    if (!built_) throw ContractError(kind() + ": layer used before build()");
  }

  // Batch tensors carry a leading N; everything after must match the built shape.
  void check_input(const Tensor<T>& x) const {
    check_built();
    bool ok = x.rank() == static_cast<int>(in_shape_.size()) + 1;
    if (ok) {
      for (size_t i = 0; i < in_shape_.size(); ++i) {
        if (x.dim(static_cast<int>(i) + 1) != in_shape_[i]) ok = false;
      }
    }
    if (!ok) {
      throw ShapeError(kind() + ": input " + shape_str(x.shape()) + " incompatible with built shape N x " +
                       shape_str(in_shape_));
    }
  }

  void check_cache(const ForwardCache<T>& cache, const Tensor<T>& grad_out) const {
    check_built();
    if (!cache.valid) {
      throw ContractError(kind() + ": backward() called without a cache from a preceding forward()");
    }
    if (grad_out.shape() != cache.out_shape) {
      throw ShapeError(kind() + ": grad_out " + shape_str(grad_out.shape()) +
                       " does not match forward output " + shape_str(cache.out_shape));
    }
  }

  void start_cache(ForwardCache<T>& cache, Mode mode) const {
    cache.valid = false;
    cache.mode = mode;
    cache.children.clear();
  }

  void seal_cache(ForwardCache<T>& cache, const Tensor<T>& out) const {
    cache.out_shape = out.shape();
    cache.valid = true;
  }

  // Owned parameter + its gradient.
  struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;

    void alloc(const Shape& shape, T fill_value, bool is_trainable) {
      value = Tensor<T>(shape, fill_value);
      grad = Tensor<T>(shape, T(0));
      trainable = is_trainable;
    }
    ParamRef<T> ref(const std::string& prefix) { return {prefix + name, &value, &grad, trainable}; }
  };

  static void he_init(Tensor<T>& w, int64_t fan_in, Rng& rng) {
    T stddev = static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in)));
    T* p = w.data();
    for (int64_t i = 0; i < w.size(); ++i) p[i] = static_cast<T>(rng.normal()) * stddev;
  }

  Shape in_shape_, out_shape_;
  bool built_ = false;
  std::string label_;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

// ---------------------------------------------------------------------------
// conv
// ---------------------------------------------------------------------------
template <typename T>
class ConvLayer : public Layer<T> {
 public:
  ConvLayer(int filters, int kernel_h, int kernel_w, int stride, Padding padding, bool use_bias = true)
      : filters_(filters), kh_(kernel_h), kw_(kernel_w), stride_(stride), padding_(padding),
        use_bias_(use_bias) {
    if (filters < 1) throw ParamError("conv filters must be >= 1");
  }

  std::string kind() const override { return "conv"; }
  std::string describe() const override {
    return "conv(" + std::to_string(filters_) + "," + std::to_string(kh_) + "x" + std::to_string(kw_) +
           ",s" + std::to_string(stride_) + "," + padding_name(padding_) + (use_bias_ ? "" : ",nobias") + ")";
  }

  Shape build(const Shape& input) override {
    if (input.size() != 3) throw ShapeError("conv expects HxWxC input, got " + shape_str(input));
    spec_ = ConvSpec{kh_, kw_, input[2], filters_, stride_, padding_};
    spec_.validate();
    int oh = conv_out_dim(input[0], kh_, stride_, padding_);
    int ow = conv_out_dim(input[1], kw_, stride_, padding_);
    kernel_.name = "kernel";
    kernel_.alloc(Shape{kh_, kw_, input[2], filters_}, T(0), true);
    if (use_bias_) {
      bias_.name = "bias";
      bias_.alloc(Shape{filters_}, T(0), true);
    }
    return this->finish_build(input, Shape{oh, ow, filters_});
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back(kernel_.ref(prefix));
    if (use_bias_) out.push_back(bias_.ref(prefix));
  }

  void init_params(Rng& rng) override {
    this->check_built();
    this->he_init(kernel_.value, static_cast<int64_t>(kh_) * kw_ * spec_.in_channels, rng);
    if (use_bias_) bias_.value.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    if (padding_ == Padding::same) {
      cache.a = detail::pad_nhwc(input, same_pad_amount(input.dim(1), input.dim(2), kh_, kw_, stride_));
    } else {
      cache.a = input;
    }
    ConvSpec padded_spec = spec_;
    padded_spec.padding = Padding::valid;
    Tensor<T> out = conv2d(cache.a, kernel_.value, bias_vec(), padded_spec);
    this->seal_cache(cache, out);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    const Tensor<T>& src = cache.a;
    const int n = src.dim(0), cin = spec_.in_channels, cout = filters_;
    const int oh_n = grad_out.dim(1), ow_n = grad_out.dim(2), s = stride_;

    if (use_bias_) {
      T* gb = bias_.grad.data();
      const T* g = grad_out.data();
      const int64_t rows = static_cast<int64_t>(n) * oh_n * ow_n;
      for (int64_t r = 0; r < rows; ++r) {
        const T* row = g + r * cout;
        for (int oc = 0; oc < cout; ++oc) gb[oc] += row[oc];
      }
    }

    // Each (y,x) kernel position owns a disjoint slice of the kernel gradient.
    parallel_for(static_cast<int64_t>(kh_) * kw_, [&](int64_t t) {
      const int y = static_cast<int>(t) / kw_, x = static_cast<int>(t) % kw_;
      for (int i = 0; i < n; ++i) {
        for (int oh = 0; oh < oh_n; ++oh) {
          for (int ow = 0; ow < ow_n; ++ow) {
            const T* px = &src.at(i, oh * s + y, ow * s + x, 0);
            const T* g = &grad_out.at(i, oh, ow, 0);
            for (int ic = 0; ic < cin; ++ic) {
              T a = px[ic];
              T* krow = &kernel_.grad.at(y, x, ic, 0);
              for (int oc = 0; oc < cout; ++oc) krow[oc] += a * g[oc];
            }
          }
        }
      }
    });

    Tensor<T> gsrc(src.shape(), T(0));
    parallel_for(n, [&](int64_t ii) {
      const int i = static_cast<int>(ii);
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          const T* g = &grad_out.at(i, oh, ow, 0);
          for (int y = 0; y < kh_; ++y) {
            for (int x = 0; x < kw_; ++x) {
              T* dst = &gsrc.at(i, oh * s + y, ow * s + x, 0);
              const T* kbase = &kernel_.value.at(y, x, 0, 0);
              for (int ic = 0; ic < cin; ++ic) {
                const T* k = kbase + static_cast<int64_t>(ic) * cout;
                T acc = T(0);
                for (int oc = 0; oc < cout; ++oc) acc += k[oc] * g[oc];
                dst[ic] += acc;
              }
            }
          }
        }
      }
    });

    if (padding_ == Padding::same) {
      PadAmount p = same_pad_amount(this->in_shape_[0], this->in_shape_[1], kh_, kw_, stride_);
      return crop(gsrc, p, this->in_shape_[0], this->in_shape_[1]);
    }
    return gsrc;
  }

  int stride() const { return stride_; }
  int filters() const { return filters_; }
  int kernel_h() const { return kh_; }
  int kernel_w() const { return kw_; }
  bool has_bias() const { return use_bias_; }

 private:
  std::vector<T> bias_vec() const {
    if (!use_bias_) return {};
    return std::vector<T>(bias_.value.data(), bias_.value.data() + bias_.value.size());
  }

  static Tensor<T> crop(const Tensor<T>& g, const PadAmount& p, int h, int w) {
    if (!p.any()) return g;
    Tensor<T> out(Shape{g.dim(0), h, w, g.dim(3)});
    for (int i = 0; i < g.dim(0); ++i) {
      for (int y = 0; y < h; ++y) {
        const T* src = &g.at(i, y + p.top, p.left, 0);
        T* dst = &out.at(i, y, 0, 0);
        std::copy(src, src + static_cast<int64_t>(w) * g.dim(3), dst);
      }
    }
    return out;
  }

  int filters_, kh_, kw_, stride_;
  Padding padding_;
  bool use_bias_;
  ConvSpec spec_;
  typename Layer<T>::Param kernel_, bias_;
};

// ---------------------------------------------------------------------------
// depthwise conv
// ---------------------------------------------------------------------------
template <typename T>
class DepthwiseConvLayer : public Layer<T> {
 public:
  DepthwiseConvLayer(int kernel_h, int kernel_w, int stride, Padding padding, bool use_bias = true)
      : kh_(kernel_h), kw_(kernel_w), stride_(stride), padding_(padding), use_bias_(use_bias) {
    if (kh_ < 1 || kw_ < 1 || stride_ < 1) throw ParamError("depthwise conv kernel/stride must be >= 1");
  }

  std::string kind() const override { return "depthwise_conv"; }
  std::string describe() const override {
    return "depthwise_conv(" + std::to_string(kh_) + "x" + std::to_string(kw_) + ",s" +
           std::to_string(stride_) + "," + padding_name(padding_) + ")";
  }

  Shape build(const Shape& input) override {
    if (input.size() != 3) throw ShapeError("depthwise_conv expects HxWxC input, got " + shape_str(input));
    channels_ = input[2];
    int oh = conv_out_dim(input[0], kh_, stride_, padding_);
    int ow = conv_out_dim(input[1], kw_, stride_, padding_);
    kernel_.name = "kernel";
    kernel_.alloc(Shape{kh_, kw_, channels_, 1}, T(0), true);
    if (use_bias_) {
      bias_.name = "bias";
      bias_.alloc(Shape{channels_}, T(0), true);
    }
    return this->finish_build(input, Shape{oh, ow, channels_});
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back(kernel_.ref(prefix));
    if (use_bias_) out.push_back(bias_.ref(prefix));
  }

  void init_params(Rng& rng) override {
    this->check_built();
    this->he_init(kernel_.value, static_cast<int64_t>(kh_) * kw_, rng);
    if (use_bias_) bias_.value.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    if (padding_ == Padding::same) {
      cache.a = detail::pad_nhwc(input, same_pad_amount(input.dim(1), input.dim(2), kh_, kw_, stride_));
    } else {
      cache.a = input;
    }
    std::vector<T> bias;
    if (use_bias_) bias.assign(bias_.value.data(), bias_.value.data() + bias_.value.size());
    Tensor<T> out = depthwise_conv2d(cache.a, kernel_.value, bias, stride_, Padding::valid);
    this->seal_cache(cache, out);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    const Tensor<T>& src = cache.a;
    const int n = src.dim(0), c = channels_, s = stride_;
    const int oh_n = grad_out.dim(1), ow_n = grad_out.dim(2);

    if (use_bias_) {
      T* gb = bias_.grad.data();
      const T* g = grad_out.data();
      const int64_t rows = static_cast<int64_t>(n) * oh_n * ow_n;
      for (int64_t r = 0; r < rows; ++r) {
        const T* row = g + r * c;
        for (int ch = 0; ch < c; ++ch) gb[ch] += row[ch];
      }
    }

    parallel_for(static_cast<int64_t>(kh_) * kw_, [&](int64_t t) {
      const int y = static_cast<int>(t) / kw_, x = static_cast<int>(t) % kw_;
      T* krow = &kernel_.grad.at(y, x, 0, 0);
      for (int i = 0; i < n; ++i) {
        for (int oh = 0; oh < oh_n; ++oh) {
          for (int ow = 0; ow < ow_n; ++ow) {
            const T* px = &src.at(i, oh * s + y, ow * s + x, 0);
            const T* g = &grad_out.at(i, oh, ow, 0);
            for (int ch = 0; ch < c; ++ch) krow[ch] += px[ch] * g[ch];
          }
        }
      }
    });

    Tensor<T> gsrc(src.shape(), T(0));
    parallel_for(n, [&](int64_t ii) {
      const int i = static_cast<int>(ii);
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          const T* g = &grad_out.at(i, oh, ow, 0);
          for (int y = 0; y < kh_; ++y) {
            for (int x = 0; x < kw_; ++x) {
              T* dst = &gsrc.at(i, oh * s + y, ow * s + x, 0);
              const T* k = &kernel_.value.at(y, x, 0, 0);
              for (int ch = 0; ch < c; ++ch) dst[ch] += k[ch] * g[ch];
            }
          }
        }
      }
    });

    if (padding_ == Padding::same) {
      PadAmount p = same_pad_amount(this->in_shape_[0], this->in_shape_[1], kh_, kw_, stride_);
      Tensor<T> out(Shape{n, this->in_shape_[0], this->in_shape_[1], c});
      for (int i = 0; i < n; ++i) {
        for (int y = 0; y < this->in_shape_[0]; ++y) {
          const T* sp = &gsrc.at(i, y + p.top, p.left, 0);
          T* dp = &out.at(i, y, 0, 0);
          std::copy(sp, sp + static_cast<int64_t>(this->in_shape_[1]) * c, dp);
        }
      }
      return out;
    }
    return gsrc;
  }

  int stride() const { return stride_; }

 private:
  int kh_, kw_, stride_;
  Padding padding_;
  bool use_bias_;
  int channels_ = 0;
  typename Layer<T>::Param kernel_, bias_;
};

// ---------------------------------------------------------------------------
// depthwise-separable conv (composition of the two ops in either order)
// ---------------------------------------------------------------------------
template <typename T>
class SeparableConvLayer : public Layer<T> {
 public:
  SeparableConvLayer(int filters, int kernel_h, int kernel_w, int stride, Padding padding,
                     SeparableOrder order = SeparableOrder::pointwise_first, bool use_bias = false)
      : filters_(filters), order_(order), use_bias_(use_bias) {
    pw_ = std::make_unique<ConvLayer<T>>(filters, 1, 1, 1, Padding::same, false);
    dw_ = std::make_unique<DepthwiseConvLayer<T>>(kernel_h, kernel_w, stride, padding, false);
  }

  std::string kind() const override { return "separable_conv"; }
  std::string describe() const override {
    return "separable_conv(" + std::to_string(filters_) + "," + dw_->describe().substr(15) + "," +
           separable_order_name(order_) + ")";
  }

  Shape build(const Shape& input) override {
    Shape mid, out;
    if (order_ == SeparableOrder::pointwise_first) {
      mid = pw_->build(input);
      out = dw_->build(mid);
    } else {
      mid = dw_->build(input);
      out = pw_->build(mid);
    }
    if (use_bias_) {
      bias_.name = "bias";
      bias_.alloc(Shape{filters_}, T(0), true);
    }
    return this->finish_build(input, out);
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    pw_->collect_params(prefix + "pointwise_", out);
    dw_->collect_params(prefix + "depthwise_", out);
    if (use_bias_) out.push_back(bias_.ref(prefix));
  }

  void init_params(Rng& rng) override {
    pw_->init_params(rng);
    dw_->init_params(rng);
    if (use_bias_) bias_.value.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    cache.children.resize(2);
    Layer<T>* first = order_ == SeparableOrder::pointwise_first ? static_cast<Layer<T>*>(pw_.get())
                                                                : static_cast<Layer<T>*>(dw_.get());
    Layer<T>* second = order_ == SeparableOrder::pointwise_first ? static_cast<Layer<T>*>(dw_.get())
                                                                 : static_cast<Layer<T>*>(pw_.get());
    Tensor<T> mid = first->forward(input, mode, cache.children[0]);
    Tensor<T> out = second->forward(mid, mode, cache.children[1]);
    if (use_bias_) {
      T* p = out.data();
      const T* b = bias_.value.data();
      const int64_t rows = out.size() / filters_;
      for (int64_t r = 0; r < rows; ++r) {
        T* row = p + r * filters_;
        for (int j = 0; j < filters_; ++j) row[j] += b[j];
      }
    }
    this->seal_cache(cache, out);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    if (use_bias_) {
      T* gb = bias_.grad.data();
      const T* g = grad_out.data();
      const int64_t rows = grad_out.size() / filters_;
      for (int64_t r = 0; r < rows; ++r) {
        const T* row = g + r * filters_;
        for (int j = 0; j < filters_; ++j) gb[j] += row[j];
      }
    }
    Layer<T>* first = order_ == SeparableOrder::pointwise_first ? static_cast<Layer<T>*>(pw_.get())
                                                                : static_cast<Layer<T>*>(dw_.get());
    Layer<T>* second = order_ == SeparableOrder::pointwise_first ? static_cast<Layer<T>*>(dw_.get())
                                                                 : static_cast<Layer<T>*>(pw_.get());
    Tensor<T> gmid = second->backward(grad_out, cache.children[1]);
    return first->backward(gmid, cache.children[0]);
  }

  SeparableOrder order() const { return order_; }
  int filters() const { return filters_; }
  int stride() const { return dw_->stride(); }

 private:
  int filters_;
  SeparableOrder order_;
  bool use_bias_;
  std::unique_ptr<ConvLayer<T>> pw_;
  std::unique_ptr<DepthwiseConvLayer<T>> dw_;
  typename Layer<T>::Param bias_;
};

// ---------------------------------------------------------------------------
// max pooling
// ---------------------------------------------------------------------------
template <typename T>
class MaxPoolLayer : public Layer<T> {
 public:
  MaxPoolLayer(int size, int stride, Padding padding = Padding::valid)
      : size_(size), stride_(stride), padding_(padding) {
    if (size < 1 || stride < 1) throw ParamError("maxpool size/stride must be >= 1");
  }

  std::string kind() const override { return "maxpool"; }
  std::string describe() const override {
    return "maxpool(" + std::to_string(size_) + "x" + std::to_string(size_) + ",s" +
           std::to_string(stride_) + "," + padding_name(padding_) + ")";
  }

  Shape build(const Shape& input) override {
    if (input.size() != 3) throw ShapeError("maxpool expects HxWxC input, got " + shape_str(input));
    int oh = conv_out_dim(input[0], size_, stride_, padding_);
    int ow = conv_out_dim(input[1], size_, stride_, padding_);
    return this->finish_build(input, Shape{oh, ow, input[2]});
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    Tensor<T> out = max_pool2d(input, size_, stride_, padding_, &cache.idx);
    this->seal_cache(cache, out);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    const int n = grad_out.dim(0), oh_n = grad_out.dim(1), ow_n = grad_out.dim(2), c = grad_out.dim(3);
    const int h = this->in_shape_[0], w = this->in_shape_[1];
    Tensor<T> gin(Shape{n, h, w, c}, T(0));
    parallel_for(n, [&](int64_t ii) {
      const int i = static_cast<int>(ii);
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          const T* g = &grad_out.at(i, oh, ow, 0);
          const int* arg = &cache.idx.at(i, oh, ow, 0);
          for (int ch = 0; ch < c; ++ch) {
            gin.at(i, arg[ch] / w, arg[ch] % w, ch) += g[ch];
          }
        }
      }
    });
    return gin;
  }

  int size() const { return size_; }
  int stride() const { return stride_; }

 private:
  int size_, stride_;
  Padding padding_;
};

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------
template <typename T>
class DenseLayer : public Layer<T> {
 public:
  explicit DenseLayer(int units, bool use_bias = true) : units_(units), use_bias_(use_bias) {
    if (units < 1) throw ParamError("dense units must be >= 1");
  }

  std::string kind() const override { return "dense"; }
  std::string describe() const override { return "dense(" + std::to_string(units_) + ")"; }

  Shape build(const Shape& input) override {
    if (input.size() != 1) throw ShapeError("dense expects flat input, got " + shape_str(input));
    dim_ = input[0];
    weights_.name = "weights";
    weights_.alloc(Shape{dim_, units_}, T(0), true);
    if (use_bias_) {
      bias_.name = "bias";
      bias_.alloc(Shape{units_}, T(0), true);
    }
    return this->finish_build(input, Shape{units_});
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back(weights_.ref(prefix));
    if (use_bias_) out.push_back(bias_.ref(prefix));
  }

  void init_params(Rng& rng) override {
    this->check_built();
    this->he_init(weights_.value, dim_, rng);
    if (use_bias_) bias_.value.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    cache.a = input;
    std::vector<T> bias;
    if (use_bias_) bias.assign(bias_.value.data(), bias_.value.data() + bias_.value.size());
    Tensor<T> out = dense(input, weights_.value, bias);
    this->seal_cache(cache, out);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    const Tensor<T>& x = cache.a;
    const int n = x.dim(0), d = dim_, m = units_;

    if (use_bias_) {
      T* gb = bias_.grad.data();
      for (int i = 0; i < n; ++i) {
        const T* g = &grad_out.at(i, 0);
        for (int j = 0; j < m; ++j) gb[j] += g[j];
      }
    }

    // Each input feature k owns a disjoint row of the weight gradient.
    parallel_for(d, [&](int64_t k) {
      T* wrow = &weights_.grad.at(static_cast<int>(k), 0);
      for (int i = 0; i < n; ++i) {
        T a = x.at(i, static_cast<int>(k));
        const T* g = &grad_out.at(i, 0);
        for (int j = 0; j < m; ++j) wrow[j] += a * g[j];
      }
    });

    Tensor<T> gin(Shape{n, d});
    parallel_for(n, [&](int64_t ii) {
      const int i = static_cast<int>(ii);
      const T* g = &grad_out.at(i, 0);
      for (int k = 0; k < d; ++k) {
        const T* wrow = &weights_.value.at(k, 0);
        T acc = T(0);
        for (int j = 0; j < m; ++j) acc += wrow[j] * g[j];
        gin.at(i, k) = acc;
      }
    });
    return gin;
  }

  int units() const { return units_; }

 private:
  int units_, dim_ = 0;
  bool use_bias_;
  typename Layer<T>::Param weights_, bias_;
};

// ---------------------------------------------------------------------------
// flatten
// ---------------------------------------------------------------------------
template <typename T>
class FlattenLayer : public Layer<T> {
 public:
  std::string kind() const override { return "flatten"; }

  Shape build(const Shape& input) override {
    int64_t flat = numel(input);
    if (flat > std::numeric_limits<int>::max()) throw ShapeError("flatten overflow on " + shape_str(input));
    return this->finish_build(input, Shape{static_cast<int>(flat)});
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    Tensor<T> out = input.reshaped(Shape{input.dim(0), this->out_shape_[0]});
    this->seal_cache(cache, out);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    Shape full = this->in_shape_;
    full.insert(full.begin(), grad_out.dim(0));
    return grad_out.reshaped(full);
  }
};

// ---------------------------------------------------------------------------
// dropout (inverted: survivors scaled by 1/(1-p) at train time)
// ---------------------------------------------------------------------------
template <typename T>
class DropoutLayer : public Layer<T> {
 public:
  explicit DropoutLayer(double p) : p_(p) {
    if (!(p >= 0.0 && p < 1.0)) {
      throw ParamError("dropout probability must be in [0,1), got " + std::to_string(p));
    }
  }

  std::string kind() const override { return "dropout"; }
  std::string describe() const override { return "dropout(" + std::to_string(p_).substr(0, 4) + ")"; }

  Shape build(const Shape& input) override { return this->finish_build(input, input); }

  void set_stochastic_seed(uint64_t seed) override {
    base_seed_ = seed;
    counter_ = 0;
  }
  void reset_stochastic_counter() override { counter_ = 0; }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    if (mode == Mode::infer || p_ == 0.0) {
      cache.a = Tensor<T>();
      this->seal_cache(cache, input);
      return input;
    }
    Rng rng(mix_seed(base_seed_, counter_++));
    const T scale = static_cast<T>(1.0 / (1.0 - p_));
    Tensor<T> mask(input.shape());
    T* mp = mask.data();
    for (int64_t i = 0; i < mask.size(); ++i) mp[i] = rng.uniform() >= p_ ? scale : T(0);
    Tensor<T> out = input;
    T* op = out.data();
    for (int64_t i = 0; i < out.size(); ++i) op[i] *= mp[i];
    cache.a = std::move(mask);
    this->seal_cache(cache, out);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    if (cache.a.size() == 0) return grad_out;
    Tensor<T> gin = grad_out;
    const T* mp = cache.a.data();
    T* gp = gin.data();
    for (int64_t i = 0; i < gin.size(); ++i) gp[i] *= mp[i];
    return gin;
  }

  double probability() const { return p_; }

 private:
  double p_;
  uint64_t base_seed_ = 0, counter_ = 0;
};

// ---------------------------------------------------------------------------
// batch normalization over the channel (last) axis
// ---------------------------------------------------------------------------
template <typename T>
class BatchNormLayer : public Layer<T> {
 public:
  explicit BatchNormLayer(double eps = 1e-5, double momentum = 0.99) : eps_(eps), momentum_(momentum) {}

  std::string kind() const override { return "batchnorm"; }

  Shape build(const Shape& input) override {
    if (input.empty()) throw ShapeError("batchnorm needs at least one axis");
    channels_ = input.back();
    gamma_.name = "gamma";
    gamma_.alloc(Shape{channels_}, T(1), true);
    beta_.name = "beta";
    beta_.alloc(Shape{channels_}, T(0), true);
    running_mean_.name = "running_mean";
    running_mean_.alloc(Shape{channels_}, T(0), false);
    running_var_.name = "running_var";
    running_var_.alloc(Shape{channels_}, T(1), false);
    return this->finish_build(input, input);
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back(gamma_.ref(prefix));
    out.push_back(beta_.ref(prefix));
    out.push_back(running_mean_.ref(prefix));
    out.push_back(running_var_.ref(prefix));
  }

  void init_params(Rng& rng) override {
    (void)rng;
    this->check_built();
    gamma_.value.fill(T(1));
    beta_.value.fill(T(0));
    running_mean_.value.fill(T(0));
    running_var_.value.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    const int c = channels_;
    const int64_t rows = input.size() / c;
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    const T* x = input.data();

    if (mode == Mode::train) {
      for (int64_t r = 0; r < rows; ++r) {
        const T* row = x + r * c;
        for (int ch = 0; ch < c; ++ch) mean[static_cast<size_t>(ch)] += static_cast<double>(row[ch]);
      }
      for (int ch = 0; ch < c; ++ch) mean[static_cast<size_t>(ch)] /= static_cast<double>(rows);
      for (int64_t r = 0; r < rows; ++r) {
        const T* row = x + r * c;
        for (int ch = 0; ch < c; ++ch) {
          double d = static_cast<double>(row[ch]) - mean[static_cast<size_t>(ch)];
          var[static_cast<size_t>(ch)] += d * d;
        }
      }
      for (int ch = 0; ch < c; ++ch) var[static_cast<size_t>(ch)] /= static_cast<double>(rows);
      for (int ch = 0; ch < c; ++ch) {
        running_mean_.value.data()[ch] = static_cast<T>(momentum_ * running_mean_.value.data()[ch] +
                                                        (1.0 - momentum_) * mean[static_cast<size_t>(ch)]);
        running_var_.value.data()[ch] = static_cast<T>(momentum_ * running_var_.value.data()[ch] +
                                                       (1.0 - momentum_) * var[static_cast<size_t>(ch)]);
      }
    } else {
      for (int ch = 0; ch < c; ++ch) {
        mean[static_cast<size_t>(ch)] = static_cast<double>(running_mean_.value.data()[ch]);
        var[static_cast<size_t>(ch)] = static_cast<double>(running_var_.value.data()[ch]);
      }
    }

    Tensor<T> inv_std(Shape{c});
    for (int ch = 0; ch < c; ++ch) {
      inv_std.data()[ch] = static_cast<T>(1.0 / std::sqrt(var[static_cast<size_t>(ch)] + eps_));
    }
    Tensor<T> xhat(input.shape());
    Tensor<T> out(input.shape());
    const T* gm = gamma_.value.data();
    const T* bt = beta_.value.data();
    T* xh = xhat.data();
    T* o = out.data();
    for (int64_t r = 0; r < rows; ++r) {
      const T* row = x + r * c;
      T* xrow = xh + r * c;
      T* orow = o + r * c;
      for (int ch = 0; ch < c; ++ch) {
        T v = static_cast<T>((static_cast<double>(row[ch]) - mean[static_cast<size_t>(ch)]));
        v *= inv_std.data()[ch];
        xrow[ch] = v;
        orow[ch] = gm[ch] * v + bt[ch];
      }
    }
    cache.a = std::move(xhat);
    cache.b = std::move(inv_std);
    this->seal_cache(cache, out);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    const int c = channels_;
    const int64_t rows = grad_out.size() / c;
    const Tensor<T>& xhat = cache.a;
    const Tensor<T>& inv_std = cache.b;
    std::vector<double> sg(static_cast<size_t>(c), 0.0), sgx(static_cast<size_t>(c), 0.0);
    const T* g = grad_out.data();
    const T* xh = xhat.data();
    for (int64_t r = 0; r < rows; ++r) {
      const T* grow = g + r * c;
      const T* xrow = xh + r * c;
      for (int ch = 0; ch < c; ++ch) {
        sg[static_cast<size_t>(ch)] += static_cast<double>(grow[ch]);
        sgx[static_cast<size_t>(ch)] += static_cast<double>(grow[ch]) * static_cast<double>(xrow[ch]);
      }
    }
    for (int ch = 0; ch < c; ++ch) {
      gamma_.grad.data()[ch] += static_cast<T>(sgx[static_cast<size_t>(ch)]);
      beta_.grad.data()[ch] += static_cast<T>(sg[static_cast<size_t>(ch)]);
    }

    Tensor<T> gin(grad_out.shape());
    T* gi = gin.data();
    const T* gm = gamma_.value.data();
    const double m = static_cast<double>(rows);
    const bool coupled = cache.mode == Mode::train;
    for (int64_t r = 0; r < rows; ++r) {
      const T* grow = g + r * c;
      const T* xrow = xh + r * c;
      T* irow = gi + r * c;
      for (int ch = 0; ch < c; ++ch) {
        double scale = static_cast<double>(gm[ch]) * static_cast<double>(inv_std.data()[ch]);
        double v = static_cast<double>(grow[ch]);
        if (coupled) {
          v -= (sg[static_cast<size_t>(ch)] + static_cast<double>(xrow[ch]) * sgx[static_cast<size_t>(ch)]) / m;
        }
        irow[ch] = static_cast<T>(scale * v);
      }
    }
    return gin;
  }

  Tensor<T>& gamma() { return gamma_.value; }
  Tensor<T>& beta() { return beta_.value; }
  const Tensor<T>& running_mean() const { return running_mean_.value; }
  const Tensor<T>& running_var() const { return running_var_.value; }

 private:
  double eps_, momentum_;
  int channels_ = 0;
  typename Layer<T>::Param gamma_, beta_, running_mean_, running_var_;
};

// ---------------------------------------------------------------------------
// activation
// ---------------------------------------------------------------------------
template <typename T>
class ActivationLayer : public Layer<T> {
 public:
  explicit ActivationLayer(ActKind act) : act_(act) {}

  std::string kind() const override { return "activation"; }
  std::string describe() const override { return std::string("activation(") + act_name(act_) + ")"; }

  Shape build(const Shape& input) override { return this->finish_build(input, input); }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    Tensor<T> out = activation(input, act_);
    cache.a = out;
    this->seal_cache(cache, out);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    const Tensor<T>& y = cache.a;
    Tensor<T> gin = grad_out;
    T* gi = gin.data();
    const T* yp = y.data();
    if (act_ == ActKind::relu) {
      for (int64_t i = 0; i < gin.size(); ++i) {
        if (yp[i] <= T(0)) gi[i] = T(0);
      }
      return gin;
    }
    if (act_ == ActKind::relu6) {
      for (int64_t i = 0; i < gin.size(); ++i) {
        if (yp[i] <= T(0) || yp[i] >= T(6)) gi[i] = T(0);
      }
      return gin;
    }
    const int k = y.dim(y.rank() - 1);
    const int64_t rows = y.size() / k;
    for (int64_t r = 0; r < rows; ++r) {
      const T* yrow = yp + r * k;
      T* grow = gi + r * k;
      T dot = T(0);
      for (int j = 0; j < k; ++j) dot += grow[j] * yrow[j];
      for (int j = 0; j < k; ++j) grow[j] = yrow[j] * (grow[j] - dot);
    }
    return gin;
  }

  ActKind act() const { return act_; }

 private:
  ActKind act_;
};

// ---------------------------------------------------------------------------
// chain: ordered run of layers (residual branches, standalone stacks)
// ---------------------------------------------------------------------------
template <typename T>
class ChainLayer : public Layer<T> {
 public:
  ChainLayer() = default;

  std::string kind() const override { return "chain"; }
  std::string describe() const override {
    return "chain(" + std::to_string(steps_.size()) + " layers)";
  }

  ChainLayer& add(LayerPtr<T> layer) {
    steps_.push_back(std::move(layer));
    return *this;
  }
  bool empty() const { return steps_.empty(); }
  const std::vector<LayerPtr<T>>& layers() const { return steps_; }

  Shape build(const Shape& input) override {
    Shape cur = input;
    for (auto& s : steps_) cur = s->build(cur);
    return this->finish_build(input, cur);
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    for (size_t i = 0; i < steps_.size(); ++i) {
      steps_[i]->collect_params(prefix + "s" + std::to_string(i) + ".", out);
    }
  }

  void init_params(Rng& rng) override {
    for (auto& s : steps_) s->init_params(rng);
  }

  void set_stochastic_seed(uint64_t seed) override {
    for (size_t i = 0; i < steps_.size(); ++i) steps_[i]->set_stochastic_seed(mix_seed(seed, i + 1));
  }
  void reset_stochastic_counter() override {
    for (auto& s : steps_) s->reset_stochastic_counter();
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    cache.children.resize(steps_.size());
    Tensor<T> cur = input;
    for (size_t i = 0; i < steps_.size(); ++i) cur = steps_[i]->forward(cur, mode, cache.children[i]);
    this->seal_cache(cache, cur);
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    Tensor<T> g = grad_out;
    for (size_t i = steps_.size(); i-- > 0;) g = steps_[i]->backward(g, cache.children[i]);
    return g;
  }

 private:
  std::vector<LayerPtr<T>> steps_;
};

// ---------------------------------------------------------------------------
// residual add: main branch + shortcut branch (empty shortcut = identity)
// ---------------------------------------------------------------------------
template <typename T>
class ResidualLayer : public Layer<T> {
 public:
  ResidualLayer(std::unique_ptr<ChainLayer<T>> main_branch, std::unique_ptr<ChainLayer<T>> shortcut)
      : main_(std::move(main_branch)), shortcut_(std::move(shortcut)) {
    if (!main_) throw ParamError("residual_add requires a main branch");
    if (!shortcut_) shortcut_ = std::make_unique<ChainLayer<T>>();
  }

  std::string kind() const override { return "residual_add"; }
  std::string describe() const override {
    return "residual_add(main " + std::to_string(main_->layers().size()) + " layers, shortcut " +
           (shortcut_->empty() ? std::string("identity") : std::to_string(shortcut_->layers().size()) + " layers") + ")";
  }

  Shape build(const Shape& input) override {
    Shape om = main_->build(input);
    Shape os = shortcut_->build(input);
    if (om != os) {
      throw ShapeError("residual branch outputs differ: main " + shape_str(om) + " vs shortcut " +
                       shape_str(os));
    }
    return this->finish_build(input, om);
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    main_->collect_params(prefix + "main.", out);
    shortcut_->collect_params(prefix + "shortcut.", out);
  }

  void init_params(Rng& rng) override {
    main_->init_params(rng);
    shortcut_->init_params(rng);
  }

  void set_stochastic_seed(uint64_t seed) override {
    main_->set_stochastic_seed(mix_seed(seed, 1));
    shortcut_->set_stochastic_seed(mix_seed(seed, 2));
  }
  void reset_stochastic_counter() override {
    main_->reset_stochastic_counter();
    shortcut_->reset_stochastic_counter();
  }

  Tensor<T> forward(const Tensor<T>& input, Mode mode, ForwardCache<T>& cache) override {
    this->check_input(input);
    this->start_cache(cache, mode);
    cache.children.resize(2);
    Tensor<T> om = main_->forward(input, mode, cache.children[0]);
    Tensor<T> os = shortcut_->forward(input, mode, cache.children[1]);
    Tensor<T> out = tensor_add(om, os);
    this->seal_cache(cache, out);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out, const ForwardCache<T>& cache) override {
    this->check_cache(cache, grad_out);
    Tensor<T> gm = main_->backward(grad_out, cache.children[0]);
    Tensor<T> gs = shortcut_->backward(grad_out, cache.children[1]);
    return tensor_add(gm, gs);
  }

  const ChainLayer<T>& main_chain() const { return *main_; }
  const ChainLayer<T>& shortcut_chain() const { return *shortcut_; }

 private:
  std::unique_ptr<ChainLayer<T>> main_;
  std::unique_ptr<ChainLayer<T>> shortcut_;
};

}  // namespace octnet
