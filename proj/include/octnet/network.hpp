#pragma once

#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "octnet/layers.hpp"

namespace octnet {

struct ArchReportRow {
  int index;
  std::string kind;
  std::string detail;
  std::string label;
  Shape output_shape;  // per sample
  int64_t params;
  int64_t trainable_params;
};

struct ArchReport {
  std::string name;
  Shape input_shape;
  std::vector<ArchReportRow> rows;
  int64_t total_params = 0;
  int64_t trainable_params = 0;

  std::string to_text() const {
    std::ostringstream os;
    os << "network: " << name << "  input: " << shape_str(input_shape) << "\n";
    size_t wd = 10, wl = 5;
    for (const auto& r : rows) {
      wd = std::max(wd, r.detail.size());
      wl = std::max(wl, r.label.size());
    }
    os << std::left << std::setw(4) << "#" << std::setw(static_cast<int>(wd) + 2) << "layer"
       << std::setw(static_cast<int>(wl) + 2) << "label" << std::setw(16) << "output"
       << std::right << std::setw(12) << "params" << "\n";
    for (const auto& r : rows) {
      os << std::left << std::setw(4) << r.index << std::setw(static_cast<int>(wd) + 2) << r.detail
         << std::setw(static_cast<int>(wl) + 2) << (r.label.empty() ? "-" : r.label)
         << std::setw(16) << shape_str(r.output_shape) << std::right << std::setw(12) << r.params << "\n";
    }
    os << "total params: " << total_params << "  trainable: " << trainable_params << "\n";
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& r : rows) {
      layers.push_back({{"index", r.index},
                        {"kind", r.kind},
                        {"detail", r.detail},
                        {"label", r.label},
                        {"output_shape", r.output_shape},
                        {"params", r.params},
                        {"trainable_params", r.trainable_params}});
    }
    return {{"name", name},
            {"input_shape", input_shape},
            {"layers", layers},
            {"total_params", total_params},
            {"trainable_params", trainable_params}};
  }
};

// Ordered layer graph with a fixed per-sample input shape. Forward/backward
// run over batches (leading N axis); residual branching lives inside
// ResidualLayer nodes.
template <typename T>
class Network {
 public:
  explicit Network(std::string name = "network") : name_(std::move(name)) {}

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const std::string& name() const { return name_; }

  Network& add(LayerPtr<T> layer) {
    if (finalized_) throw ContractError("cannot add layers after finalize()");
    layers_.push_back(std::move(layer));
    return *this;
  }

  // Chains per-sample shapes through every layer, allocating parameters.
  void finalize(const Shape& input_shape) {
    if (finalized_) throw ContractError("finalize() called twice");
    check_shape_valid(input_shape);
    input_shape_ = input_shape;
    Shape cur = input_shape;
    for (size_t i = 0; i < layers_.size(); ++i) {
      try {
        cur = layers_[i]->build(cur);
      } catch (const ShapeError& e) {
        throw ShapeError(layer_tag(i) + ": " + e.what());
      } catch (const SpecError& e) {
        throw SpecError(layer_tag(i) + ": " + e.what());
      }
    }
    output_shape_ = cur;
    caches_.resize(layers_.size());
    params_.clear();
    for (size_t i = 0; i < layers_.size(); ++i) {
      layers_[i]->collect_params("l" + std::to_string(i) + ".", params_);
    }
    finalized_ = true;
  }

  bool finalized() const { return finalized_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }
  size_t num_layers() const { return layers_.size(); }
  Layer<T>& layer(size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(size_t i) const { return *layers_.at(i); }

  const std::vector<ParamRef<T>>& params() {
    check_finalized();
    return params_;
  }

  void zero_grads() {
    check_finalized();
    for (auto& p : params_) p.grad->fill(T(0));
  }

  void init_params(uint64_t seed) {
    check_finalized();
    Rng rng(mix_seed(seed, 0x1917u));
    for (auto& l : layers_) l->init_params(rng);
  }

  void set_stochastic_seed(uint64_t seed) {
    for (size_t i = 0; i < layers_.size(); ++i) layers_[i]->set_stochastic_seed(mix_seed(seed, i + 1));
  }
  void reset_stochastic_counters() {
    for (auto& l : layers_) l->reset_stochastic_counter();
  }

  Tensor<T> forward(const Tensor<T>& batch, Mode mode) {
    check_finalized();
    Tensor<T> cur = batch;
    for (size_t i = 0; i < layers_.size(); ++i) {
      try {
        cur = layers_[i]->forward(cur, mode, caches_[i]);
      } catch (const ShapeError& e) {
        throw ShapeError(layer_tag(i) + ": " + e.what());
      } catch (const ContractError& e) {
        throw ContractError(layer_tag(i) + ": " + e.what());
      }
    }
    return cur;
  }

  // Backpropagate from the network output; returns the input gradient.
  Tensor<T> backward(const Tensor<T>& grad_out) { return backward_from(static_cast<int>(layers_.size()) - 1, grad_out); }

  // Backpropagate a gradient with respect to the *logits*, skipping the final
  // softmax activation layer (fused softmax+cross-entropy path).
  Tensor<T> backward_from_logits(const Tensor<T>& grad_logits) {
    check_finalized();
    if (layers_.empty()) throw ContractError("empty network");
    auto* act = dynamic_cast<ActivationLayer<T>*>(layers_.back().get());
    if (!act || act->act() != ActKind::softmax) {
      throw ContractError("backward_from_logits requires a trailing softmax activation layer");
    }
    return backward_from(static_cast<int>(layers_.size()) - 2, grad_logits);
  }

  Tensor<T> backward_from(int start, const Tensor<T>& grad) {
    check_finalized();
    Tensor<T> g = grad;
    for (int i = start; i >= 0; --i) {
      try {
        g = layers_[static_cast<size_t>(i)]->backward(g, caches_[static_cast<size_t>(i)]);
      } catch (const ShapeError& e) {
        throw ShapeError(layer_tag(static_cast<size_t>(i)) + ": " + e.what());
      } catch (const ContractError& e) {
        throw ContractError(layer_tag(static_cast<size_t>(i)) + ": " + e.what());
      }
    }
    return g;
  }

  // Infer-mode forward + argmax per row (ties -> lowest class index).
  std::pair<Tensor<T>, std::vector<int>> predict(const Tensor<T>& batch) {
    Tensor<T> probs = forward(batch, Mode::infer);
    const int n = probs.dim(0), k = probs.dim(probs.rank() - 1);
    std::vector<int> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int j = 1; j < k; ++j) {
        if (probs.at(i, j) > probs.at(i, best)) best = j;
      }
      labels[static_cast<size_t>(i)] = best;
    }
    return {std::move(probs), std::move(labels)};
  }

  ArchReport report() const {
    ArchReport rep;
    rep.name = name_;
    rep.input_shape = input_shape_;
    for (size_t i = 0; i < layers_.size(); ++i) {
      std::vector<ParamRef<T>> ps;
      const_cast<Layer<T>&>(*layers_[i]).collect_params("", ps);
      int64_t total = 0, trainable = 0;
      for (auto& p : ps) {
        total += p.value->size();
        if (p.trainable) trainable += p.value->size();
      }
      rep.rows.push_back({static_cast<int>(i), layers_[i]->kind(), layers_[i]->describe(),
                          layers_[i]->label(), layers_[i]->output_shape(), total, trainable});
      rep.total_params += total;
      rep.trainable_params += trainable;
    }
    return rep;
  }

  int64_t param_count() {
    int64_t total = 0;
    for (auto& p : params()) total += p.value->size();
    return total;
  }

 private:
  void check_finalized() const {
    if (!finalized_) throw ContractError("network '" + name_ + "' used before finalize()");
  }
  std::string layer_tag(size_t i) const {
    return "layer " + std::to_string(i) + " (" + layers_[i]->kind() + ")";
  }

  std::string name_;
  Shape input_shape_, output_shape_;
  std::vector<LayerPtr<T>> layers_;
  std::vector<ForwardCache<T>> caches_;
  std::vector<ParamRef<T>> params_;
  bool finalized_ = false;
};

}  // namespace octnet
