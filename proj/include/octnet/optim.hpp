#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "octnet/layers.hpp"

namespace octnet {

enum class OptimizerKind { sgd_momentum, adam };

inline const char* optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::sgd_momentum ? "sgd_momentum" : "adam";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd_momentum") return OptimizerKind::sgd_momentum;
  if (s == "adam") return OptimizerKind::adam;
  throw ParamError("unknown optimizer '" + s + "' (valid: sgd_momentum, adam)");
}

struct OptimizerHyper {
  double lr = 1e-3;
  double momentum = 0.9;   // sgd_momentum
  double beta1 = 0.9;      // adam
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Updates trainable parameters in place; non-trainable ones (e.g. batch-norm
// running stats) are skipped. attach() sizes the per-parameter state slots.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind, OptimizerHyper hyper = {}) : kind_(kind), hyper_(hyper) {
    if (!(hyper_.lr > 0)) throw ParamError("learning rate must be > 0");
  }

  void attach(const std::vector<ParamRef<T>>& params) {
    slot_sizes_.clear();
    m_.clear();
    v_.clear();
    steps_ = 0;
    for (const auto& p : params) {
      const size_t n = p.trainable ? static_cast<size_t>(p.value->size()) : 0;
      slot_sizes_.push_back(n);
      m_.emplace_back(n, T(0));
      v_.emplace_back(n, T(0));
    }
  }

  void step(const std::vector<ParamRef<T>>& params) {
    if (params.size() != slot_sizes_.size()) {
      throw ShapeError("optimizer attached to " + std::to_string(slot_sizes_.size()) +
                       " parameters, stepped with " + std::to_string(params.size()));
    }
    ++steps_;
    const T lr = static_cast<T>(hyper_.lr);
    for (size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      if (!p.trainable) continue;
      if (static_cast<size_t>(p.value->size()) != slot_sizes_[i]) {
        throw ShapeError("parameter '" + p.name + "' changed size since attach");
      }
      if (!p.grad->same_shape(*p.value)) {
        throw ShapeError("gradient shape " + shape_str(p.grad->shape()) + " != parameter shape " +
                         shape_str(p.value->shape()) + " for '" + p.name + "'");
      }
      T* w = p.value->data();
      const T* g = p.grad->data();
      T* m = m_[i].data();
      if (kind_ == OptimizerKind::sgd_momentum) {
        const T mu = static_cast<T>(hyper_.momentum);
        for (size_t j = 0; j < slot_sizes_[i]; ++j) {
          m[j] = mu * m[j] - lr * g[j];
          w[j] += m[j];
        }
      } else {
        T* v = v_[i].data();
        const T b1 = static_cast<T>(hyper_.beta1);
        const T b2 = static_cast<T>(hyper_.beta2);
        const T eps = static_cast<T>(hyper_.eps);
        const T c1 = T(1) - static_cast<T>(std::pow(hyper_.beta1, static_cast<double>(steps_)));
        const T c2 = T(1) - static_cast<T>(std::pow(hyper_.beta2, static_cast<double>(steps_)));
        for (size_t j = 0; j < slot_sizes_[i]; ++j) {
          m[j] = b1 * m[j] + (T(1) - b1) * g[j];
          v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
          const T mhat = m[j] / c1;
          const T vhat = v[j] / c2;
          w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
      }
    }
  }

  OptimizerKind kind() const { return kind_; }
  const OptimizerHyper& hyper() const { return hyper_; }
  int64_t steps() const { return steps_; }

 private:
  OptimizerKind kind_;
  OptimizerHyper hyper_;
  std::vector<size_t> slot_sizes_;
  std::vector<std::vector<T>> m_, v_;  // momentum / first moment, second moment
  int64_t steps_ = 0;
};

}  // namespace octnet
