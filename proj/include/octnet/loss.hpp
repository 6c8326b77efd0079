#pragma once

#include <cmath>

#include "octnet/tensor.hpp"

namespace octnet {

template <typename T>
struct LossResult {
  T loss;
  Tensor<T> grad;  // d loss / d probs
};

namespace detail {

template <typename T>
void check_prob_label_pair(const Tensor<T>& probs, const Tensor<T>& labels) {
  if (probs.rank() != 2 || labels.rank() != 2) {
    throw ShapeError("cross_entropy expects NxK probs and labels, got " + shape_str(probs.shape()) +
                     " and " + shape_str(labels.shape()));
  }
  if (!probs.same_shape(labels)) {
    throw ShapeError("cross_entropy shape mismatch: probs " + shape_str(probs.shape()) + " vs labels " +
                     shape_str(labels.shape()));
  }
  const int n = probs.dim(0), k = probs.dim(1);
  for (int i = 0; i < n; ++i) {
    T row_sum = T(0);
    for (int j = 0; j < k; ++j) row_sum += probs.at(i, j);
    if (std::abs(static_cast<double>(row_sum) - 1.0) > 1e-4) {
      throw ContractError("cross_entropy: probability row " + std::to_string(i) + " sums to " +
                          std::to_string(static_cast<double>(row_sum)) + ", not 1 within 1e-4");
    }
    int hot = 0;
    for (int j = 0; j < k; ++j) {
      T v = labels.at(i, j);
      if (std::abs(static_cast<double>(v) - 1.0) < 1e-6) {
        ++hot;
      } else if (std::abs(static_cast<double>(v)) > 1e-6) {
        throw LabelError("cross_entropy: label row " + std::to_string(i) + " is not one-hot");
      }
    }
    if (hot != 1) {
      throw LabelError("cross_entropy: label row " + std::to_string(i) + " has " + std::to_string(hot) +
                       " true classes, expected exactly 1");
    }
  }
}

}  // namespace detail

// Mean negative log-likelihood of the true class, probabilities clamped to
// >= 1e-12 before the log. Gradient is taken with respect to the probabilities.
template <typename T>
LossResult<T> cross_entropy(const Tensor<T>& probs, const Tensor<T>& labels) {
  detail::check_prob_label_pair(probs, labels);
  const int n = probs.dim(0), k = probs.dim(1);
  const double clamp = 1e-12;
  double total = 0.0;
  Tensor<T> grad(probs.shape(), T(0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      if (labels.at(i, j) > T(0.5)) {
        double p = std::max(static_cast<double>(probs.at(i, j)), clamp);
        total -= std::log(p);
        grad.at(i, j) = static_cast<T>(-1.0 / (p * n));
      }
    }
  }
  return {static_cast<T>(total / n), std::move(grad)};
}

// Gradient of mean cross-entropy with respect to the *logits* feeding a
// softmax: (probs - labels) / N. Numerically stable fused form.
template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& probs, const Tensor<T>& labels) {
  detail::check_prob_label_pair(probs, labels);
  const int n = probs.dim(0);
  Tensor<T> grad = probs;
  T* g = grad.data();
  const T* l = labels.data();
  const T inv_n = static_cast<T>(1.0 / n);
  for (int64_t i = 0; i < grad.size(); ++i) g[i] = (g[i] - l[i]) * inv_n;
  return grad;
}

// Rows where prediction (argmax probs, lowest index on ties) matches the
// one-hot label.
template <typename T>
int count_correct(const Tensor<T>& probs, const Tensor<T>& labels) {
  if (!probs.same_shape(labels) || probs.rank() != 2) {
    throw ShapeError("count_correct expects matching NxK tensors");
  }
  const int n = probs.dim(0), k = probs.dim(1);
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    int pred = 0, truth = 0;
    for (int j = 1; j < k; ++j) {
      if (probs.at(i, j) > probs.at(i, pred)) pred = j;
      if (labels.at(i, j) > labels.at(i, truth)) truth = j;
    }
    if (pred == truth) ++correct;
  }
  return correct;
}

}  // namespace octnet
