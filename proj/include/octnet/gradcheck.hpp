#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "octnet/layers.hpp"

namespace octnet {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  int64_t worst_index = -1;

  operator double() const { return max_rel_error; }
};

struct GradCheckOptions {
  double eps = 1e-4;
  uint64_t seed = 0;
  // Weighted cotangent (random per-output weights) exercises cross terms a
  // plain sum of outputs cannot distinguish; plain mode matches the simpler
  // sum-of-outputs loss.
  bool weighted = true;
  // Cap on coordinates probed per tensor (<0 = all).
  int64_t max_coords = -1;
};

// Central-difference verification of layer.backward against the scalar loss
// L = sum(w . forward(x)) in f64. Layer must be built (and initialized when it
// has parameters). Returns the max relative error over every probed parameter
// and input coordinate.
inline GradCheckResult grad_check(Layer<double>& layer, const Tensor<double>& input,
                                  const GradCheckOptions& opts = {}) {
  if (!layer.built()) throw ContractError("grad_check: layer must be built first");

  auto fwd = [&](const Tensor<double>& x) {
    ForwardCache<double> cache;
    layer.reset_stochastic_counter();
    return layer.forward(x, Mode::train, cache);
  };

  Tensor<double> out0 = fwd(input);
  Tensor<double> w(out0.shape(), 1.0);
  if (opts.weighted) {
    Rng wr(mix_seed(opts.seed, 0x77u));
    for (int64_t i = 0; i < w.size(); ++i) w.data()[i] = wr.uniform(-1.0, 1.0);
  }
  auto loss_of = [&](const Tensor<double>& out) {
    double s = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) s += w.data()[i] * out.data()[i];
    return s;
  };

  // Analytic pass.
  std::vector<ParamRef<double>> params;
  layer.collect_params("", params);
  for (auto& p : params) p.grad->fill(0.0);
  ForwardCache<double> cache;
  layer.reset_stochastic_counter();
  Tensor<double> out = layer.forward(input, Mode::train, cache);
  Tensor<double> gin = layer.backward(w, cache);

  Tensor<double> in_copy = input;
  GradCheckResult result;

  auto probe = [&](const std::string& name, Tensor<double>& values, const Tensor<double>& analytic,
                   bool is_input) {
    std::vector<int64_t> coords;
    if (opts.max_coords > 0 && values.size() > opts.max_coords) {
      Rng cr(mix_seed(opts.seed, std::hash<std::string>{}(name)));
      for (int64_t i = 0; i < opts.max_coords; ++i) coords.push_back(cr.uniform_int(values.size()));
    } else {
      coords.resize(static_cast<size_t>(values.size()));
      for (int64_t i = 0; i < values.size(); ++i) coords[static_cast<size_t>(i)] = i;
    }
    for (int64_t c : coords) {
      double saved = values.data()[c];
      values.data()[c] = saved + opts.eps;
      double lp = loss_of(fwd(in_copy));
      values.data()[c] = saved - opts.eps;
      double lm = loss_of(fwd(in_copy));
      values.data()[c] = saved;
      double numeric = (lp - lm) / (2.0 * opts.eps);
      double a = analytic.data()[c];
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        throw NumericError("grad_check: non-finite gradient at " + name + "[" + std::to_string(c) + "]");
      }
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_tensor = name;
        result.worst_index = c;
      }
    }
    (void)is_input;
  };

  for (auto& p : params) {
    if (!p.trainable) continue;
    probe(p.name, *p.value, *p.grad, false);
  }
  probe("input", in_copy, gin, true);
  (void)out0, (void)out;
  return result;
}

}  // namespace octnet
