#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "octnet/loss.hpp"
#include "octnet/metrics.hpp"
#include "octnet/network.hpp"
#include "octnet/optim.hpp"
#include "octnet/stream.hpp"

namespace octnet {

struct TrainConfig {
  int epochs = 15;
  int batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adam;
  OptimizerHyper hyper;  // hyper.lr is the learning rate
  uint64_t seed = 0;
  std::string curve_path;  // empty = no CSV

  void validate() const {
    if (epochs < 1) throw ParamError("epochs must be >= 1, got " + std::to_string(epochs));
    if (batch_size < 1) throw ParamError("batch size must be >= 1, got " + std::to_string(batch_size));
    if (!(hyper.lr > 0)) throw ParamError("learning rate must be > 0");
  }
};

struct CurvePoint {
  int epoch = 0;  // 1-based
  double train_acc = 0.0, train_loss = 0.0;
  double val_acc = 0.0, val_loss = 0.0;
};

struct FitResult {
  std::vector<CurvePoint> curves;
};

inline std::string curve_csv_header() { return "epoch,train_acc,train_loss,val_acc,val_loss"; }

inline std::string curve_csv_row(const CurvePoint& p) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f", p.epoch, p.train_acc, p.train_loss, p.val_acc,
                p.val_loss);
  return buf;
}

// Full inference pass over a source: mean loss, accuracy, confusion matrix.
template <typename T>
struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  int64_t samples = 0;
  ConfusionMatrix cm{1};
};

template <typename T>
EvalResult<T> evaluate(Network<T>& net, BatchSource<T>& src, int epoch = 1,
                       std::vector<std::string> class_names = {}) {
  EvalResult<T> result;
  result.cm = ConfusionMatrix(src.num_classes(), std::move(class_names));
  double loss_sum = 0.0;
  int64_t correct = 0, n = 0;
  src.start_epoch(epoch);
  while (auto batch = src.next()) {
    Tensor<T> probs = net.forward(batch->images, Mode::infer);
    LossResult<T> lr = cross_entropy(probs, batch->labels);
    const int rows = batch->rows();
    loss_sum += static_cast<double>(lr.loss) * rows;
    correct += count_correct(probs, batch->labels);
    for (int r = 0; r < rows; ++r) {
      int truth = 0, pred = 0;
      for (int j = 1; j < src.num_classes(); ++j) {
        if (batch->labels.at(r, j) > batch->labels.at(r, truth)) truth = j;
        if (probs.at(r, j) > probs.at(r, pred)) pred = j;
      }
      result.cm.add(truth, pred);
    }
    n += rows;
  }
  result.samples = n;
  result.loss = n > 0 ? loss_sum / static_cast<double>(n) : 0.0;
  result.accuracy = n > 0 ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  return result;
}

// Trains for exactly cfg.epochs epochs. Parameters are (re)initialized from
// cfg.seed, so a fixed seed fully determines the run. Train accuracy/loss are
// running sample-weighted means over the epoch's batches (evaluated in train
// mode as the batches are consumed); validation is a full inference pass after
// each epoch. When cfg.curve_path is set, one CSV row is appended and flushed
// per epoch.
template <typename T>
FitResult fit(Network<T>& net, BatchSource<T>& train_src, BatchSource<T>* val_src, const TrainConfig& cfg) {
  cfg.validate();
  if (train_src.size() == 0) throw ContractError("training source is empty");

  net.init_params(cfg.seed);
  net.set_stochastic_seed(mix_seed(cfg.seed, 0xD0u));
  Optimizer<T> opt(cfg.optimizer, cfg.hyper);
  opt.attach(net.params());

  std::ofstream csv;
  if (!cfg.curve_path.empty()) {
    csv.open(cfg.curve_path, std::ios::trunc);
    if (!csv) throw IoError("cannot open curve file '" + cfg.curve_path + "' for writing");
    csv << curve_csv_header() << "\n";
    csv.flush();
  }

  FitResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    train_src.start_epoch(epoch);
    double loss_sum = 0.0;
    int64_t correct = 0, n = 0, batch_index = 0;
    while (auto batch = train_src.next()) {
      ++batch_index;
      Tensor<T> probs = net.forward(batch->images, Mode::train);
      LossResult<T> lr = cross_entropy(probs, batch->labels);
      if (!std::isfinite(static_cast<double>(lr.loss))) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      const int rows = batch->rows();
      loss_sum += static_cast<double>(lr.loss) * rows;
      correct += count_correct(probs, batch->labels);
      n += rows;

      net.zero_grads();
      net.backward_from_logits(softmax_cross_entropy_grad(probs, batch->labels));
      opt.step(net.params());
    }

    CurvePoint point;
    point.epoch = epoch;
    point.train_loss = n > 0 ? loss_sum / static_cast<double>(n) : 0.0;
    point.train_acc = n > 0 ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
    if (val_src != nullptr && val_src->size() > 0) {
      EvalResult<T> val = evaluate(net, *val_src, epoch);
      point.val_loss = val.loss;
      point.val_acc = val.accuracy;
    }
    result.curves.push_back(point);
    if (csv.is_open()) {
      csv << curve_csv_row(point) << "\n";
      csv.flush();
      if (!csv) throw IoError("failed writing curve file '" + cfg.curve_path + "'");
    }
  }
  return result;
}

}  // namespace octnet
