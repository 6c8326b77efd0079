#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>

#include "octnet/dataset.hpp"
#include "octnet/image.hpp"
#include "octnet/rng.hpp"
#include "octnet/tensor.hpp"

namespace octnet {

template <typename T>
struct Batch {
  Tensor<T> images;              // [B, H, W, 3]
  Tensor<T> labels;              // [B, K] one-hot
  std::vector<int64_t> indices;  // stable per-dataset sample ids

  int rows() const { return images.dim(0); }
};

// One epoch = start_epoch(e) followed by next() until it returns nullopt.
template <typename T>
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual void start_epoch(int epoch) = 0;
  virtual std::optional<Batch<T>> next() = 0;
  virtual int64_t size() const = 0;
  virtual int num_classes() const = 0;
};

// Streams decoded+augmented batches from a manifest split in seeded-shuffled
// order. A single producer thread may run up to `prefetch_depth` batches ahead
// (0 = decode synchronously in next()); batch content depends only on
// (manifest, seed, epoch, sample id), never on prefetch depth or timing.
class DirectoryStream final : public BatchSource<float> {
 public:
  DirectoryStream(const DatasetManifest& manifest, Split split, int batch_size, uint64_t seed,
                  AugmentConfig augment_cfg = AugmentConfig{.enabled = false}, bool shuffle = true,
                  int prefetch_depth = 2, int target_hw = 150)
      : batch_size_(batch_size), seed_(seed), aug_(augment_cfg), shuffle_(shuffle),
        depth_(prefetch_depth), target_hw_(target_hw), k_(manifest.num_classes()) {
    if (batch_size < 1) throw ParamError("batch size must be >= 1");
    if (prefetch_depth < 0) throw ParamError("prefetch depth must be >= 0");
    aug_.validate();
    for (int c = 0; c < k_; ++c) {
      for (const auto& path : manifest.split_files(split)[static_cast<size_t>(c)]) {
        samples_.push_back({path, c});
      }
    }
    order_.resize(samples_.size());
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int64_t>(i);
  }

  ~DirectoryStream() override { stop_producer(); }

  DirectoryStream(const DirectoryStream&) = delete;
  DirectoryStream& operator=(const DirectoryStream&) = delete;

  int64_t size() const override { return static_cast<int64_t>(samples_.size()); }
  int num_classes() const override { return k_; }
  int64_t num_batches() const {
    return (size() + batch_size_ - 1) / batch_size_;
  }

  void start_epoch(int epoch) override {
    stop_producer();
    epoch_ = epoch;
    cursor_ = 0;
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int64_t>(i);
    if (shuffle_) {
      Rng rng(mix_seed(seed_, 0x5u, static_cast<uint64_t>(epoch)));
      rng.shuffle(order_.begin(), order_.end());
    }
    if (depth_ > 0 && !samples_.empty()) {
      stop_ = false;
      producer_ = std::thread([this] { produce(); });
    }
  }

  std::optional<Batch<float>> next() override {
    if (depth_ == 0 || samples_.empty()) {
      if (cursor_ >= num_batches()) return std::nullopt;
      return make_batch(cursor_++);
    }
    std::unique_lock<std::mutex> lock(mu_);
    cv_empty_.wait(lock, [this] { return !queue_.empty(); });
    auto item = std::move(queue_.front());
    queue_.pop_front();
    lock.unlock();
    cv_full_.notify_one();
    if (item.second) {
      stop_producer();
      std::rethrow_exception(item.second);
    }
    if (!item.first.has_value()) {
      stop_producer();
      return std::nullopt;
    }
    return std::move(item.first);
  }

  // The sample order of the current epoch (dataset ids), for coverage checks.
  const std::vector<int64_t>& epoch_order() const { return order_; }

 private:
  struct Sample {
    std::string path;
    int cls;
  };

  Batch<float> make_batch(int64_t b) const {
    const int64_t lo = b * batch_size_;
    const int64_t hi = std::min<int64_t>(lo + batch_size_, size());
    const int rows = static_cast<int>(hi - lo);
    Batch<float> batch;
    batch.images = Tensor<float>(Shape{rows, target_hw_, target_hw_, 3});
    batch.labels = Tensor<float>(Shape{rows, k_}, 0.0f);
    batch.indices.resize(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      const int64_t idx = order_[static_cast<size_t>(lo + r)];
      const Sample& s = samples_[static_cast<size_t>(idx)];
      Tensor<float> img = load_image(s.path, target_hw_, target_hw_);
      if (aug_.enabled) {
        img = augment(img, aug_, mix_seed(seed_, static_cast<uint64_t>(epoch_), static_cast<uint64_t>(idx)));
      }
      std::copy(img.data(), img.data() + img.size(), &batch.images.at(r, 0, 0, 0));
      batch.labels.at(r, s.cls) = 1.0f;
      batch.indices[static_cast<size_t>(r)] = idx;
    }
    return batch;
  }

  void produce() {
    const int64_t nb = num_batches();
    for (int64_t b = 0; b < nb; ++b) {
      std::pair<std::optional<Batch<float>>, std::exception_ptr> item;
      try {
        item.first = make_batch(b);
      } catch (...) {
        item.second = std::current_exception();
      }
      const bool failed = item.second != nullptr;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_full_.wait(lock, [this] { return stop_ || static_cast<int>(queue_.size()) < depth_; });
        if (stop_) return;
        queue_.push_back(std::move(item));
      }
      cv_empty_.notify_one();
      if (failed) return;
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (stop_) return;
      queue_.emplace_back(std::nullopt, nullptr);
    }
    cv_empty_.notify_one();
  }

  void stop_producer() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_full_.notify_all();
    if (producer_.joinable()) producer_.join();
    queue_.clear();
    stop_ = false;
  }

  int batch_size_;
  uint64_t seed_;
  AugmentConfig aug_;
  bool shuffle_;
  int depth_;
  int target_hw_;
  int k_;
  std::vector<Sample> samples_;
  std::vector<int64_t> order_;
  int epoch_ = 0;
  int64_t cursor_ = 0;

  std::thread producer_;
  std::mutex mu_;
  std::condition_variable cv_full_, cv_empty_;
  std::deque<std::pair<std::optional<Batch<float>>, std::exception_ptr>> queue_;
  bool stop_ = false;
};

// Batches over tensors already in memory (tests, oracle-mode training).
template <typename T>
class InMemorySource final : public BatchSource<T> {
 public:
  InMemorySource(Tensor<T> images, Tensor<T> labels, int batch_size, uint64_t seed, bool shuffle = true)
      : images_(std::move(images)), labels_(std::move(labels)), batch_size_(batch_size), seed_(seed),
        shuffle_(shuffle) {
    if (batch_size < 1) throw ParamError("batch size must be >= 1");
    if (images_.dim(0) != labels_.dim(0)) {
      throw ShapeError("images/labels row mismatch: " + shape_str(images_.shape()) + " vs " +
                       shape_str(labels_.shape()));
    }
    order_.resize(static_cast<size_t>(images_.dim(0)));
  }

  int64_t size() const override { return images_.dim(0); }
  int num_classes() const override { return labels_.dim(1); }

  void start_epoch(int epoch) override {
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int64_t>(i);
    if (shuffle_) {
      Rng rng(mix_seed(seed_, 0x5u, static_cast<uint64_t>(epoch)));
      rng.shuffle(order_.begin(), order_.end());
    }
    cursor_ = 0;
  }

  std::optional<Batch<T>> next() override {
    const int64_t lo = cursor_ * batch_size_;
    if (lo >= size()) return std::nullopt;
    ++cursor_;
    const int64_t hi = std::min<int64_t>(lo + batch_size_, size());
    const int rows = static_cast<int>(hi - lo);
    const int64_t sample_elems = images_.size() / images_.dim(0);
    Shape bshape = images_.shape();
    bshape[0] = rows;
    Batch<T> batch;
    batch.images = Tensor<T>(bshape);
    batch.labels = Tensor<T>(Shape{rows, num_classes()}, T(0));
    batch.indices.resize(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      const int64_t idx = order_[static_cast<size_t>(lo + r)];
      std::copy(images_.data() + idx * sample_elems, images_.data() + (idx + 1) * sample_elems,
                batch.images.data() + r * sample_elems);
      for (int j = 0; j < num_classes(); ++j) batch.labels.at(r, j) = labels_.at(static_cast<int>(idx), j);
      batch.indices[static_cast<size_t>(r)] = idx;
    }
    return batch;
  }

 private:
  Tensor<T> images_, labels_;
  int batch_size_;
  uint64_t seed_;
  bool shuffle_;
  std::vector<int64_t> order_;
  int64_t cursor_ = 0;
};

}  // namespace octnet
