#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "octnet/errors.hpp"

namespace octnet {

enum class Split { train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

constexpr std::array<Split, 3> kSplits = {Split::train, Split::val, Split::test};

// Canonical class order for the OCT dataset (also the confusion-matrix order).
inline const std::vector<std::string>& oct_class_names() {
  static const std::vector<std::string> names = {"CNV", "DME", "DRUSEN", "NORMAL"};
  return names;
}

// Scanned directory tree: per split, per class, a sorted file list.
struct DatasetManifest {
  std::string root;
  std::vector<std::string> class_names;                         // sorted lexicographically
  std::array<std::vector<std::vector<std::string>>, 3> files;   // [split][class] -> paths
  std::vector<std::string> warnings;

  int num_classes() const { return static_cast<int>(class_names.size()); }

  const std::vector<std::vector<std::string>>& split_files(Split s) const {
    return files[static_cast<size_t>(s)];
  }
  std::vector<std::vector<std::string>>& split_files(Split s) { return files[static_cast<size_t>(s)]; }

  int64_t class_count(Split s, int cls) const {
    return static_cast<int64_t>(split_files(s)[static_cast<size_t>(cls)].size());
  }
  int64_t split_count(Split s) const {
    int64_t n = 0;
    for (const auto& v : split_files(s)) n += static_cast<int64_t>(v.size());
    return n;
  }
  int64_t total_count() const {
    return split_count(Split::train) + split_count(Split::val) + split_count(Split::test);
  }

  nlohmann::json to_json() const;

  bool operator==(const DatasetManifest& other) const {
    return root == other.root && class_names == other.class_names && files == other.files &&
           warnings == other.warnings;
  }
};

// Walks `<root>/{train,val,test}/<class>/*.{jpeg,jpg,png}`. Class folders are
// discovered from the train split (exactly 4 expected) and must agree across
// splits; file lists are sorted so the manifest is deterministic.
DatasetManifest scan_dataset(const std::string& root);

// Reassigns every file to a split, per class, by seeded shuffle + largest-
// remainder apportionment of the given percentage ratios (must sum to 100).
DatasetManifest split_dataset(const DatasetManifest& manifest, const std::array<double, 3>& ratios,
                              uint64_t seed);

// Largest-remainder apportionment of `total` items into parts proportional to
// `ratios` (percentages, sum 100 within 1e-3). Ties go to the earlier part.
std::array<int64_t, 3> apportion(int64_t total, const std::array<double, 3>& ratios);

struct FixtureSpec {
  int images_per_class = 32;
  int image_size = 150;
  uint64_t seed = 1;
  // Fractions of images_per_class routed to val/test (at least 1 image each
  // when images_per_class >= 4); the rest stay in train.
  double val_frac = 0.125;
  double test_frac = 0.25;
};

// Writes a synthetic 4-class dataset in the scanned layout: filled discs
// (CNV), hollow rings (DME), horizontal bars (DRUSEN), uniform noise (NORMAL),
// as grayscale PNGs. Deterministic per seed.
DatasetManifest generate_synthetic_fixture(const FixtureSpec& spec, const std::string& out_root);

}  // namespace octnet
