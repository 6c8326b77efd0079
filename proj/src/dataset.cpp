#include "octnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "octnet/image.hpp"
#include "octnet/rng.hpp"

namespace fs = std::filesystem;

namespace octnet {

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpeg" || ext == ".jpg" || ext == ".png";
}

std::vector<std::string> list_class_dirs(const fs::path& split_dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(split_dir)) {
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i];
  }
  return out.empty() ? "<none>" : out;
}

}  // namespace

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json splits;
  for (Split s : kSplits) {
    nlohmann::json cls;
    for (int c = 0; c < num_classes(); ++c) {
      cls[class_names[static_cast<size_t>(c)]] = {
          {"count", class_count(s, c)},
          {"files", split_files(s)[static_cast<size_t>(c)]},
      };
    }
    splits[split_name(s)] = std::move(cls);
  }
  return {{"root", root}, {"classes", class_names}, {"splits", std::move(splits)}, {"warnings", warnings}};
}

DatasetManifest scan_dataset(const std::string& root) {
  fs::path root_path(root);
  if (!fs::is_directory(root_path)) {
    throw IoError("dataset root '" + root + "' is not a directory");
  }
  for (Split s : kSplits) {
    if (!fs::is_directory(root_path / split_name(s))) {
      throw IoError("missing split directory '" + std::string(split_name(s)) + "' under '" + root + "'");
    }
  }

  DatasetManifest m;
  m.root = root;
  m.class_names = list_class_dirs(root_path / "train");
  if (m.class_names.size() != 4) {
    throw SpecError("expected exactly 4 class folders under '" + (root_path / "train").string() +
                    "', found " + std::to_string(m.class_names.size()) + " (" + join_names(m.class_names) + ")");
  }
  for (Split s : kSplits) {
    std::vector<std::string> here = list_class_dirs(root_path / split_name(s));
    if (here != m.class_names) {
      throw SpecError("class folders in split '" + std::string(split_name(s)) + "' (" + join_names(here) +
                      ") do not match train split (" + join_names(m.class_names) + ")");
    }
  }

  for (Split s : kSplits) {
    auto& per_class = m.split_files(s);
    per_class.resize(m.class_names.size());
    for (size_t c = 0; c < m.class_names.size(); ++c) {
      fs::path dir = root_path / split_name(s) / m.class_names[c];
      std::vector<std::string>& out = per_class[c];
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) {
          out.push_back(entry.path().string());
        }
      }
      std::sort(out.begin(), out.end());
      if (out.empty()) {
        m.warnings.push_back("no images for class " + m.class_names[c] + " in split " + split_name(s));
      }
    }
  }
  return m;
}

std::array<int64_t, 3> apportion(int64_t total, const std::array<double, 3>& ratios) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  for (double r : ratios) {
    if (r < 0) throw ParamError("split ratios must be >= 0");
  }
  if (std::abs(sum - 100.0) > 1e-3) {
    throw ParamError("split ratios must sum to 100 (got " + std::to_string(sum) + ")");
  }
  std::array<int64_t, 3> counts{};
  std::array<double, 3> frac{};
  int64_t assigned = 0;
  for (size_t i = 0; i < 3; ++i) {
    double target = static_cast<double>(total) * ratios[i] / 100.0;
    counts[i] = static_cast<int64_t>(std::floor(target));
    frac[i] = target - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<size_t, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    return a < b;
  });
  for (int64_t left = total - assigned, i = 0; left > 0; --left, ++i) counts[order[static_cast<size_t>(i)]] += 1;
  return counts;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, const std::array<double, 3>& ratios,
                              uint64_t seed) {
  DatasetManifest out;
  out.root = manifest.root;
  out.class_names = manifest.class_names;
  for (Split s : kSplits) out.split_files(s).resize(out.class_names.size());

  for (size_t c = 0; c < manifest.class_names.size(); ++c) {
    std::vector<std::string> pool;
    for (Split s : kSplits) {
      const auto& v = manifest.split_files(s)[c];
      pool.insert(pool.end(), v.begin(), v.end());
    }
    std::sort(pool.begin(), pool.end());
    Rng rng(mix_seed(seed, c));
    rng.shuffle(pool.begin(), pool.end());

    auto counts = apportion(static_cast<int64_t>(pool.size()), ratios);
    size_t pos = 0;
    for (size_t s = 0; s < 3; ++s) {
      auto& dst = out.files[s][c];
      dst.assign(pool.begin() + static_cast<ptrdiff_t>(pos),
                 pool.begin() + static_cast<ptrdiff_t>(pos + static_cast<size_t>(counts[s])));
      pos += static_cast<size_t>(counts[s]);
    }
  }
  for (Split s : kSplits) {
    for (size_t c = 0; c < out.class_names.size(); ++c) {
      if (out.split_files(s)[c].empty()) {
        out.warnings.push_back("no images for class " + out.class_names[c] + " in split " + split_name(s));
      }
    }
  }
  return out;
}

namespace {

// Procedural class renderers. Pixel values in [0,255]; every class carries a
// little per-image jitter so no two images are identical.
void render_fixture_image(int cls, int size, Rng& rng, std::vector<uint8_t>& px) {
  px.assign(static_cast<size_t>(size) * size, 0);
  auto put = [&](int y, int x, int v) {
    px[static_cast<size_t>(y) * size + x] = static_cast<uint8_t>(std::clamp(v, 0, 255));
  };

  if (cls == 3) {  // NORMAL: full-range uniform noise
    for (auto& v : px) v = static_cast<uint8_t>(rng.uniform_int(256));
    return;
  }

  const int bg = 25 + static_cast<int>(rng.uniform_int(20));
  const int fg = 190 + static_cast<int>(rng.uniform_int(50));
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) put(y, x, bg + static_cast<int>(rng.uniform_int(11)) - 5);
  }

  const double c = (size - 1) / 2.0;
  if (cls == 0) {  // CNV: filled disc
    const double cx = c + rng.uniform(-0.06, 0.06) * size;
    const double cy = c + rng.uniform(-0.06, 0.06) * size;
    const double r = size * rng.uniform(0.22, 0.30);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double d = std::hypot(x - cx, y - cy);
        if (d <= r) put(y, x, fg + static_cast<int>(rng.uniform_int(9)) - 4);
      }
    }
  } else if (cls == 1) {  // DME: hollow ring
    const double cx = c + rng.uniform(-0.05, 0.05) * size;
    const double cy = c + rng.uniform(-0.05, 0.05) * size;
    const double router = size * rng.uniform(0.32, 0.40);
    const double rinner = router - size * rng.uniform(0.07, 0.11);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double d = std::hypot(x - cx, y - cy);
        if (d <= router && d >= rinner) put(y, x, fg + static_cast<int>(rng.uniform_int(9)) - 4);
      }
    }
  } else {  // DRUSEN: horizontal bars, fixed phase so the class is compact
    const int period = size / 10;
    const int width = period / 2 + static_cast<int>(rng.uniform_int(2));
    for (int y = 0; y < size; ++y) {
      if (y % period < width) {
        for (int x = 0; x < size; ++x) put(y, x, fg + static_cast<int>(rng.uniform_int(9)) - 4);
      }
    }
  }
}

}  // namespace

DatasetManifest generate_synthetic_fixture(const FixtureSpec& spec, const std::string& out_root) {
  if (spec.images_per_class < 3) {
    throw ParamError("fixture needs at least 3 images per class (one per split)");
  }
  if (spec.image_size < 16) throw ParamError("fixture image size must be >= 16");

  const int per = spec.images_per_class;
  int n_val = std::max(1, static_cast<int>(std::lround(per * spec.val_frac)));
  int n_test = std::max(1, static_cast<int>(std::lround(per * spec.test_frac)));
  if (n_val + n_test >= per) {
    n_val = 1;
    n_test = 1;
  }
  const int n_train = per - n_val - n_test;

  fs::path root(out_root);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) {
    throw IoError("cannot create fixture root '" + out_root + "': " + ec.message());
  }
  const auto& classes = oct_class_names();
  for (Split s : kSplits) {
    for (const auto& cls : classes) {
      fs::create_directories(root / split_name(s) / cls, ec);
      if (ec) throw IoError("cannot create fixture directory: " + ec.message());
    }
  }

  std::vector<uint8_t> px;
  for (size_t c = 0; c < classes.size(); ++c) {
    for (int i = 0; i < per; ++i) {
      Rng rng(mix_seed(spec.seed, c, static_cast<uint64_t>(i)));
      render_fixture_image(static_cast<int>(c), spec.image_size, rng, px);
      const char* split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04d.png", classes[c].c_str(), i);
      write_png_gray((root / split / classes[c] / name).string(), spec.image_size, spec.image_size, px);
    }
  }
  return scan_dataset(out_root);
}

}  // namespace octnet
