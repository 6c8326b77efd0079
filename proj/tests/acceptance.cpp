// Acceptance gate: eight end-to-end criteria, one PASS/FAIL line each.
// Exercises the bundled metric tables, gradient machinery, convolution
// kernels, architecture goldens, and the full train/checkpoint/data pipeline
// on a synthetic fixture. Returns nonzero if any criterion fails.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "octnet/checkpoint.hpp"
#include "octnet/dataset.hpp"
#include "octnet/gradcheck.hpp"
#include "octnet/models.hpp"
#include "octnet/reference_tables.hpp"
#include "octnet/stream.hpp"
#include "octnet/train.hpp"

using namespace octnet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
  if (!cond) throw CheckFailure(what);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt_e(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1e", v);
  return buf;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("octnet_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(in.good(), "cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Permuted signed linspace: pairwise-distinct values with |v| in [lo, hi],
// keeping every coordinate far from relu/maxpool kinks relative to the
// finite-difference step.
Tensor<double> lin_input(Shape shape, uint64_t seed, double lo = 0.1, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  const int64_t n = t.size();
  std::vector<double> vals(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    vals[static_cast<size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / std::max<int64_t>(n - 1, 1);
  }
  Rng r(mix_seed(seed, 0xA11CEu));
  for (auto& v : vals) {
    if (r.bernoulli(0.5)) v = -v;
  }
  r.shuffle(vals.begin(), vals.end());
  for (int64_t i = 0; i < n; ++i) t[i] = vals[static_cast<size_t>(i)];
  return t;
}

Tensor<double> random_tensor(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

// Plain quadruple-loop cross-correlation with explicit zero padding, kept
// free of the library's accumulation strategy.
Tensor<double> naive_conv2d(const Tensor<double>& x, const Tensor<double>& k,
                            const std::vector<double>& bias, const ConvSpec& spec) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int kh = spec.kernel_h, kw = spec.kernel_w, cin = spec.in_channels, cout = spec.out_channels;
  const int out_h = conv_out_dim(h, kh, spec.stride, spec.padding);
  const int out_w = conv_out_dim(w, kw, spec.stride, spec.padding);
  PadAmount pad;
  if (spec.padding == Padding::same) pad = same_pad_amount(h, w, kh, kw, spec.stride);
  Tensor<double> out(Shape{n, out_h, out_w, cout}, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int oh = 0; oh < out_h; ++oh) {
      for (int ow = 0; ow < out_w; ++ow) {
        for (int oc = 0; oc < cout; ++oc) {
          double acc = bias.empty() ? 0.0 : bias[static_cast<size_t>(oc)];
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = oh * spec.stride + ky - pad.top;
              const int ix = ow * spec.stride + kx - pad.left;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              for (int ic = 0; ic < cin; ++ic) acc += x.at(i, iy, ix, ic) * k.at(ky, kx, ic, oc);
            }
          }
          out.at(i, oh, ow, oc) = acc;
        }
      }
    }
  }
  return out;
}

Tensor<double> naive_depthwise(const Tensor<double>& x, const Tensor<double>& k, int stride,
                               Padding padding) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int kh = k.dim(0), kw = k.dim(1);
  const int out_h = conv_out_dim(h, kh, stride, padding);
  const int out_w = conv_out_dim(w, kw, stride, padding);
  PadAmount pad;
  if (padding == Padding::same) pad = same_pad_amount(h, w, kh, kw, stride);
  Tensor<double> out(Shape{n, out_h, out_w, c}, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int oh = 0; oh < out_h; ++oh) {
      for (int ow = 0; ow < out_w; ++ow) {
        for (int ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = oh * stride + ky - pad.top;
              const int ix = ow * stride + kx - pad.left;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += x.at(i, iy, ix, ch) * k.at(ky, kx, ch, 0);
            }
          }
          out.at(i, oh, ow, ch) = acc;
        }
      }
    }
  }
  return out;
}

double max_rel_diff(const Tensor<double>& got, const Tensor<double>& want) {
  require(got.shape() == want.shape(),
          "shape mismatch: " + shape_str(got.shape()) + " vs " + shape_str(want.shape()));
  double worst = 0.0;
  for (int64_t i = 0; i < got.size(); ++i) {
    const double a = got[i], b = want[i];
    worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}));
  }
  return worst;
}

Tensor<float> random_image_batch(int n, uint64_t seed) {
  Tensor<float> x(Shape{n, kInputHW, kInputHW, kInputChannels});
  Rng rng(seed);
  for (int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform());
  return x;
}

std::vector<float> dump_params(Network<float>& net) {
  std::vector<float> out;
  for (auto& p : net.params()) {
    const Tensor<float>& v = *p.value;
    out.insert(out.end(), v.data(), v.data() + v.size());
  }
  return out;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

// Shared fixture (32 images per class at 150x150, seed 1), generated once.
const fs::path& ensure_fixture(const fs::path& base) {
  static fs::path root;
  if (root.empty()) {
    fs::path candidate = base / "fixture";
    FixtureSpec spec;  // 32 per class, 150x150, seed 1
    generate_synthetic_fixture(spec, candidate.string());
    root = candidate;
  }
  return root;
}

const char* kModels[4] = {"vanilla_cnn", "xception", "resnet50", "mobilenetv2"};

// ---------------------------------------------------------------- criterion 1
std::string criterion_reproduction() {
  const auto t0 = Clock::now();
  ReferenceTables tables = load_reference_tables();
  ReproductionReport rep = reproduce_reference_metrics(tables);
  require(rep.tolerance == 0.005, "tolerance must be 0.005");
  require(rep.lines.size() == 8, "expected 8 reproduction lines, got " + std::to_string(rep.lines.size()));

  const double computed_want[4] = {952.0 / 968.0, 959.0 / 968.0, 938.0 / 968.0, 960.0 / 968.0};
  const double published[4] = {0.98, 0.9907, 0.97, 0.9917};
  std::ostringstream detail;
  for (int i = 0; i < 4; ++i) {
    const ReproLine& ln = rep.lines[static_cast<size_t>(i)];
    require(ln.model == kModels[i] && ln.phase == Phase::testing,
            "testing line " + std::to_string(i) + " out of order: " + ln.model);
    require(ln.status == "PASS", ln.model + " testing line is " + ln.status + ", not PASS");
    require(std::abs(ln.computed - computed_want[i]) < 1e-9,
            ln.model + " computed accuracy " + fmt(ln.computed) + " != " + fmt(computed_want[i]));
    require(std::abs(ln.expected - published[i]) < 1e-12,
            ln.model + " reference accuracy " + fmt(ln.expected) + " != " + fmt(published[i]));
    require(std::abs(ln.delta) <= rep.tolerance + 1e-12,
            ln.model + " delta " + fmt(ln.delta) + " exceeds 0.005");
    detail << (i ? ", " : "") << ln.model << " " << fmt(ln.computed) << " (ref " << fmt(ln.expected) << ")";
  }
  require(rep.ok, "reproduction report not ok");
  const double secs = seconds_since(t0);
  require(secs < 1.0, "runtime " + fmt(secs) + "s exceeds the 1s budget");
  detail << "; all deltas within +/-0.005";
  return detail.str();
}

// ---------------------------------------------------------------- criterion 2
std::string criterion_documented_mismatches() {
  ReferenceTables tables = load_reference_tables();
  ReproductionReport rep = reproduce_reference_metrics(tables);
  require(rep.lines.size() == 8, "expected 8 reproduction lines");

  const double train_computed[4] = {77450.0 / 83484.0, 79040.0 / 83484.0, 77174.0 / 83484.0,
                                    78714.0 / 83484.0};
  const double train_published[4] = {0.90, 0.9390, 0.89, 0.9388};
  for (int i = 0; i < 4; ++i) {
    const ReproLine& ln = rep.lines[static_cast<size_t>(4 + i)];
    require(ln.model == kModels[i] && ln.phase == Phase::training,
            "training line " + std::to_string(i) + " out of order: " + ln.model);
    require(ln.status == "NOTE", ln.model + " training line is " + ln.status + ", not NOTE");
    require(std::abs(ln.computed - train_computed[i]) < 1e-9,
            ln.model + " training accuracy " + fmt(ln.computed) + " != " + fmt(train_computed[i]));
    require(std::abs(ln.expected - train_published[i]) < 1e-12,
            ln.model + " published training accuracy mismatch");
  }
  // The separable-conv backbone's gap exceeds the tolerance yet must stay a
  // note; the inverted-residual one sits just inside it. Neither may fail.
  const double gap_x = rep.lines[5].computed - rep.lines[5].expected;
  const double gap_m = rep.lines[7].computed - rep.lines[7].expected;
  require(gap_x > rep.tolerance, "xception training gap " + fmt(gap_x) + " should exceed 0.005");
  require(gap_m > 0.0 && gap_m < rep.tolerance, "mobilenetv2 training gap " + fmt(gap_m) + " out of range");
  require(rep.ok, "notes must not fail the reproduction");

  const std::string text = rep.to_text();
  require(text.find("documented mismatch, not a failure") != std::string::npos,
          "report text lacks the documented-mismatch marker");
  require(text.find("All testing accuracies reproduced within tolerance.") != std::string::npos,
          "report text lacks the success footer");

  const char* cli = std::getenv("OCTNET_CLI");
  require(cli != nullptr && *cli != '\0', "OCTNET_CLI is not set");
  const std::string cmd = std::string("\"") + cli + "\" reproduce-metrics > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  require(rc != -1, "failed to launch the reproduce-metrics command");
  require(WIFEXITED(rc) && WEXITSTATUS(rc) == 0,
          "reproduce-metrics exited with " + std::to_string(WIFEXITED(rc) ? WEXITSTATUS(rc) : -1));

  return "xception training " + fmt(rep.lines[5].computed) + " vs published " +
         fmt(rep.lines[5].expected) + " (gap " + fmt(gap_x) + "), mobilenetv2 " +
         fmt(rep.lines[7].computed) + " vs " + fmt(rep.lines[7].expected) + " (gap " + fmt(gap_m) +
         "): both NOTE lines; CLI reproduce-metrics exit 0";
}

// ---------------------------------------------------------------- criterion 3
std::string criterion_gradients() {
  const auto t0 = Clock::now();
  struct Case {
    const char* name;
    std::function<LayerPtr<double>()> make;
    Shape per_sample;
    int batch;
    bool batch_norm;  // relaxed tolerance: 1e-3 instead of 1e-4
  };
  const std::vector<Case> cases = {
      {"dense", [] { return std::make_unique<DenseLayer<double>>(3); }, Shape{6}, 4, false},
      {"conv_same", [] { return std::make_unique<ConvLayer<double>>(3, 3, 3, 1, Padding::same); },
       Shape{5, 5, 2}, 2, false},
      {"conv_valid_s2", [] { return std::make_unique<ConvLayer<double>>(2, 2, 2, 2, Padding::valid); },
       Shape{5, 5, 2}, 2, false},
      {"depthwise", [] { return std::make_unique<DepthwiseConvLayer<double>>(3, 3, 1, Padding::same); },
       Shape{4, 4, 3}, 2, false},
      {"separable_pw_first",
       [] {
         return std::make_unique<SeparableConvLayer<double>>(4, 3, 3, 1, Padding::same,
                                                             SeparableOrder::pointwise_first);
       },
       Shape{4, 4, 3}, 2, false},
      {"separable_dw_first",
       [] {
         return std::make_unique<SeparableConvLayer<double>>(4, 3, 3, 1, Padding::same,
                                                             SeparableOrder::depthwise_first);
       },
       Shape{4, 4, 3}, 2, false},
      {"maxpool", [] { return std::make_unique<MaxPoolLayer<double>>(2, 2); }, Shape{4, 4, 2}, 2, false},
      {"maxpool_same", [] { return std::make_unique<MaxPoolLayer<double>>(3, 2, Padding::same); },
       Shape{5, 5, 1}, 2, false},
      {"flatten", [] { return std::make_unique<FlattenLayer<double>>(); }, Shape{3, 2, 2}, 2, false},
      {"dropout", [] { return std::make_unique<DropoutLayer<double>>(0.3); }, Shape{10}, 2, false},
      {"relu", [] { return std::make_unique<ActivationLayer<double>>(ActKind::relu); }, Shape{5}, 3, false},
      {"relu6", [] { return std::make_unique<ActivationLayer<double>>(ActKind::relu6); }, Shape{5}, 3,
       false},
      {"softmax", [] { return std::make_unique<ActivationLayer<double>>(ActKind::softmax); }, Shape{5}, 3,
       false},
      {"batchnorm", [] { return std::make_unique<BatchNormLayer<double>>(); }, Shape{3}, 8, true},
      {"batchnorm_spatial", [] { return std::make_unique<BatchNormLayer<double>>(); }, Shape{3, 3, 2}, 2,
       true},
      {"chain_conv_bn",
       [] {
         auto c = std::make_unique<ChainLayer<double>>();
         c->add(std::make_unique<ConvLayer<double>>(2, 3, 3, 1, Padding::same, false));
         c->add(std::make_unique<BatchNormLayer<double>>());
         return c;
       },
       Shape{4, 4, 2}, 2, true},
      {"residual_conv",
       [] {
         auto main_chain = std::make_unique<ChainLayer<double>>();
         main_chain->add(std::make_unique<ConvLayer<double>>(2, 1, 1, 1, Padding::same));
         return std::make_unique<ResidualLayer<double>>(std::move(main_chain), nullptr);
       },
       Shape{3, 3, 2}, 2, false},
  };

  double worst_plain = 0.0, worst_bn = 0.0;
  for (const auto& c : cases) {
    const double tol = c.batch_norm ? 1e-3 : 1e-4;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      LayerPtr<double> layer = c.make();
      layer->build(c.per_sample);
      Rng init(mix_seed(seed, 0x1234u));
      layer->init_params(init);
      layer->set_stochastic_seed(mix_seed(seed, 0xD00Du));
      Shape in = c.per_sample;
      in.insert(in.begin(), c.batch);
      Tensor<double> x = lin_input(in, seed);
      GradCheckOptions opts;
      opts.seed = seed;
      GradCheckResult res = grad_check(*layer, x, opts);
      require(res.max_rel_error < tol, std::string(c.name) + " seed " + std::to_string(seed) +
                                           ": rel err " + fmt_e(res.max_rel_error) + " >= " + fmt_e(tol) +
                                           " at " + res.worst_tensor);
      (c.batch_norm ? worst_bn : worst_plain) =
          std::max(c.batch_norm ? worst_bn : worst_plain, res.max_rel_error);
    }
  }
  const double secs = seconds_since(t0);
  require(secs < 120.0, "runtime " + fmt(secs) + "s exceeds the 2min budget");
  return std::to_string(cases.size()) + " layer kinds x 20 seeds; worst rel err " + fmt_e(worst_plain) +
         " (plain, tol 1e-4), " + fmt_e(worst_bn) + " (batch norm, tol 1e-3)";
}

// ---------------------------------------------------------------- criterion 4
std::string criterion_conv_oracles() {
  const auto t0 = Clock::now();
  Rng rng(0xC4C4);
  double worst_conv = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_int(2));
    const int h = 1 + static_cast<int>(rng.uniform_int(8));
    const int w = 1 + static_cast<int>(rng.uniform_int(8));
    const Padding pad = rng.bernoulli(0.5) ? Padding::same : Padding::valid;
    int kh = 1 + static_cast<int>(rng.uniform_int(3));
    int kw = 1 + static_cast<int>(rng.uniform_int(3));
    if (pad == Padding::valid) {
      kh = std::min(kh, h);
      kw = std::min(kw, w);
    }
    const int stride = 1 + static_cast<int>(rng.uniform_int(2));
    const int cin = 1 + static_cast<int>(rng.uniform_int(3));
    const int cout = 1 + static_cast<int>(rng.uniform_int(4));
    const ConvSpec spec{kh, kw, cin, cout, stride, pad};
    Tensor<double> x = random_tensor(Shape{n, h, w, cin}, rng);
    Tensor<double> k = random_tensor(Shape{kh, kw, cin, cout}, rng);
    std::vector<double> bias;
    if (rng.bernoulli(0.5)) {
      bias.resize(static_cast<size_t>(cout));
      for (auto& b : bias) b = rng.uniform(-1.0, 1.0);
    }
    const double d = max_rel_diff(conv2d(x, k, bias, spec), naive_conv2d(x, k, bias, spec));
    require(d < 1e-5, "conv2d instance " + std::to_string(i) + " rel err " + fmt_e(d));
    worst_conv = std::max(worst_conv, d);
  }

  double worst_sep = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_int(2));
    const int h = 1 + static_cast<int>(rng.uniform_int(8));
    const int w = 1 + static_cast<int>(rng.uniform_int(8));
    const Padding pad = rng.bernoulli(0.5) ? Padding::same : Padding::valid;
    int kh = 1 + static_cast<int>(rng.uniform_int(3));
    int kw = 1 + static_cast<int>(rng.uniform_int(3));
    if (pad == Padding::valid) {
      kh = std::min(kh, h);
      kw = std::min(kw, w);
    }
    const int stride = 1 + static_cast<int>(rng.uniform_int(2));
    const int cin = 1 + static_cast<int>(rng.uniform_int(3));
    const int cm = 1 + static_cast<int>(rng.uniform_int(4));
    const SeparableOrder order =
        rng.bernoulli(0.5) ? SeparableOrder::pointwise_first : SeparableOrder::depthwise_first;
    const ConvSpec spec{kh, kw, cin, cm, stride, pad};
    const ConvSpec pw_spec{1, 1, cin, cm, 1, Padding::same};
    Tensor<double> x = random_tensor(Shape{n, h, w, cin}, rng);
    Tensor<double> pw = random_tensor(Shape{1, 1, cin, cm}, rng);
    Tensor<double> dw = random_tensor(
        Shape{kh, kw, order == SeparableOrder::pointwise_first ? cm : cin, 1}, rng);
    Tensor<double> got = depthwise_separable_conv(x, pw, dw, order, spec);
    Tensor<double> want =
        order == SeparableOrder::pointwise_first
            ? naive_depthwise(naive_conv2d(x, pw, {}, pw_spec), dw, stride, pad)
            : naive_conv2d(naive_depthwise(x, dw, stride, pad), pw, {}, pw_spec);
    const double d = max_rel_diff(got, want);
    require(d < 1e-5, "separable instance " + std::to_string(i) + " (" + separable_order_name(order) +
                          ") rel err " + fmt_e(d));
    worst_sep = std::max(worst_sep, d);
  }
  const double secs = seconds_since(t0);
  require(secs < 30.0, "runtime " + fmt(secs) + "s exceeds the 30s budget");
  return "100 conv2d + 100 separable random instances (dims <= 8); worst rel err " + fmt_e(worst_conv) +
         " / " + fmt_e(worst_sep) + " (tol 1e-5)";
}

// ---------------------------------------------------------------- criterion 5
std::string criterion_architecture_goldens() {
  // Four-stage CNN parameter oracle, written out per layer.
  {
    Network<float> net = build_vanilla_cnn<float>();
    const int64_t want = (3 * 3 * 3 * 64 + 64) + (3 * 3 * 64 * 64 + 64) + (3 * 3 * 64 * 128 + 128) +
                         (3 * 3 * 128 * 128 + 128) + (6272 * 512 + 512) + (512 * 4 + 4);
    require(want == 3473988, "parameter oracle arithmetic is off");
    require(net.param_count() == want, "vanilla_cnn has " + std::to_string(net.param_count()) +
                                           " params, oracle says " + std::to_string(want));
  }
  // Residual bottleneck backbone: (3, 4, 6, 3) blocks per stage.
  {
    Network<float> net = build_resnet50<float>();
    ArchReport rep = net.report();
    std::map<std::string, int> stages;
    for (const auto& r : rep.rows) {
      if (r.kind == "residual_add") stages[r.label.substr(0, 5)]++;
    }
    const std::map<std::string, int> want = {{"conv2", 3}, {"conv3", 4}, {"conv4", 6}, {"conv5", 3}};
    require(stages == want, "resnet50 residual blocks per stage are not (3, 4, 6, 3)");
  }
  // Inverted-residual backbone: 17 blocks, relu6 on expand/depthwise stages,
  // strictly linear projections.
  {
    Network<float> net = build_mobilenetv2<float>();
    int expand_relu6 = 0, depthwise_relu6 = 0, wrong_act = 0, project_act = 0;
    std::set<std::string> labels;
    walk_layers<float>(net, [&](const Layer<float>& l, const std::string&) {
      if (!l.label().empty()) labels.insert(l.label());
      const auto* a = dynamic_cast<const ActivationLayer<float>*>(&l);
      if (!a) return;
      const std::string& lbl = a->label();
      if (lbl.find(".expand_") != std::string::npos) {
        a->act() == ActKind::relu6 ? ++expand_relu6 : ++wrong_act;
      } else if (lbl.find(".depthwise_") != std::string::npos) {
        a->act() == ActKind::relu6 ? ++depthwise_relu6 : ++wrong_act;
      }
      if (lbl.find("project") != std::string::npos) ++project_act;
    });
    require(wrong_act == 0, "expand/depthwise activations include a non-relu6");
    require(project_act == 0, "projection stage carries an activation");
    require(expand_relu6 == 17, "expected 17 expand relu6 stages, found " + std::to_string(expand_relu6));
    require(depthwise_relu6 == 17,
            "expected 17 depthwise relu6 stages, found " + std::to_string(depthwise_relu6));
    for (int b = 1; b <= 17; ++b) {
      require(labels.count("block" + std::to_string(b) + ".project") == 1,
              "block" + std::to_string(b) + ".project missing");
    }
    require(labels.count("block18.project") == 0, "unexpected 18th block");
  }
  // Every backbone at full width produces normalized class rows.
  const ArchId ids[4] = {ArchId::vanilla_cnn, ArchId::xception, ArchId::resnet50, ArchId::mobilenetv2};
  for (int i = 0; i < 4; ++i) {
    Network<float> net = build_network<float>(ids[i]);
    net.init_params(100 + static_cast<uint64_t>(i));
    auto [probs, predictions] = net.predict(random_image_batch(2, 200 + static_cast<uint64_t>(i)));
    (void)predictions;
    require(probs.shape() == Shape{2, kNumClasses}, std::string(arch_name(ids[i])) + " output shape");
    require(all_finite(probs), std::string(arch_name(ids[i])) + " produced non-finite probabilities");
    for (int r = 0; r < 2; ++r) {
      double row = 0.0;
      for (int j = 0; j < kNumClasses; ++j) {
        require(probs.at(r, j) >= 0.0f, std::string(arch_name(ids[i])) + " negative probability");
        row += probs.at(r, j);
      }
      require(std::abs(row - 1.0) < 1e-5, std::string(arch_name(ids[i])) + " row sum " + fmt(row));
    }
  }
  return "vanilla_cnn params 3473988; resnet50 stages 3/4/6/3; mobilenetv2 17 blocks with relu6 "
         "expand+depthwise and linear projections; all four full-width forwards normalized";
}

// ---------------------------------------------------------------- criterion 6
std::string criterion_learnability(const fs::path& tmp) {
  const auto t0 = Clock::now();
  const fs::path& root = ensure_fixture(tmp);
  DatasetManifest manifest = scan_dataset(root.string());
  require(manifest.total_count() == 128, "fixture should hold 128 images");

  Network<float> net = build_vanilla_cnn<float>(4);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 16;
  cfg.optimizer = OptimizerKind::adam;  // hyper defaults: lr 1e-3
  cfg.seed = 5;
  cfg.curve_path = (tmp / "learnability_curves.csv").string();
  DirectoryStream train(manifest, Split::train, cfg.batch_size, 17,
                               AugmentConfig{.enabled = false}, true, 2);
  require(train.size() == 80, "train split should hold 80 images");
  FitResult res = fit(net, train, static_cast<BatchSource<float>*>(nullptr), cfg);

  int reached_epoch = 0;
  double reached_acc = 0.0, best = 0.0;
  for (const auto& p : res.curves) {
    best = std::max(best, p.train_acc);
    if (reached_epoch == 0 && p.train_acc >= 0.95) {
      reached_epoch = p.epoch;
      reached_acc = p.train_acc;
    }
  }
  const double secs = seconds_since(t0);
  require(reached_epoch != 0,
          "no epoch reached train accuracy 0.95 (best " + fmt(best) + " over 15 epochs)");
  require(secs < 300.0, "runtime " + fmt(secs) + "s exceeds the 5min budget");
  return "train accuracy " + fmt(reached_acc) + " at epoch " + std::to_string(reached_epoch) +
         " (best " + fmt(best) + "); 80 images, quarter-width four-stage CNN";
}

// ---------------------------------------------------------------- criterion 7
std::string criterion_determinism(const fs::path& tmp) {
  const fs::path& root = ensure_fixture(tmp);
  DatasetManifest manifest = scan_dataset(root.string());

  auto run = [&](int prefetch_depth, const fs::path& csv) {
    Network<float> net = build_vanilla_cnn<float>(8);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 16;
    cfg.seed = 21;
    cfg.curve_path = csv.string();
    AugmentConfig aug;  // enabled, with the default rotation/shift/shear/flip
    DirectoryStream train(manifest, Split::train, cfg.batch_size, 99, aug, true, prefetch_depth);
    fit(net, train, static_cast<BatchSource<float>*>(nullptr), cfg);
    return net;
  };
  const fs::path csv_a = tmp / "determinism_a.csv", csv_b = tmp / "determinism_b.csv";
  Network<float> net_a = run(1, csv_a);
  Network<float> net_b = run(3, csv_b);

  const std::string bytes_a = read_bytes(csv_a), bytes_b = read_bytes(csv_b);
  require(!bytes_a.empty(), "curve CSV is empty");
  require(bytes_a == bytes_b, "curve CSVs differ between identically seeded runs");
  const std::vector<float> params_a = dump_params(net_a), params_b = dump_params(net_b);
  require(bitwise_equal(params_a, params_b),
          "parameters differ bitwise between identically seeded runs");

  const fs::path ckpt = tmp / "determinism.ckpt";
  save_checkpoint(net_a, ArchId::vanilla_cnn, 8, nlohmann::json{{"purpose", "determinism"}}, 0x5EED,
                  ckpt.string());
  LoadedCheckpoint loaded = load_checkpoint(ckpt.string());
  require(bitwise_equal(dump_params(loaded.net), params_a),
          "checkpoint round-trip changed parameter bits");

  return "two augmented 1-epoch runs (prefetch 1 vs 3): curve CSVs identical (" +
         std::to_string(bytes_a.size()) + " bytes), " + std::to_string(params_a.size()) +
         " parameters bitwise equal; checkpoint round-trip bitwise equal";
}

// ---------------------------------------------------------------- criterion 8
std::string criterion_data_contracts(const fs::path& tmp) {
  const fs::path& root = ensure_fixture(tmp);
  DatasetManifest m1 = scan_dataset(root.string());
  DatasetManifest m2 = scan_dataset(root.string());
  require(m1 == m2, "rescanning the fixture changed the manifest");
  for (int c = 0; c < m1.num_classes(); ++c) {
    require(m1.class_count(Split::train, c) == 20, "train split should hold 20 per class");
    require(m1.class_count(Split::val, c) == 4, "val split should hold 4 per class");
    require(m1.class_count(Split::test, c) == 8, "test split should hold 8 per class");
  }

  DirectoryStream stream(m1, Split::train, 16, 7, AugmentConfig{.enabled = false}, true, 2);
  stream.start_epoch(1);
  std::set<int64_t> seen;
  int64_t rows = 0;
  bool pixels_ok = true, one_hot_ok = true;
  while (auto batch = stream.next()) {
    rows += batch->rows();
    for (int64_t id : batch->indices) seen.insert(id);
    for (int64_t i = 0; i < batch->images.size(); ++i) {
      pixels_ok = pixels_ok && batch->images[i] >= 0.0f && batch->images[i] <= 1.0f;
    }
    for (int r = 0; r < batch->rows(); ++r) {
      int ones = 0, zeros = 0;
      for (int j = 0; j < batch->labels.dim(1); ++j) {
        if (batch->labels.at(r, j) == 1.0f) ++ones;
        if (batch->labels.at(r, j) == 0.0f) ++zeros;
      }
      one_hot_ok = one_hot_ok && ones == 1 && zeros == batch->labels.dim(1) - 1;
    }
  }
  require(rows == 80, "epoch yielded " + std::to_string(rows) + " rows, expected 80");
  require(static_cast<int64_t>(seen.size()) == 80 && *seen.begin() == 0 && *seen.rbegin() == 79,
          "epoch did not cover every sample exactly once");
  require(pixels_ok, "pixels fell outside [0, 1]");
  require(one_hot_ok, "labels are not one-hot");

  const std::array<int64_t, 3> parts = apportion(84484, {98.816, 0.038, 1.146});
  const std::array<int64_t, 3> want = {83484, 32, 968};
  require(parts == want, "apportion(84484) gave " + std::to_string(parts[0]) + "/" +
                             std::to_string(parts[1]) + "/" + std::to_string(parts[2]));

  return "rescan stable (20/4/8 per class); one epoch covered 80/80 unique samples with [0,1] pixels "
         "and one-hot labels; apportion(84484, {98.816, 0.038, 1.146}) -> 83484/32/968";
}

}  // namespace

int main() {
  TempDir tmp;
  struct Criterion {
    int id;
    const char* title;
    std::function<std::string()> body;
  };
  const std::vector<Criterion> criteria = {
      {1, "bundled testing metrics reproduce within 0.005", [] { return criterion_reproduction(); }},
      {2, "documented training-accuracy mismatches stay notes",
       [] { return criterion_documented_mismatches(); }},
      {3, "finite-difference gradient check across every layer kind",
       [] { return criterion_gradients(); }},
      {4, "convolution kernels match naive quadruple-loop oracles",
       [] { return criterion_conv_oracles(); }},
      {5, "architecture structure and parameter goldens", [] { return criterion_architecture_goldens(); }},
      {6, "synthetic-fixture training reaches 95% train accuracy",
       [&] { return criterion_learnability(tmp.path); }},
      {7, "training pipeline is deterministic end to end", [&] { return criterion_determinism(tmp.path); }},
      {8, "data pipeline contracts hold", [&] { return criterion_data_contracts(tmp.path); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    try {
      const std::string detail = c.body();
      std::printf("ACCEPTANCE %d: PASS - %s: %s (%.1fs)\n", c.id, c.title, detail.c_str(),
                  seconds_since(t0));
    } catch (const std::exception& e) {
      ++failures;
      std::printf("ACCEPTANCE %d: FAIL - %s: %s\n", c.id, c.title, e.what());
    }
    std::fflush(stdout);
  }
  if (failures == 0) {
    std::printf("acceptance: all %d criteria passed\n", static_cast<int>(criteria.size()));
  } else {
    std::printf("acceptance: %d of %d criteria FAILED\n", failures, static_cast<int>(criteria.size()));
  }
  return failures == 0 ? 0 : 1;
}
