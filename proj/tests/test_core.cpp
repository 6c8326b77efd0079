#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <set>

#include "octnet/kernels.hpp"
#include "octnet/rng.hpp"
#include "octnet/tensor.hpp"
#include "octnet/threading.hpp"

using namespace octnet;

namespace {

// Brute-force cross-correlation with explicit zero padding: the independent
// oracle the fast kernels are checked against.
Tensor<double> naive_conv2d(const Tensor<double>& in, const Tensor<double>& k, const std::vector<double>& bias,
                            int stride, Padding padding) {
  const int n = in.dim(0), h = in.dim(1), w = in.dim(2), cin = in.dim(3);
  const int kh = k.dim(0), kw = k.dim(1), cout = k.dim(3);
  const int oh = conv_out_dim(h, kh, stride, padding);
  const int ow = conv_out_dim(w, kw, stride, padding);
  int pad_top = 0, pad_left = 0;
  if (padding == Padding::same) {
    PadAmount p = same_pad_amount(h, w, kh, kw, stride);
    pad_top = p.top;
    pad_left = p.left;
  }
  Tensor<double> out(Shape{n, oh, ow, cout}, 0.0);
  for (int ni = 0; ni < n; ++ni)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int oc = 0; oc < cout; ++oc) {
          double acc = bias.empty() ? 0.0 : bias[static_cast<size_t>(oc)];
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int sy = y * stride + ky - pad_top;
              const int sx = x * stride + kx - pad_left;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              for (int ic = 0; ic < cin; ++ic) acc += in.at(ni, sy, sx, ic) * k.at(ky, kx, ic, oc);
            }
          out.at(ni, y, x, oc) = acc;
        }
  return out;
}

Tensor<double> naive_depthwise(const Tensor<double>& in, const Tensor<double>& k, int stride, Padding padding) {
  const int n = in.dim(0), h = in.dim(1), w = in.dim(2), c = in.dim(3);
  const int kh = k.dim(0), kw = k.dim(1);
  const int oh = conv_out_dim(h, kh, stride, padding);
  const int ow = conv_out_dim(w, kw, stride, padding);
  int pad_top = 0, pad_left = 0;
  if (padding == Padding::same) {
    PadAmount p = same_pad_amount(h, w, kh, kw, stride);
    pad_top = p.top;
    pad_left = p.left;
  }
  Tensor<double> out(Shape{n, oh, ow, c}, 0.0);
  for (int ni = 0; ni < n; ++ni)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int ci = 0; ci < c; ++ci) {
          double acc = 0.0;
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int sy = y * stride + ky - pad_top;
              const int sx = x * stride + kx - pad_left;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              acc += in.at(ni, sy, sx, ci) * k.at(ky, kx, ci, 0);
            }
          out.at(ni, y, x, ci) = acc;
        }
  return out;
}

double max_rel_diff(const Tensor<double>& a, const Tensor<double>& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    worst = std::max(worst, d);
  }
  return worst;
}

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("tensor shape and data invariants") {
  Tensor<float> t(Shape{2, 3, 4, 5}, 1.5f);
  CHECK(t.size() == 120);
  CHECK(t.rank() == 4);
  CHECK(numel(t.shape()) == 120);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 0, 3}), ShapeError);
  CHECK_THROWS_AS(t.reshaped(Shape{7, 7}), ShapeError);
  Tensor<float> r = t.reshaped(Shape{6, 20});
  CHECK(r.dim(0) == 6);
  CHECK(r.size() == t.size());
  CHECK(all_finite(t));
  t.at(1, 2, 3, 4) = std::numeric_limits<float>::infinity();
  CHECK_FALSE(all_finite(t));
}

TEST_CASE("rng determinism and stream independence") {
  Rng a(123), b(123), c(124);
  bool same = true, diff = false;
  for (int i = 0; i < 100; ++i) {
    const uint64_t x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
    same = same && (x == y);
    diff = diff || (x != z);
  }
  CHECK(same);
  CHECK(diff);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(1, 2, 3) != mix_seed(1, 3, 2));

  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  auto w = v;
  Rng s1(7), s2(7);
  s1.shuffle(v.begin(), v.end());
  s2.shuffle(w.begin(), w.end());
  CHECK(v == w);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 8);
}

TEST_CASE("parallel_for covers every index exactly once") {
  std::vector<std::atomic<int>> hits(257);
  for (auto& h : hits) h = 0;
  parallel_for(257, [&](int64_t i) { hits[static_cast<size_t>(i)]++; });
  bool all_once = true;
  for (auto& h : hits) all_once = all_once && h == 1;
  CHECK(all_once);

  // ranged form partitions [0, n) into disjoint covering chunks
  std::vector<std::atomic<int>> hits2(100);
  for (auto& h : hits2) h = 0;
  parallel_for_range(100, [&](int64_t lo, int64_t hi) {
    CHECK(lo < hi);
    for (int64_t i = lo; i < hi; ++i) hits2[static_cast<size_t>(i)]++;
  });
  for (auto& h : hits2) CHECK(h == 1);
  parallel_for(0, [&](int64_t) { CHECK(false); });  // empty range is a no-op
}

TEST_CASE("conv output-dim formula matches enumeration oracle for in <= 32") {
  for (int in = 1; in <= 32; ++in)
    for (int k = 1; k <= in; ++k)
      for (int s = 1; s <= 4; ++s) {
        int count = 0;
        for (int start = 0; start + k <= in; start += s) ++count;
        CHECK(conv_out_dim(in, k, s, Padding::valid) == count);
        // same padding: ceil(in / s)
        CHECK(conv_out_dim(in, k, s, Padding::same) == (in + s - 1) / s);
      }
  CHECK_THROWS_AS(conv_out_dim(2, 3, 1, Padding::valid), SpecError);
}

TEST_CASE("same padding puts the extra pixel on bottom/right") {
  PadAmount p = same_pad_amount(5, 5, 2, 2, 1);  // needs 1 total each way
  CHECK(p.top == 0);
  CHECK(p.bottom == 1);
  CHECK(p.left == 0);
  CHECK(p.right == 1);
}

TEST_CASE("conv2d hand examples") {
  // all-ones 3x3 window -> 9
  Tensor<double> ones(Shape{1, 3, 3, 1}, 1.0);
  Tensor<double> k(Shape{3, 3, 1, 1}, 1.0);
  ConvSpec spec{3, 3, 1, 1, 1, Padding::valid};
  Tensor<double> out = conv2d(ones, k, std::vector<double>{0.0}, spec);
  CHECK(out.size() == 1);
  CHECK(out[0] == doctest::Approx(9.0));

  // 1x1 identity kernel is the identity map (exact in f64)
  Rng rng(5);
  Tensor<double> x = random_tensor(Shape{2, 4, 5, 3}, rng);
  Tensor<double> id(Shape{1, 1, 3, 3}, 0.0);
  for (int c = 0; c < 3; ++c) id.at(0, 0, c, c) = 1.0;
  ConvSpec idspec{1, 1, 3, 3, 1, Padding::valid};
  Tensor<double> y = conv2d(x, id, std::vector<double>(3, 0.0), idspec);
  CHECK(x.same_shape(y));
  bool exact = true;
  for (int64_t i = 0; i < x.size(); ++i) exact = exact && x[i] == y[i];
  CHECK(exact);

  // fixed 8x8x3 same-padding case against the naive oracle
  Tensor<double> in8 = random_tensor(Shape{1, 8, 8, 3}, rng);
  Tensor<double> k8 = random_tensor(Shape{3, 3, 3, 4}, rng);
  std::vector<double> b8{0.1, -0.2, 0.3, 0.0};
  ConvSpec s8{3, 3, 3, 4, 1, Padding::same};
  CHECK(max_rel_diff(conv2d(in8, k8, b8, s8), naive_conv2d(in8, k8, b8, 1, Padding::same)) < 1e-5);

  // kernel/spec mismatch raises, and the message names both shapes
  bool both_named = false;
  try {
    conv2d(x, id, b8, s8);
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    both_named = msg.find("[1x1x3x3]") != std::string::npos && msg.find("[3x3x3x4]") != std::string::npos;
  }
  CHECK(both_named);
}

TEST_CASE("conv2d equals naive oracle on 100 random small instances") {
  Rng rng(2024);
  for (int i = 0; i < 100; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_int(2));
    const int h = 1 + static_cast<int>(rng.uniform_int(8));
    const int w = 1 + static_cast<int>(rng.uniform_int(8));
    const int cin = 1 + static_cast<int>(rng.uniform_int(4));
    const int cout = 1 + static_cast<int>(rng.uniform_int(4));
    const int kh = 1 + static_cast<int>(rng.uniform_int(std::min(h, 4)));
    const int kw = 1 + static_cast<int>(rng.uniform_int(std::min(w, 4)));
    const int stride = 1 + static_cast<int>(rng.uniform_int(3));
    const Padding pad = rng.bernoulli(0.5) ? Padding::same : Padding::valid;
    Tensor<double> in = random_tensor(Shape{n, h, w, cin}, rng);
    Tensor<double> k = random_tensor(Shape{kh, kw, cin, cout}, rng);
    std::vector<double> bias(static_cast<size_t>(cout));
    for (auto& b : bias) b = rng.uniform(-0.5, 0.5);
    ConvSpec spec{kh, kw, cin, cout, stride, pad};
    CHECK(max_rel_diff(conv2d(in, k, bias, spec), naive_conv2d(in, k, bias, stride, pad)) < 1e-5);
  }
}

TEST_CASE("depthwise conv equals naive oracle") {
  Rng rng(77);
  for (int i = 0; i < 40; ++i) {
    const int h = 2 + static_cast<int>(rng.uniform_int(7));
    const int w = 2 + static_cast<int>(rng.uniform_int(7));
    const int c = 1 + static_cast<int>(rng.uniform_int(4));
    const int kh = 1 + static_cast<int>(rng.uniform_int(std::min({h, w, 3})));
    const int stride = 1 + static_cast<int>(rng.uniform_int(2));
    const Padding pad = rng.bernoulli(0.5) ? Padding::same : Padding::valid;
    Tensor<double> in = random_tensor(Shape{1, h, w, c}, rng);
    Tensor<double> k = random_tensor(Shape{kh, kh, c, 1}, rng);
    CHECK(max_rel_diff(depthwise_conv2d(in, k, {}, stride, pad), naive_depthwise(in, k, stride, pad)) < 1e-5);
  }

  // a kernel wider than the input must refuse rather than read out of bounds
  CHECK_THROWS_AS(depthwise_conv2d(Tensor<double>(Shape{1, 4, 2, 1}, 0.0),
                                   Tensor<double>(Shape{3, 3, 1, 1}, 1.0), {}, 2, Padding::valid),
                  SpecError);
}

TEST_CASE("separable conv identities and composition oracle") {
  // pointwise identity + depthwise 1x1 unit weights = identity
  Rng rng(31);
  const int c = 3;
  Tensor<double> x = random_tensor(Shape{1, 5, 5, c}, rng);
  Tensor<double> pw(Shape{1, 1, c, c}, 0.0);
  for (int i = 0; i < c; ++i) pw.at(0, 0, i, i) = 1.0;
  Tensor<double> dw1(Shape{1, 1, c, 1}, 1.0);
  ConvSpec spec1{1, 1, c, c, 1, Padding::valid};
  Tensor<double> y = depthwise_separable_conv(x, pw, dw1, SeparableOrder::pointwise_first, spec1);
  CHECK(max_rel_diff(x, y) == 0.0);

  // all-ones 3x3 depthwise on constant input -> 9c everywhere
  const double cval = 0.37;
  Tensor<double> xc(Shape{1, 6, 6, c}, cval);
  Tensor<double> dw3(Shape{3, 3, c, 1}, 1.0);
  ConvSpec spec3{3, 3, c, c, 1, Padding::valid};
  Tensor<double> yc = depthwise_separable_conv(xc, pw, dw3, SeparableOrder::pointwise_first, spec3);
  bool all9c = true;
  for (int64_t i = 0; i < yc.size(); ++i) all9c = all9c && std::abs(yc[i] - 9 * cval) < 1e-12;
  CHECK(yc.dim(1) == 4);
  CHECK(all9c);

  // both orders equal explicit composition of the standalone convolutions
  for (int trial = 0; trial < 100; ++trial) {
    const int cin = 1 + static_cast<int>(rng.uniform_int(3));
    const int cm = 1 + static_cast<int>(rng.uniform_int(4));
    const int h = 3 + static_cast<int>(rng.uniform_int(6));
    const int kh = 1 + static_cast<int>(rng.uniform_int(3));
    const int stride = 1 + static_cast<int>(rng.uniform_int(2));
    const Padding pad = rng.bernoulli(0.5) ? Padding::same : Padding::valid;
    Tensor<double> in = random_tensor(Shape{1, h, h, cin}, rng);
    Tensor<double> point = random_tensor(Shape{1, 1, cin, cm}, rng);
    Tensor<double> depth = random_tensor(Shape{kh, kh, cm, 1}, rng);
    ConvSpec spec{kh, kh, cin, cm, stride, pad};

    Tensor<double> got = depthwise_separable_conv(in, point, depth, SeparableOrder::pointwise_first, spec);
    ConvSpec pw_spec{1, 1, cin, cm, 1, Padding::same};
    Tensor<double> mid = conv2d(in, point, {}, pw_spec);
    Tensor<double> want = depthwise_conv2d(mid, depth, {}, stride, pad);
    CHECK(max_rel_diff(got, want) < 1e-5);

    if (cm == cin) {  // depthwise_first keeps the channel count through the depthwise stage
      Tensor<double> got2 = depthwise_separable_conv(in, point, depth, SeparableOrder::depthwise_first, spec);
      Tensor<double> mid2 = depthwise_conv2d(in, depth, {}, stride, pad);
      Tensor<double> want2 = conv2d(mid2, point, {}, pw_spec);
      CHECK(max_rel_diff(got2, want2) < 1e-5);
    }
  }

  // channel-chain mismatch
  Tensor<double> bad_pw(Shape{1, 1, c + 1, c}, 1.0);
  CHECK_THROWS_AS(depthwise_separable_conv(x, bad_pw, dw1, SeparableOrder::pointwise_first, spec1),
                  ShapeError);
}

TEST_CASE("max pool hand examples and window properties") {
  Tensor<double> x = Tensor<double>::from_vector(Shape{1, 2, 2, 1}, {1, 2, 3, 4});
  Tensor<double> y = max_pool2d(x, 2, 2);
  CHECK(y.size() == 1);
  CHECK(y[0] == 4.0);

  Tensor<double> c(Shape{1, 6, 6, 2}, 3.25);
  Tensor<double> yc = max_pool2d(c, 2, 2);
  bool all_const = true;
  for (int64_t i = 0; i < yc.size(); ++i) all_const = all_const && yc[i] == 3.25;
  CHECK(all_const);

  // output bounded by input max; equals per-window max (checked vs naive)
  Rng rng(9);
  Tensor<double> r = random_tensor(Shape{2, 7, 7, 3}, rng);
  Tensor<double> pooled = max_pool2d(r, 3, 2);
  double in_max = -1e9;
  for (int64_t i = 0; i < r.size(); ++i) in_max = std::max(in_max, r[i]);
  for (int64_t i = 0; i < pooled.size(); ++i) CHECK(pooled[i] <= in_max);

  CHECK_THROWS_AS(max_pool2d(x, 3, 1), SpecError);
}

TEST_CASE("max pool argmax uses first occurrence and flat y*W+x index") {
  Tensor<double> x = Tensor<double>::from_vector(Shape{1, 2, 2, 1}, {5, 5, 5, 5});
  Tensor<int> arg;
  max_pool2d(x, 2, 2, Padding::valid, &arg);
  CHECK(arg.size() == 1);
  CHECK(arg[0] == 0);  // ties -> first in row-major window order

  Tensor<double> x2 = Tensor<double>::from_vector(Shape{1, 2, 2, 1}, {1, 2, 9, 4});
  max_pool2d(x2, 2, 2, Padding::valid, &arg);
  CHECK(arg[0] == 1 * 2 + 0);  // input row 1, col 0
}

TEST_CASE("max pool same padding clips windows to valid pixels") {
  // 3x3 input, size 3 stride 2 same -> 2x2 output; padded cells must not win.
  Tensor<double> x = Tensor<double>::from_vector(Shape{1, 3, 3, 1}, {-5, -6, -7, -8, -9, -1, -2, -3, -4});
  Tensor<double> y = max_pool2d(x, 3, 2, Padding::same);
  CHECK(y.dim(1) == 2);
  CHECK(y.dim(2) == 2);
  CHECK(y.at(0, 0, 0, 0) == -5.0);  // window rows 0-1, cols 0-1 after clipping
  CHECK(y.at(0, 1, 1, 0) == -1.0);  // window rows 1-2, cols 1-2 (clipped)
}

TEST_CASE("vanilla-cnn shape chain: conv/pool pairs end at 7x7") {
  int d = 150;
  for (int stage = 0; stage < 4; ++stage) {
    d = conv_out_dim(d, 3, 1, Padding::valid);
    d = conv_out_dim(d, 2, 2, Padding::valid);  // pool uses the same formula
  }
  CHECK(d == 7);
}

TEST_CASE("dense examples and matmul oracle") {
  // identity weights
  Tensor<double> x = Tensor<double>::from_vector(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> id(Shape{3, 3}, 0.0);
  for (int i = 0; i < 3; ++i) id.at(i, i) = 1.0;
  Tensor<double> y = dense(x, id, std::vector<double>(3, 0.0));
  CHECK(max_rel_diff(x, y) == 0.0);

  // zero weights, bias-only
  Tensor<double> zero(Shape{3, 4}, 0.0);
  std::vector<double> bias{1.5, -2.0, 0.25, 9.0};
  Tensor<double> yb = dense(x, zero, bias);
  for (int n = 0; n < 2; ++n)
    for (int m = 0; m < 4; ++m) CHECK(yb.at(n, m) == bias[static_cast<size_t>(m)]);

  // random 4x6 by 6x3 against a triple loop
  Rng rng(11);
  Tensor<double> a = random_tensor(Shape{4, 6}, rng);
  Tensor<double> w = random_tensor(Shape{6, 3}, rng);
  std::vector<double> b{0.1, 0.2, 0.3};
  Tensor<double> got = dense(a, w, b);
  Tensor<double> want(Shape{4, 3}, 0.0);
  for (int n = 0; n < 4; ++n)
    for (int m = 0; m < 3; ++m) {
      double acc = b[static_cast<size_t>(m)];
      for (int d2 = 0; d2 < 6; ++d2) acc += a.at(n, d2) * w.at(d2, m);
      want.at(n, m) = acc;
    }
  CHECK(max_rel_diff(got, want) < 1e-6);

  CHECK_THROWS_AS(dense(a, id, std::vector<double>(3, 0.0)), ShapeError);
}

TEST_CASE("activation definitions") {
  Tensor<double> r = Tensor<double>::from_vector(Shape{1, 3}, {-1, 0, 2});
  Tensor<double> yr = activation(r, ActKind::relu);
  CHECK(yr.at(0, 0) == 0.0);
  CHECK(yr.at(0, 1) == 0.0);
  CHECK(yr.at(0, 2) == 2.0);

  Tensor<double> r6 = Tensor<double>::from_vector(Shape{1, 3}, {7, 3, -1});
  Tensor<double> y6 = activation(r6, ActKind::relu6);
  CHECK(y6.at(0, 0) == 6.0);
  CHECK(y6.at(0, 1) == 3.0);
  CHECK(y6.at(0, 2) == 0.0);

  Tensor<double> z(Shape{1, 4}, 0.0);
  Tensor<double> sz = activation(z, ActKind::softmax);
  for (int i = 0; i < 4; ++i) CHECK(sz.at(0, i) == doctest::Approx(0.25));
}

TEST_CASE("softmax rows sum to 1 and are shift-invariant") {
  Rng rng(13);
  Tensor<double> x = random_tensor(Shape{5, 7}, rng, -30.0, 30.0);
  Tensor<double> s = activation(x, ActKind::softmax);
  Tensor<double> shifted = x;
  for (int n = 0; n < 5; ++n)
    for (int j = 0; j < 7; ++j) shifted.at(n, j) += 123.0;
  Tensor<double> s2 = activation(shifted, ActKind::softmax);
  for (int n = 0; n < 5; ++n) {
    double row = 0.0;
    for (int j = 0; j < 7; ++j) {
      row += s.at(n, j);
      CHECK(std::abs(s.at(n, j) - s2.at(n, j)) < 1e-6);
      CHECK(s.at(n, j) > 0.0);
    }
    CHECK(std::abs(row - 1.0) < 1e-6);
  }
  // numerically stable on extreme logits
  Tensor<double> big = Tensor<double>::from_vector(Shape{1, 2}, {1000.0, -1000.0});
  Tensor<double> sb = activation(big, ActKind::softmax);
  CHECK(all_finite(sb));
  CHECK(sb.at(0, 0) == doctest::Approx(1.0));
}
