#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <string>

#include "octnet/network.hpp"

namespace octnet {

enum class ArchId { vanilla_cnn, xception, resnet50, mobilenetv2 };

inline const char* arch_name(ArchId id) {
  switch (id) {
    case ArchId::vanilla_cnn: return "vanilla_cnn";
    case ArchId::xception: return "xception";
    case ArchId::resnet50: return "resnet50";
    default: return "mobilenetv2";
  }
}

inline std::vector<std::string> arch_names() {
  return {"vanilla_cnn", "xception", "resnet50", "mobilenetv2"};
}

inline ArchId arch_from_string(const std::string& s) {
  if (s == "vanilla_cnn") return ArchId::vanilla_cnn;
  if (s == "xception") return ArchId::xception;
  if (s == "resnet50") return ArchId::resnet50;
  if (s == "mobilenetv2") return ArchId::mobilenetv2;
  throw ParamError("unknown architecture '" + s + "' (expected vanilla_cnn|xception|resnet50|mobilenetv2)");
}

constexpr int kInputHW = 150;
constexpr int kInputChannels = 3;
constexpr int kNumClasses = 4;

inline Shape model_input_shape() { return Shape{kInputHW, kInputHW, kInputChannels}; }

namespace detail {

inline int div_ch(int channels, int width_div) { return std::max(1, channels / width_div); }

inline void check_width(int width_div) {
  if (width_div < 1) throw ParamError("width divisor must be >= 1, got " + std::to_string(width_div));
}

template <typename T>
LayerPtr<T> conv(int filters, int k, int stride, Padding pad, bool bias, std::string label) {
  auto l = std::make_unique<ConvLayer<T>>(filters, k, k, stride, pad, bias);
  l->set_label(std::move(label));
  return l;
}

template <typename T>
LayerPtr<T> dwconv(int k, int stride, Padding pad, std::string label) {
  auto l = std::make_unique<DepthwiseConvLayer<T>>(k, k, stride, pad, false);
  l->set_label(std::move(label));
  return l;
}

template <typename T>
LayerPtr<T> sepconv(int filters, int k, int stride, Padding pad, SeparableOrder order, std::string label) {
  auto l = std::make_unique<SeparableConvLayer<T>>(filters, k, k, stride, pad, order, false);
  l->set_label(std::move(label));
  return l;
}

template <typename T>
LayerPtr<T> bn(std::string label) {
  auto l = std::make_unique<BatchNormLayer<T>>();
  l->set_label(std::move(label));
  return l;
}

template <typename T>
LayerPtr<T> act(ActKind kind, std::string label) {
  auto l = std::make_unique<ActivationLayer<T>>(kind);
  l->set_label(std::move(label));
  return l;
}

template <typename T>
LayerPtr<T> pool(int size, int stride, Padding pad, std::string label) {
  auto l = std::make_unique<MaxPoolLayer<T>>(size, stride, pad);
  l->set_label(std::move(label));
  return l;
}

template <typename T>
LayerPtr<T> dense_l(int units, std::string label) {
  auto l = std::make_unique<DenseLayer<T>>(units);
  l->set_label(std::move(label));
  return l;
}

template <typename T>
LayerPtr<T> dropout_l(double p, std::string label) {
  auto l = std::make_unique<DropoutLayer<T>>(p);
  l->set_label(std::move(label));
  return l;
}

// Flatten -> Dense(units, relu) -> Dropout(p) -> Dense(4, softmax)
template <typename T>
void add_head(Network<T>& net, int dense_units, double dropout_p) {
  net.add(std::make_unique<FlattenLayer<T>>());
  net.layer(net.num_layers() - 1).set_label("head.flatten");
  net.add(dense_l<T>(dense_units, "head.dense"));
  net.add(act<T>(ActKind::relu, "head.relu"));
  net.add(dropout_l<T>(dropout_p, "head.dropout"));
  net.add(dense_l<T>(kNumClasses, "head.logits"));
  net.add(act<T>(ActKind::softmax, "head.softmax"));
}

}  // namespace detail

// Plain four-stage CNN: Conv64/Pool ×2, Conv128/Pool ×2, Dropout(0.5),
// Dense(512), Dense(4, softmax); valid padding throughout.
template <typename T>
Network<T> build_vanilla_cnn(int width_div = 1) {
  using namespace detail;
  check_width(width_div);
  Network<T> net("vanilla_cnn");
  const int c1 = div_ch(64, width_div), c2 = div_ch(128, width_div);
  net.add(conv<T>(c1, 3, 1, Padding::valid, true, "conv1"));
  net.add(act<T>(ActKind::relu, "conv1.relu"));
  net.add(pool<T>(2, 2, Padding::valid, "pool1"));
  net.add(conv<T>(c1, 3, 1, Padding::valid, true, "conv2"));
  net.add(act<T>(ActKind::relu, "conv2.relu"));
  net.add(pool<T>(2, 2, Padding::valid, "pool2"));
  net.add(conv<T>(c2, 3, 1, Padding::valid, true, "conv3"));
  net.add(act<T>(ActKind::relu, "conv3.relu"));
  net.add(pool<T>(2, 2, Padding::valid, "pool3"));
  net.add(conv<T>(c2, 3, 1, Padding::valid, true, "conv4"));
  net.add(act<T>(ActKind::relu, "conv4.relu"));
  net.add(pool<T>(2, 2, Padding::valid, "pool4"));
  net.add(std::make_unique<FlattenLayer<T>>());
  net.layer(net.num_layers() - 1).set_label("flatten");
  net.add(dropout_l<T>(0.5, "dropout"));
  net.add(dense_l<T>(div_ch(512, width_div), "dense"));
  net.add(act<T>(ActKind::relu, "dense.relu"));
  net.add(dense_l<T>(kNumClasses, "logits"));
  net.add(act<T>(ActKind::softmax, "softmax"));
  net.finalize(model_input_shape());
  return net;
}

// Separable-convolution backbone: entry flow (two plain convs + three
// downsampling residual modules), eight middle-flow residual modules, exit
// flow, then the custom Flatten/Dense(1024)/Dropout(0.2)/Dense(4) head.
template <typename T>
Network<T> build_xception(int width_div = 1, SeparableOrder order = SeparableOrder::pointwise_first) {
  using namespace detail;
  check_width(width_div);
  Network<T> net("xception");
  auto C = [&](int c) { return div_ch(c, width_div); };

  net.add(conv<T>(C(32), 3, 2, Padding::valid, false, "stem.conv1"));
  net.add(bn<T>("stem.conv1_bn"));
  net.add(act<T>(ActKind::relu, "stem.conv1_relu"));
  net.add(conv<T>(C(64), 3, 1, Padding::valid, false, "stem.conv2"));
  net.add(bn<T>("stem.conv2_bn"));
  net.add(act<T>(ActKind::relu, "stem.conv2_relu"));

  auto entry_block = [&](int filters, bool leading_relu, const std::string& name) {
    auto main = std::make_unique<ChainLayer<T>>();
    if (leading_relu) main->add(act<T>(ActKind::relu, name + ".relu0"));
    main->add(sepconv<T>(filters, 3, 1, Padding::same, order, name + ".sepconv1"));
    main->add(bn<T>(name + ".sepconv1_bn"));
    main->add(act<T>(ActKind::relu, name + ".relu1"));
    main->add(sepconv<T>(filters, 3, 1, Padding::same, order, name + ".sepconv2"));
    main->add(bn<T>(name + ".sepconv2_bn"));
    main->add(pool<T>(3, 2, Padding::same, name + ".pool"));
    auto shortcut = std::make_unique<ChainLayer<T>>();
    shortcut->add(conv<T>(filters, 1, 2, Padding::same, false, name + ".proj"));
    shortcut->add(bn<T>(name + ".proj_bn"));
    auto block = std::make_unique<ResidualLayer<T>>(std::move(main), std::move(shortcut));
    block->set_label(name);
    net.add(std::move(block));
  };
  entry_block(C(128), false, "entry_block1");
  entry_block(C(256), true, "entry_block2");
  entry_block(C(728), true, "entry_block3");

  for (int b = 1; b <= 8; ++b) {
    std::string name = "middle_block" + std::to_string(b);
    auto main = std::make_unique<ChainLayer<T>>();
    for (int j = 1; j <= 3; ++j) {
      main->add(act<T>(ActKind::relu, name + ".relu" + std::to_string(j)));
      main->add(sepconv<T>(C(728), 3, 1, Padding::same, order, name + ".sepconv" + std::to_string(j)));
      main->add(bn<T>(name + ".sepconv" + std::to_string(j) + "_bn"));
    }
    auto block = std::make_unique<ResidualLayer<T>>(std::move(main), nullptr);
    block->set_label(name);
    net.add(std::move(block));
  }

  {
    auto main = std::make_unique<ChainLayer<T>>();
    main->add(act<T>(ActKind::relu, "exit_block.relu1"));
    main->add(sepconv<T>(C(728), 3, 1, Padding::same, order, "exit_block.sepconv1"));
    main->add(bn<T>("exit_block.sepconv1_bn"));
    main->add(act<T>(ActKind::relu, "exit_block.relu2"));
    main->add(sepconv<T>(C(1024), 3, 1, Padding::same, order, "exit_block.sepconv2"));
    main->add(bn<T>("exit_block.sepconv2_bn"));
    main->add(pool<T>(3, 2, Padding::same, "exit_block.pool"));
    auto shortcut = std::make_unique<ChainLayer<T>>();
    shortcut->add(conv<T>(C(1024), 1, 2, Padding::same, false, "exit_block.proj"));
    shortcut->add(bn<T>("exit_block.proj_bn"));
    auto block = std::make_unique<ResidualLayer<T>>(std::move(main), std::move(shortcut));
    block->set_label("exit_block");
    net.add(std::move(block));
  }

  net.add(sepconv<T>(C(1536), 3, 1, Padding::same, order, "exit.sepconv1"));
  net.add(bn<T>("exit.sepconv1_bn"));
  net.add(act<T>(ActKind::relu, "exit.relu1"));
  net.add(sepconv<T>(C(2048), 3, 1, Padding::same, order, "exit.sepconv2"));
  net.add(bn<T>("exit.sepconv2_bn"));
  net.add(act<T>(ActKind::relu, "exit.relu2"));

  add_head(net, div_ch(1024, width_div), 0.2);
  net.finalize(model_input_shape());
  return net;
}

// 50-layer residual network: 7x7 stem, 3x3 max pool, bottleneck stages of
// (3,4,6,3) blocks with projection shortcuts on dimension change, custom head.
template <typename T>
Network<T> build_resnet50(int width_div = 1) {
  using namespace detail;
  check_width(width_div);
  Network<T> net("resnet50");
  auto C = [&](int c) { return div_ch(c, width_div); };

  net.add(conv<T>(C(64), 7, 2, Padding::same, false, "stem.conv"));
  net.add(bn<T>("stem.bn"));
  net.add(act<T>(ActKind::relu, "stem.relu"));
  net.add(pool<T>(3, 2, Padding::same, "stem.pool"));

  int in_ch = C(64);
  auto bottleneck = [&](int mid, int out, int stride, const std::string& name) {
    bool project = stride != 1 || in_ch != out;
    auto main = std::make_unique<ChainLayer<T>>();
    main->add(conv<T>(mid, 1, stride, Padding::same, false, name + ".conv1"));
    main->add(bn<T>(name + ".bn1"));
    main->add(act<T>(ActKind::relu, name + ".relu1"));
    main->add(conv<T>(mid, 3, 1, Padding::same, false, name + ".conv2"));
    main->add(bn<T>(name + ".bn2"));
    main->add(act<T>(ActKind::relu, name + ".relu2"));
    main->add(conv<T>(out, 1, 1, Padding::same, false, name + ".conv3"));
    main->add(bn<T>(name + ".bn3"));
    std::unique_ptr<ChainLayer<T>> shortcut;
    if (project) {
      shortcut = std::make_unique<ChainLayer<T>>();
      shortcut->add(conv<T>(out, 1, stride, Padding::same, false, name + ".proj"));
      shortcut->add(bn<T>(name + ".proj_bn"));
    }
    auto block = std::make_unique<ResidualLayer<T>>(std::move(main), std::move(shortcut));
    block->set_label(name);
    net.add(std::move(block));
    net.add(act<T>(ActKind::relu, name + ".out_relu"));
    in_ch = out;
  };
  auto stage = [&](int mid, int out, int blocks, int first_stride, const std::string& name) {
    for (int b = 1; b <= blocks; ++b) {
      bottleneck(mid, out, b == 1 ? first_stride : 1, name + "_" + std::to_string(b));
    }
  };
  stage(C(64), C(256), 3, 1, "conv2");
  stage(C(128), C(512), 4, 2, "conv3");
  stage(C(256), C(1024), 6, 2, "conv4");
  stage(C(512), C(2048), 3, 2, "conv5");

  add_head(net, div_ch(1024, width_div), 0.2);
  net.finalize(model_input_shape());
  return net;
}

// Inverted-residual backbone: 32-filter stem, 17 bottleneck blocks
// (expansion 1x1 + ReLU6, depthwise 3x3 + ReLU6, linear 1x1 projection;
// shortcut when stride 1 and channels match), 1x1 conv to 1280, custom head.
template <typename T>
Network<T> build_mobilenetv2(int width_div = 1) {
  using namespace detail;
  check_width(width_div);
  Network<T> net("mobilenetv2");
  auto C = [&](int c) { return div_ch(c, width_div); };

  net.add(conv<T>(C(32), 3, 2, Padding::same, false, "stem.conv"));
  net.add(bn<T>("stem.bn"));
  net.add(act<T>(ActKind::relu6, "stem.relu6"));

  int in_ch = C(32);
  int block_idx = 0;
  auto block_layers = [&](int expansion, int out, int stride, const std::string& name,
                          auto&& sink) {
    const int exp_ch = expansion * in_ch;
    sink(conv<T>(exp_ch, 1, 1, Padding::same, false, name + ".expand"));
    sink(bn<T>(name + ".expand_bn"));
    sink(act<T>(ActKind::relu6, name + ".expand_relu6"));
    sink(dwconv<T>(3, stride, Padding::same, name + ".depthwise"));
    sink(bn<T>(name + ".depthwise_bn"));
    sink(act<T>(ActKind::relu6, name + ".depthwise_relu6"));
    sink(conv<T>(out, 1, 1, Padding::same, false, name + ".project"));
    sink(bn<T>(name + ".project_bn"));
  };
  auto bottleneck = [&](int expansion, int out, int stride) {
    ++block_idx;
    std::string name = "block" + std::to_string(block_idx);
    if (stride == 1 && in_ch == out) {
      auto main = std::make_unique<ChainLayer<T>>();
      block_layers(expansion, out, stride, name, [&](LayerPtr<T> l) { main->add(std::move(l)); });
      auto block = std::make_unique<ResidualLayer<T>>(std::move(main), nullptr);
      block->set_label(name);
      net.add(std::move(block));
    } else {
      block_layers(expansion, out, stride, name, [&](LayerPtr<T> l) { net.add(std::move(l)); });
    }
    in_ch = out;
  };
  auto series = [&](int expansion, int out, int count, int first_stride) {
    for (int b = 0; b < count; ++b) bottleneck(expansion, out, b == 0 ? first_stride : 1);
  };
  series(1, C(16), 1, 1);
  series(6, C(24), 2, 2);
  series(6, C(32), 3, 2);
  series(6, C(64), 4, 2);
  series(6, C(96), 3, 1);
  series(6, C(160), 3, 2);
  series(6, C(320), 1, 1);

  net.add(conv<T>(C(1280), 1, 1, Padding::same, false, "last.conv"));
  net.add(bn<T>("last.bn"));
  net.add(act<T>(ActKind::relu6, "last.relu6"));

  add_head(net, div_ch(1024, width_div), 0.2);
  net.finalize(model_input_shape());
  return net;
}

template <typename T>
Network<T> build_network(ArchId id, int width_div = 1,
                         SeparableOrder order = SeparableOrder::pointwise_first) {
  switch (id) {
    case ArchId::vanilla_cnn: return build_vanilla_cnn<T>(width_div);
    case ArchId::xception: return build_xception<T>(width_div, order);
    case ArchId::resnet50: return build_resnet50<T>(width_div);
    default: return build_mobilenetv2<T>(width_div);
  }
}

// Depth-first visit of every layer, descending into residual branches and
// chains. `path` is "<net index>/<branch>/..." for nested layers.
template <typename T>
void walk_layers(const Network<T>& net, const std::function<void(const Layer<T>&, const std::string&)>& fn) {
  std::function<void(const Layer<T>&, const std::string&)> visit = [&](const Layer<T>& l,
                                                                       const std::string& path) {
    fn(l, path);
    if (const auto* res = dynamic_cast<const ResidualLayer<T>*>(&l)) {
      visit(res->main_chain(), path + "/main");
      visit(res->shortcut_chain(), path + "/shortcut");
    } else if (const auto* chain = dynamic_cast<const ChainLayer<T>*>(&l)) {
      for (size_t i = 0; i < chain->layers().size(); ++i) {
        visit(*chain->layers()[i], path + "/" + std::to_string(i));
      }
    }
  };
  for (size_t i = 0; i < net.num_layers(); ++i) visit(net.layer(i), std::to_string(i));
}

}  // namespace octnet
