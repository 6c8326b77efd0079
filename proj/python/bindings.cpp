// Python module: numpy-facing wrappers over the tensor kernels, the four
// backbone builders, checkpoint loading, dataset scanning, and the bundled
// metric tables. JSON-shaped results cross as dump strings; the package
// wrapper turns them back into dicts.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "octnet/checkpoint.hpp"
#include "octnet/dataset.hpp"
#include "octnet/image.hpp"
#include "octnet/kernels.hpp"
#include "octnet/metrics.hpp"
#include "octnet/models.hpp"
#include "octnet/reference_tables.hpp"

namespace py = pybind11;
using namespace octnet;

namespace {

template <typename T>
using CArray = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
Tensor<T> tensor_from_array(const CArray<T>& arr) {
  Shape shape;
  for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape.push_back(static_cast<int>(arr.shape(i)));
  Tensor<T> t(shape);
  std::memcpy(t.data(), arr.data(), sizeof(T) * static_cast<size_t>(t.size()));
  return t;
}

template <typename T>
py::array_t<T> array_from_tensor(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> arr(shape);
  std::memcpy(arr.mutable_data(), t.data(), sizeof(T) * static_cast<size_t>(t.size()));
  return arr;
}

Padding parse_padding(const std::string& s) {
  if (s == "valid") return Padding::valid;
  if (s == "same") return Padding::same;
  throw ParamError("padding must be 'valid' or 'same', got '" + s + "'");
}

SeparableOrder parse_order(const std::string& s) {
  if (s == "pointwise_first") return SeparableOrder::pointwise_first;
  if (s == "depthwise_first") return SeparableOrder::depthwise_first;
  throw ParamError("order must be 'pointwise_first' or 'depthwise_first', got '" + s + "'");
}

std::vector<double> bias_from(const std::optional<CArray<double>>& bias) {
  std::vector<double> out;
  if (bias) {
    if (bias->ndim() != 1) throw ShapeError("bias must be one-dimensional");
    out.assign(bias->data(), bias->data() + bias->shape(0));
  }
  return out;
}

// Inference-oriented handle on a built network.
class Model {
 public:
  Model(const std::string& arch, int width_div, uint64_t seed)
      : arch_(arch), width_div_(width_div), net_(build_network<float>(arch_from_string(arch), width_div)) {
    net_.init_params(seed);
  }

  static Model from_checkpoint(const std::string& path) {
    LoadedCheckpoint loaded = load_checkpoint(path);
    return Model(std::move(loaded.net), loaded.info.arch, loaded.info.width_div);
  }

  py::tuple predict(const CArray<float>& x) {
    Tensor<float> batch = tensor_from_array<float>(x);
    if (batch.rank() == 3) {
      Shape s = batch.shape();
      s.insert(s.begin(), 1);
      batch = batch.reshaped(s);
    }
    auto [probs, labels] = net_.predict(batch);
    return py::make_tuple(array_from_tensor(probs), py::cast(labels));
  }

  void save(const std::string& path) {
    save_checkpoint(net_, arch_from_string(arch_), width_div_, nlohmann::json::object(), 0, path);
  }

  const std::string& arch() const { return arch_; }
  int width_div() const { return width_div_; }
  int64_t param_count() { return net_.param_count(); }
  Shape input_shape() const { return net_.input_shape(); }
  std::string report_text() const { return net_.report().to_text(); }
  std::string report_json() const { return net_.report().to_json().dump(); }

 private:
  Model(Network<float>&& net, std::string arch, int width_div)
      : arch_(std::move(arch)), width_div_(width_div), net_(std::move(net)) {}

  std::string arch_;
  int width_div_ = 1;
  Network<float> net_;
};

}  // namespace

PYBIND11_MODULE(_octnet, m) {
  m.doc() = "CNN training/evaluation core: tensor kernels, backbone builders, "
            "dataset tools, and bundled reference metrics";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "OctnetError", PyExc_RuntimeError);

  m.def("arch_names", &arch_names, "Names of the four buildable backbones.");

  m.def(
      "conv2d",
      [](const CArray<double>& x, const CArray<double>& kernels,
         const std::optional<CArray<double>>& bias, int stride, const std::string& padding) {
        Tensor<double> xt = tensor_from_array<double>(x);
        Tensor<double> kt = tensor_from_array<double>(kernels);
        if (kt.rank() != 4) throw ShapeError("kernels must be [kh, kw, cin, cout]");
        ConvSpec spec{kt.dim(0), kt.dim(1), kt.dim(2), kt.dim(3), stride, parse_padding(padding)};
        return array_from_tensor(conv2d(xt, kt, bias_from(bias), spec));
      },
      py::arg("x"), py::arg("kernels"), py::arg("bias") = py::none(), py::arg("stride") = 1,
      py::arg("padding") = "valid",
      "Cross-correlate an NHWC batch with [kh, kw, cin, cout] kernels.");

  m.def(
      "max_pool2d",
      [](const CArray<double>& x, int size, int stride, const std::string& padding) {
        Tensor<double> xt = tensor_from_array<double>(x);
        return array_from_tensor(max_pool2d(xt, size, stride, parse_padding(padding)));
      },
      py::arg("x"), py::arg("size"), py::arg("stride"), py::arg("padding") = "valid",
      "Channelwise max pooling over an NHWC batch.");

  m.def(
      "separable_conv2d",
      [](const CArray<double>& x, const CArray<double>& pointwise, const CArray<double>& depthwise,
         const std::string& order, int stride, const std::string& padding) {
        Tensor<double> xt = tensor_from_array<double>(x);
        Tensor<double> pw = tensor_from_array<double>(pointwise);
        Tensor<double> dw = tensor_from_array<double>(depthwise);
        if (pw.rank() != 4 || dw.rank() != 4) {
          throw ShapeError("pointwise and depthwise kernels must be rank 4");
        }
        ConvSpec spec{dw.dim(0), dw.dim(1), pw.dim(2), pw.dim(3), stride, parse_padding(padding)};
        return array_from_tensor(depthwise_separable_conv(xt, pw, dw, parse_order(order), spec));
      },
      py::arg("x"), py::arg("pointwise"), py::arg("depthwise"), py::arg("order") = "pointwise_first",
      py::arg("stride") = 1, py::arg("padding") = "same",
      "Factorized convolution: 1x1 cross-channel map and per-channel spatial map in either order.");

  m.def(
      "load_image",
      [](const std::string& path, int target_hw) {
        return array_from_tensor(load_image(path, target_hw, target_hw));
      },
      py::arg("path"), py::arg("target_hw") = 150,
      "Decode a PNG/JPEG to a [H, W, 3] float array in [0, 1], resized to target_hw.");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&, int, uint64_t>(), py::arg("arch"), py::arg("width_div") = 1,
           py::arg("seed") = 0)
      .def_static("from_checkpoint", &Model::from_checkpoint, py::arg("path"))
      .def("predict", &Model::predict, py::arg("x"),
           "Returns (probabilities [N, 4], argmax labels) for an NHWC or HWC float array.")
      .def("save", &Model::save, py::arg("path"), "Write the parameters as a checkpoint file.")
      .def_property_readonly("arch", &Model::arch)
      .def_property_readonly("width_div", &Model::width_div)
      .def_property_readonly("param_count", &Model::param_count)
      .def_property_readonly("input_shape", &Model::input_shape)
      .def("report_text", &Model::report_text)
      .def("report_json", &Model::report_json);

  m.def(
      "peek_checkpoint_json",
      [](const std::string& path) {
        CheckpointInfo info = peek_checkpoint(path);
        nlohmann::json params = nlohmann::json::array();
        for (const auto& [name, shape] : info.params) params.push_back({{"name", name}, {"shape", shape}});
        nlohmann::json j{{"version", info.version},     {"arch", info.arch},
                         {"width_div", info.width_div}, {"input_shape", info.input_shape},
                         {"params", params},            {"config", info.config},
                         {"rng_state", info.rng_state}, {"payload_bytes", info.payload_bytes()}};
        return j.dump();
      },
      py::arg("path"), "Checkpoint header (no payload) as a JSON string.");

  m.def(
      "scan_dataset_json",
      [](const std::string& root) { return scan_dataset(root).to_json().dump(); }, py::arg("root"),
      "Scan a train/val/test directory tree; manifest as a JSON string.");

  m.def(
      "generate_fixture_json",
      [](const std::string& out_dir, int images_per_class, int image_size, uint64_t seed) {
        FixtureSpec spec;
        spec.images_per_class = images_per_class;
        spec.image_size = image_size;
        spec.seed = seed;
        return generate_synthetic_fixture(spec, out_dir).to_json().dump();
      },
      py::arg("out_dir"), py::arg("images_per_class") = 32, py::arg("image_size") = 150,
      py::arg("seed") = 1,
      "Write a deterministic synthetic image tree; resulting manifest as a JSON string.");

  m.def(
      "metrics_report_json",
      [](const std::vector<int>& y_true, const std::vector<int>& y_pred, int num_classes,
         std::vector<std::string> class_names) {
        ConfusionMatrix cm =
            ConfusionMatrix::from_predictions(y_true, y_pred, num_classes, std::move(class_names));
        return report_to_json(cm).dump();
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("num_classes"),
      py::arg("class_names") = std::vector<std::string>{},
      "Confusion matrix, per-class and aggregate metrics as a JSON string.");

  m.def(
      "reproduce_metrics_json",
      [](const std::optional<std::string>& tables_path, double tolerance) {
        ReferenceTables tables =
            tables_path ? load_reference_tables_file(*tables_path) : load_reference_tables();
        return reproduce_reference_metrics(tables, tolerance).to_json().dump();
      },
      py::arg("tables_path") = py::none(), py::arg("tolerance") = 0.005,
      "Recompute accuracies from the bundled confusion matrices; report as a JSON string.");

  m.def(
      "class_names", [] { return oct_class_names(); },
      "Class order used by the bundled datasets and models.");
}
