#include "octnet/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "octnet/checkpoint.hpp"
#include "octnet/dataset.hpp"
#include "octnet/image.hpp"
#include "octnet/models.hpp"
#include "octnet/reference_tables.hpp"
#include "octnet/stream.hpp"
#include "octnet/train.hpp"

namespace octnet {
namespace {

namespace fs = std::filesystem;

// Argument problems detected after CLI11 parsing (missing required values,
// invalid names, bad config keys). Mapped to exit code 1, like parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainArgs {
  std::string arch, data, out = ".", checkpoint, curves, config_path;
  int epochs = 15, batch_size = 32, width_div = 1, prefetch = 2;
  double lr = 1e-3;
  std::string optimizer = "adam";
  std::optional<uint64_t> seed;
  bool force = false, augment = true;
};

// Flags override config-file values, which override defaults: a config value
// is applied only when its flag was not passed on the command line.
void merge_train_config(const CLI::App& cmd, TrainArgs& args) {
  if (args.config_path.empty()) return;
  std::ifstream in(args.config_path);
  if (!in) throw UsageError("cannot open config file '" + args.config_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw UsageError("cannot parse config file '" + args.config_path + "': " + ex.what());
  }
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");

  auto unset = [&](const char* flag) { return cmd.get_option(flag)->count() == 0; };
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "arch") {
        if (unset("--arch")) args.arch = value.get<std::string>();
      } else if (key == "data") {
        if (unset("--data")) args.data = value.get<std::string>();
      } else if (key == "out") {
        if (unset("--out")) args.out = value.get<std::string>();
      } else if (key == "checkpoint") {
        if (unset("--checkpoint")) args.checkpoint = value.get<std::string>();
      } else if (key == "curves") {
        if (unset("--curves")) args.curves = value.get<std::string>();
      } else if (key == "epochs") {
        if (unset("--epochs")) args.epochs = value.get<int>();
      } else if (key == "batch_size") {
        if (unset("--batch-size")) args.batch_size = value.get<int>();
      } else if (key == "width_div") {
        if (unset("--width-div")) args.width_div = value.get<int>();
      } else if (key == "prefetch") {
        if (unset("--prefetch")) args.prefetch = value.get<int>();
      } else if (key == "lr") {
        if (unset("--lr")) args.lr = value.get<double>();
      } else if (key == "optimizer") {
        if (unset("--optimizer")) args.optimizer = value.get<std::string>();
      } else if (key == "seed") {
        if (unset("--seed")) args.seed = value.get<uint64_t>();
      } else if (key == "augment") {
        if (unset("--augment")) args.augment = value.get<bool>();
      } else {
        throw UsageError("unknown key '" + key + "' in config file '" + args.config_path + "'");
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw UsageError("bad value in config file '" + args.config_path + "': " + ex.what());
  }
}

int run_synth(const std::string& out, int per_class, int size, uint64_t seed) {
  FixtureSpec spec;
  spec.images_per_class = per_class;
  spec.image_size = size;
  spec.seed = seed;
  DatasetManifest manifest = generate_synthetic_fixture(spec, out);
  std::printf("fixture written to %s\n", manifest.root.c_str());
  for (Split s : kSplits) {
    std::printf("  %-5s", split_name(s));
    for (int c = 0; c < manifest.num_classes(); ++c) {
      std::printf("  %s=%lld", manifest.class_names[static_cast<size_t>(c)].c_str(),
                  static_cast<long long>(manifest.class_count(s, c)));
    }
    std::printf("\n");
  }
  return 0;
}

int run_train(const TrainArgs& args) {
  if (args.arch.empty()) throw UsageError("--arch is required (or 'arch' in --config)");
  if (args.data.empty()) throw UsageError("--data is required (or 'data' in --config)");
  if (!args.seed.has_value()) throw UsageError("--seed is required (or 'seed' in --config)");
  ArchId arch;
  try {
    arch = arch_from_string(args.arch);
  } catch (const ParamError& e) {
    throw UsageError(e.what());
  }
  OptimizerKind optimizer;
  try {
    optimizer = optimizer_from_string(args.optimizer);
  } catch (const ParamError& e) {
    throw UsageError(e.what());
  }
  if (args.epochs < 1) throw UsageError("--epochs must be >= 1");
  if (args.batch_size < 1) throw UsageError("--batch-size must be >= 1");
  if (args.width_div < 1) throw UsageError("--width-div must be >= 1");
  if (args.prefetch < 0) throw UsageError("--prefetch must be >= 0");
  if (!(args.lr > 0)) throw UsageError("--lr must be > 0");

  const fs::path out_dir(args.out);
  const std::string checkpoint =
      !args.checkpoint.empty() ? args.checkpoint : (out_dir / (args.arch + ".ckpt")).string();
  const std::string curves =
      !args.curves.empty() ? args.curves : (out_dir / (args.arch + "_curves.csv")).string();
  if (fs::exists(checkpoint) && !args.force) {
    throw IoError("checkpoint '" + checkpoint + "' already exists; pass --force to overwrite");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  const uint64_t seed = *args.seed;
  DatasetManifest manifest = scan_dataset(args.data);
  for (const auto& w : manifest.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  AugmentConfig aug;
  aug.enabled = args.augment;
  DirectoryStream train_src(manifest, Split::train, args.batch_size, mix_seed(seed, 0xDA7Au), aug,
                            /*shuffle=*/true, args.prefetch);
  AugmentConfig no_aug;
  no_aug.enabled = false;
  DirectoryStream val_src(manifest, Split::val, args.batch_size, mix_seed(seed, 0xBA1u), no_aug,
                          /*shuffle=*/false, args.prefetch);

  TrainConfig cfg;
  cfg.epochs = args.epochs;
  cfg.batch_size = args.batch_size;
  cfg.optimizer = optimizer;
  cfg.hyper.lr = args.lr;
  cfg.seed = seed;
  cfg.curve_path = curves;

  Network<float> net = build_network<float>(arch, args.width_div);
  std::printf("%s\n", net.report().to_text().c_str());
  std::printf("training %s on %lld samples (val %lld), %d epochs, batch %d, %s lr %g, seed %llu\n",
              args.arch.c_str(), static_cast<long long>(train_src.size()),
              static_cast<long long>(val_src.size()), args.epochs, args.batch_size, args.optimizer.c_str(),
              args.lr, static_cast<unsigned long long>(seed));

  FitResult result = fit(net, train_src, &val_src, cfg);
  for (const CurvePoint& p : result.curves) {
    std::printf("epoch %d/%d  train_acc %.6f  train_loss %.6f  val_acc %.6f  val_loss %.6f\n", p.epoch,
                args.epochs, p.train_acc, p.train_loss, p.val_acc, p.val_loss);
  }

  nlohmann::json snapshot{{"arch", args.arch},        {"width_div", args.width_div},
                          {"epochs", args.epochs},    {"batch_size", args.batch_size},
                          {"lr", args.lr},            {"optimizer", args.optimizer},
                          {"seed", seed},             {"augment", args.augment},
                          {"data", args.data}};
  save_checkpoint(net, arch, args.width_div, snapshot, seed, checkpoint);
  std::printf("curves written: %s\ncheckpoint written: %s\n", curves.c_str(), checkpoint.c_str());
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data, const std::string& split_str,
             int batch_size, bool as_json) {
  Split split;
  if (split_str == "train") {
    split = Split::train;
  } else if (split_str == "val") {
    split = Split::val;
  } else if (split_str == "test") {
    split = Split::test;
  } else {
    throw UsageError("--split must be one of train, val, test");
  }
  if (batch_size < 1) throw UsageError("--batch-size must be >= 1");

  LoadedCheckpoint lc = load_checkpoint(checkpoint);
  DatasetManifest manifest = scan_dataset(data);
  for (const auto& w : manifest.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  AugmentConfig no_aug;
  no_aug.enabled = false;
  DirectoryStream src(manifest, split, batch_size, 0, no_aug, /*shuffle=*/false);
  EvalResult<float> result = evaluate(lc.net, src, 1, manifest.class_names);
  if (as_json) {
    nlohmann::json j = report_to_json(result.cm);
    j["split"] = split_str;
    j["samples"] = result.samples;
    j["mean_loss"] = result.loss;
    j["arch"] = lc.info.arch;
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    std::printf("%s (%s split, %lld samples, mean loss %.6f)\n", lc.info.arch.c_str(), split_str.c_str(),
                static_cast<long long>(result.samples), result.loss);
    std::printf("%s", render_report(result.cm).c_str());
  }
  return 0;
}

int run_predict(const std::string& checkpoint, const std::string& image_path) {
  LoadedCheckpoint lc = load_checkpoint(checkpoint);
  const Shape& in = lc.info.input_shape;  // [H, W, C]
  Tensor<float> img = load_image(image_path, in[0], in[1]);
  Tensor<float> batch(Shape{1, in[0], in[1], in[2]});
  std::copy(img.data(), img.data() + img.size(), batch.data());
  auto [probs, labels] = lc.net.predict(batch);
  const auto& names = oct_class_names();
  for (int c = 0; c < static_cast<int>(names.size()); ++c) {
    std::printf("%-8s %.6f\n", names[static_cast<size_t>(c)].c_str(), probs.at(0, c));
  }
  std::printf("label: %s\n", names[static_cast<size_t>(labels[0])].c_str());
  return 0;
}

int run_reproduce(const std::string& tables_path, bool as_json) {
  ReferenceTables tables =
      tables_path.empty() ? load_reference_tables() : load_reference_tables_file(tables_path);
  ReproductionReport report = reproduce_reference_metrics(tables);
  if (as_json) {
    std::printf("%s\n", report.to_json().dump(2).c_str());
  } else {
    std::printf("%s", report.to_text().c_str());
  }
  return report.ok ? 0 : 3;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{
      "octnet — a small CNN framework and pipeline for 4-class retinal OCT image classification.\n"
      "Set OCTNET_THREADS to cap internal parallelism."};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic image fixture");
  std::string synth_out;
  int synth_per_class = 32, synth_size = 150;
  uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "Output dataset root")->required();
  synth->add_option("--images-per-class", synth_per_class, "Images per class (default 32)");
  synth->add_option("--image-size", synth_size, "Square image size in pixels (default 150)");
  synth->add_option("--seed", synth_seed, "Generator seed (default 1)");

  // train
  auto* train = app.add_subcommand("train", "Train an architecture on a dataset directory");
  TrainArgs targs;
  train->add_option("--arch", targs.arch, "Architecture: vanilla_cnn, xception, resnet50, mobilenetv2");
  train->add_option("--data", targs.data, "Dataset root with train/val/test splits");
  train->add_option("--epochs", targs.epochs, "Training epochs (default 15)");
  train->add_option("--batch-size", targs.batch_size, "Batch size (default 32)");
  train->add_option("--lr", targs.lr, "Learning rate (default 1e-3)");
  train->add_option("--optimizer", targs.optimizer, "Optimizer: adam or sgd_momentum (default adam)");
  train->add_option("--seed", targs.seed, "Run seed (required; full determinism)");
  train->add_option("--out", targs.out, "Output directory (default .)");
  train->add_option("--checkpoint", targs.checkpoint, "Checkpoint path (default <out>/<arch>.ckpt)");
  train->add_option("--curves", targs.curves, "Curve CSV path (default <out>/<arch>_curves.csv)");
  train->add_option("--width-div", targs.width_div, "Divide channel widths by this factor (default 1)");
  train->add_option("--prefetch", targs.prefetch, "Batches to decode ahead (default 2, 0 = synchronous)");
  train->add_flag("--augment,!--no-augment", targs.augment, "Augment training images (default on)");
  train->add_flag("--force", targs.force, "Overwrite an existing checkpoint");
  train->add_option("--config", targs.config_path, "JSON config file (flags take precedence)");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  std::string eval_checkpoint, eval_data, eval_split = "test";
  int eval_batch = 32;
  bool eval_json = false;
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint path")->required();
  eval->add_option("--data", eval_data, "Dataset root")->required();
  eval->add_option("--split", eval_split, "Split to evaluate: train, val, test (default test)");
  eval->add_option("--batch-size", eval_batch, "Batch size (default 32)");
  eval->add_flag("--json", eval_json, "Emit the report as JSON");

  // predict
  auto* predict = app.add_subcommand("predict", "Classify one image file");
  std::string pred_checkpoint, pred_image;
  predict->add_option("--checkpoint", pred_checkpoint, "Checkpoint path")->required();
  predict->add_option("--image", pred_image, "Image file (JPEG or PNG)")->required();

  // reproduce-metrics
  auto* repro = app.add_subcommand("reproduce-metrics",
                                   "Recompute metrics from the bundled reference confusion matrices");
  std::string repro_tables;
  bool repro_json = false;
  repro->add_option("--tables", repro_tables, "Override the bundled reference tables with a JSON file");
  repro->add_flag("--json", repro_json, "Emit the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the error and usage hint to stderr
    return 1;
  }

  try {
    if (synth->parsed()) return run_synth(synth_out, synth_per_class, synth_size, synth_seed);
    if (train->parsed()) {
      merge_train_config(*train, targs);
      return run_train(targs);
    }
    if (eval->parsed()) return run_eval(eval_checkpoint, eval_data, eval_split, eval_batch, eval_json);
    if (predict->parsed()) return run_predict(pred_checkpoint, pred_image);
    if (repro->parsed()) return run_reproduce(repro_tables, repro_json);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace octnet
