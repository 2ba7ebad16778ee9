#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "chimeramix/errors.hpp"
#include "chimeramix/pipeline.hpp"
#include "chimeramix/png_io.hpp"
#include "chimeramix/synthetic.hpp"

namespace fs = std::filesystem;
using namespace chimeramix;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct RunFlags {
  std::string config;
  std::string preset;
  std::optional<uint64_t> seed_split;
  std::optional<uint64_t> seed_init;
  std::optional<uint64_t> seed_train;
  std::optional<int64_t> samples_per_class;
  std::string mask;
  std::string out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "run configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset, "base preset: cifair-small, stl-large or tiny-ci");
    cmd->add_option("--seed-split", seed_split, "seed for per-class subsampling");
    cmd->add_option("--seed-init", seed_init, "seed for parameter initialization");
    cmd->add_option("--seed-train", seed_train, "seed for data order, pairing and masks");
    cmd->add_option("--samples-per-class", samples_per_class, "training images kept per class");
    cmd->add_option("--mask", mask, "mask source")->check(CLI::IsMember({"grid", "seg"}));
    cmd->add_option("--out", out, "output directory");
  }

  RunConfig resolve() const {
    Json doc;
    if (!config.empty()) {
      std::ifstream in(config);
      try {
        doc = Json::parse(in);
      } catch (const Json::parse_error& e) {
        throw ConfigError(config + ": invalid JSON: " + e.what());
      }
    } else if (!preset.empty()) {
      doc = preset_config(preset).to_json();
    } else {
      throw ConfigError("--config or --preset is required");
    }
    if (!doc.is_object()) throw ConfigError("<root>: expected an object");
    if (!preset.empty()) doc["preset"] = preset;
    if (seed_split) doc["seeds"]["split"] = *seed_split;
    if (seed_init) doc["seeds"]["init"] = *seed_init;
    if (seed_train) doc["seeds"]["train"] = *seed_train;
    if (samples_per_class) {
      if (!doc.contains("dataset")) throw ConfigError("dataset: missing required key");
      doc["dataset"]["samples_per_class"] = *samples_per_class;
    }
    if (!mask.empty()) doc["masks"]["kind"] = mask;
    if (!out.empty()) doc["output_dir"] = out;
    auto cfg = RunConfig::from_json(doc);
    cfg.validate();
    return cfg;
  }
};

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".png") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      if (!fs::exists(in)) throw ConfigError("input '" + in + "' does not exist");
      files.emplace_back(in);
    }
  }
  return files;
}

void write_image_folder(const LabeledImageDataset& ds, const fs::path& root) {
  std::vector<int64_t> counter(static_cast<size_t>(ds.class_count()), 0);
  for (int64_t i = 0; i < ds.size(); ++i) {
    const auto label = ds.label(i);
    const auto dir = root / ("class_" + std::to_string(label));
    fs::create_directories(dir);
    char name[32];
    std::snprintf(name, sizeof(name), "%05lld.png",
                  static_cast<long long>(counter[static_cast<size_t>(label)]++));
    write_png(dir / name, ds.image(i));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ChimeraMix: feature-mixing data augmentation for small image datasets"};
  app.require_subcommand(1);

  RunFlags gen_flags;
  auto* train_gen = app.add_subcommand("train-generator", "train the mixing generator");
  gen_flags.attach(train_gen);

  RunFlags cls_flags;
  std::string cls_generator;
  std::string cls_ablation;
  bool cls_baseline = false;
  auto* train_cls = app.add_subcommand("train-classifier", "train a classifier with chimeras");
  cls_flags.attach(train_cls);
  auto* g_opt = train_cls->add_option("--generator", cls_generator, "generator checkpoint")
                    ->check(CLI::ExistingFile);
  auto* a_opt = train_cls->add_option("--ablation", cls_ablation, "pixel-space mixing instead")
                    ->check(CLI::IsMember({"grid", "seg"}));
  auto* b_opt = train_cls->add_flag("--baseline", cls_baseline, "no chimera augmentation");
  g_opt->excludes(a_opt)->excludes(b_opt);
  a_opt->excludes(b_opt);

  RunFlags sample_flags;
  std::string sample_generator;
  int64_t sample_n = 8;
  uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "write a grid of parents and chimeras");
  sample_flags.attach(sample);
  sample->add_option("--generator", sample_generator, "generator checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  sample->add_option("-n", sample_n, "number of rows");
  sample->add_option("--seed", sample_seed, "sampling seed");

  RunFlags fid_flags;
  std::string fid_generator;
  std::vector<std::string> fid_datasets;
  auto* fid_cmd = app.add_subcommand("fid", "Frechet distance between image sets");
  fid_flags.attach(fid_cmd);
  fid_cmd->add_option("--generator", fid_generator, "generator checkpoint (uses --config data)")
      ->check(CLI::ExistingFile);
  fid_cmd->add_option("--datasets", fid_datasets, "two dataset paths to compare")
      ->expected(2);

  RunFlags eval_flags;
  std::string eval_classifier;
  std::string eval_test;
  auto* eval_cmd = app.add_subcommand("eval", "test accuracy of a classifier checkpoint");
  eval_flags.attach(eval_cmd);
  eval_cmd->add_option("--classifier", eval_classifier, "classifier checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--test", eval_test, "test dataset (CIFAR binary file or image folder)");

  std::vector<std::string> preview_inputs;
  std::string preview_out;
  FelzParams preview_params;
  auto* preview = app.add_subcommand("segment-preview", "overlay segmentations on images");
  preview->add_option("inputs", preview_inputs, "PNG files or directories")->required();
  preview->add_option("--out", preview_out, "output directory")->required();
  preview->add_option("--scale", preview_params.scale, "merge threshold constant");
  preview->add_option("--min-size", preview_params.min_size, "minimum region size");
  preview->add_option("--sigma", preview_params.sigma, "pre-smoothing std");

  std::string fixture_out;
  std::string fixture_format = "image-folder";
  std::string fixture_kind = "two-class";
  int64_t fixture_per_class = 5;
  int64_t fixture_side = 32;
  uint64_t fixture_seed = 0;
  auto* fixture = app.add_subcommand("make-fixture", "write a synthetic dataset to disk");
  fixture->add_option("--out", fixture_out, "output path")->required();
  fixture->add_option("--format", fixture_format, "image-folder or cifar-binary")
      ->check(CLI::IsMember({"image-folder", "cifar-binary"}));
  fixture->add_option("--kind", fixture_kind, "two-class, structured or flat-color")
      ->check(CLI::IsMember({"two-class", "structured", "flat-color"}));
  fixture->add_option("--per-class", fixture_per_class, "images per class");
  fixture->add_option("--side", fixture_side, "image side in pixels");
  fixture->add_option("--seed", fixture_seed, "generation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_gen) {
      run_train_generator(gen_flags.resolve(), std::cout);
    } else if (*train_cls) {
      AugmentSource source = AugmentSource::kBaseline;
      std::optional<fs::path> ckpt;
      if (!cls_generator.empty()) {
        source = AugmentSource::kGenerator;
        ckpt = cls_generator;
      } else if (!cls_ablation.empty()) {
        source = cls_ablation == "grid" ? AugmentSource::kGridMix : AugmentSource::kSegMix;
      } else if (!cls_baseline) {
        throw ConfigError("train-classifier needs --generator, --ablation or --baseline");
      }
      run_train_classifier(cls_flags.resolve(), source, ckpt, std::cout);
    } else if (*sample) {
      const auto cfg = sample_flags.resolve();
      const fs::path out = sample_flags.out.empty() ? fs::path(cfg.output_dir) / "samples"
                                                    : fs::path(cfg.output_dir);
      const auto rows = run_sample(cfg, sample_generator, sample_n, out, sample_seed);
      std::cout << "wrote " << rows << " rows to " << out.string() << '\n';
    } else if (*fid_cmd) {
      if (!fid_datasets.empty()) {
        const auto a = load_dataset_path(fid_datasets[0]);
        const auto b = load_dataset_path(fid_datasets[1]);
        if (a.shape().channels != b.shape().channels) {
          throw ConfigError("--datasets: channel counts differ");
        }
        EvalConfig eval;
        if (!fid_flags.config.empty() || !fid_flags.preset.empty()) eval = fid_flags.resolve().eval;
        auto extractor = make_extractor(eval, a.shape().channels);
        const double value = fid_between(*extractor, a, b);
        std::cout << Json{{"fid", value}, {"extractor", extractor->id()},
                          {"first_count", a.size()}, {"second_count", b.size()},
                          {"resize_filter", "bilinear-antialias"}}
                         .dump(2)
                  << '\n';
      } else {
        if (fid_generator.empty()) {
          throw ConfigError("fid needs --datasets A B or --generator with --config");
        }
        const auto report = run_fid_generator(fid_flags.resolve(), fid_generator);
        std::cout << report.manifest.dump(2) << '\n';
      }
    } else if (*eval_cmd) {
      auto model = load_classifier(eval_classifier);
      LabeledImageDataset test;
      if (!eval_test.empty()) {
        test = load_dataset_path(eval_test);
      } else {
        auto data = load_run_data(eval_flags.resolve());
        if (!data.test) throw ConfigError("dataset.test_path: no test set configured");
        test = std::move(*data.test);
      }
      const double acc = evaluate_accuracy(model, test);
      std::cout << Json{{"accuracy", acc}, {"test_count", test.size()}}.dump(2) << '\n';
    } else if (*preview) {
      const auto count = run_segment_preview(expand_inputs(preview_inputs), preview_params,
                                             preview_out);
      std::cout << "wrote " << count << " previews to " << preview_out << '\n';
    } else if (*fixture) {
      LabeledImageDataset ds;
      if (fixture_kind == "structured") {
        ds = make_structured_dataset(fixture_per_class, fixture_side, fixture_seed);
      } else if (fixture_kind == "flat-color") {
        ds = make_flat_color_dataset(3, fixture_per_class, fixture_side, 0.1, fixture_seed);
      } else {
        ds = make_two_class_fixture(fixture_per_class, fixture_side, fixture_seed);
      }
      if (fixture_format == "cifar-binary") {
        if (fs::path(fixture_out).has_parent_path()) {
          fs::create_directories(fs::path(fixture_out).parent_path());
        }
        write_cifar_binary(ds, fixture_out);
      } else {
        write_image_folder(ds, fixture_out);
      }
      std::cout << "wrote " << ds.size() << " images to " << fixture_out << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
