#include "chimeramix/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <map>
#include <numeric>

#include "chimeramix/errors.hpp"
#include "chimeramix/felzenszwalb.hpp"
#include "chimeramix/png_io.hpp"
#include "chimeramix/segmentation_cache.hpp"
#include "chimeramix/synthetic.hpp"
#include "chimeramix/tensor_ops.hpp"

namespace chimeramix {

namespace fs = std::filesystem;

namespace {

LabeledImageDataset make_synthetic(const DatasetSpec& spec, int64_t per_class, uint64_t seed) {
  if (spec.synthetic_kind == "structured") {
    return make_structured_dataset(per_class, spec.synthetic_side, seed);
  }
  if (spec.synthetic_kind == "flat-color") {
    return make_flat_color_dataset(3, per_class, spec.synthetic_side, 0.1, seed);
  }
  return make_two_class_fixture(per_class, spec.synthetic_side, seed);
}

void write_json(const Json& doc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void check_classifier_matches(const ClassifierConfig& c, const LabeledImageDataset& ds) {
  if (c.num_classes != ds.class_count()) {
    throw ConfigError("classifier.num_classes: " + std::to_string(c.num_classes) +
                      " does not match the dataset's " + std::to_string(ds.class_count()) +
                      " classes");
  }
  if (c.channels != ds.shape().channels) {
    throw ConfigError("classifier.channels: " + std::to_string(c.channels) +
                      " does not match the dataset's " + std::to_string(ds.shape().channels) +
                      " channels");
  }
}

}  // namespace

LabeledImageDataset load_dataset_path(const fs::path& path) {
  if (fs::is_directory(path)) return load_image_folder(path);
  return load_cifar_binary(path);
}

RunData load_run_data(const RunConfig& config) {
  const auto& spec = config.dataset;
  LabeledImageDataset full;
  std::optional<LabeledImageDataset> test;
  if (spec.format == "synthetic") {
    full = make_synthetic(spec, spec.synthetic_per_class, spec.synthetic_seed);
    if (spec.synthetic_test_per_class > 0) {
      test = make_synthetic(spec, spec.synthetic_test_per_class, spec.synthetic_seed + 1);
    }
  } else {
    full = load_dataset_path(spec.path);
    if (!spec.test_path.empty()) test = load_dataset_path(spec.test_path);
  }
  if (test && (test->shape() != full.shape() || test->class_count() != full.class_count())) {
    throw ConfigError("dataset.test_path: test set " + to_string(test->shape()) + " with " +
                      std::to_string(test->class_count()) + " classes does not match the " +
                      "training set " + to_string(full.shape()) + " with " +
                      std::to_string(full.class_count()) + " classes");
  }
  if (spec.samples_per_class > 0) {
    auto sub = subsample_per_class(full, spec.samples_per_class, config.seeds.split);
    return {std::move(sub.dataset), std::move(test), std::move(sub.source_indices)};
  }
  std::vector<int64_t> all(static_cast<size_t>(full.size()));
  std::iota(all.begin(), all.end(), 0);
  return {std::move(full), std::move(test), std::move(all)};
}

DirectoryLock::DirectoryLock(const fs::path& dir) {
  fs::create_directories(dir);
  const auto lock_path = dir / ".lock";
  fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
  if (fd_ < 0) throw Error("cannot open lock file " + lock_path.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error("output directory " + dir.string() + " is in use by another process");
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

std::unique_ptr<FeatureExtractor> make_extractor(const EvalConfig& config, int64_t channels) {
  if (config.extractor == "torchscript") {
    return std::make_unique<TorchScriptExtractor>(config.extractor_path, config.extractor_side,
                                                  channels);
  }
  return std::make_unique<RandomProjectionExtractor>(channels, config.extractor_dim,
                                                     config.extractor_side,
                                                     config.extractor_seed);
}

std::unique_ptr<MaskSampler> make_run_mask_sampler(const MaskConfig& config,
                                                   const LabeledImageDataset& dataset,
                                                   int64_t feat_h, int64_t feat_w,
                                                   const std::optional<fs::path>& cache_dir) {
  if (config.kind == MaskKind::kGrid) {
    return std::make_unique<GridMaskSampler>(config.grid_size, feat_h, feat_w,
                                             config.grid_probability);
  }
  std::optional<fs::path> cache;
  if (cache_dir) cache = *cache_dir / "segmentations.cache";
  return std::make_unique<SegMaskSampler>(segment_dataset(dataset, config.felzenszwalb, cache),
                                          feat_h, feat_w, config.per_region);
}

GenTrainResult run_train_generator(const RunConfig& config, std::ostream& log) {
  config.validate();
  const fs::path out = config.output_dir;
  DirectoryLock lock(out);
  config.save(out / "resolved_config.json");
  const auto data = load_run_data(config);
  write_subsample_manifest(Subsample{data.train, data.source_indices}, out / "subsample.tsv");

  const auto gen_cfg = generator_config_for(data.train, config.gen_train, config.generator);
  gen_cfg.validate();
  const auto masks = make_run_mask_sampler(config.gen_train.masks, data.train,
                                           gen_cfg.feature_height(), gen_cfg.feature_width(), out);
  GenTrainOptions options;
  options.output_dir = out;
  options.masks = masks.get();
  log << "training generator on " << data.train.size() << " images ("
      << to_string(data.train.shape()) << ", " << data.train.class_count() << " classes), "
      << config.gen_train.epochs << " epochs\n";
  auto result = train_generator(data.train, gen_cfg, config.discriminator, config.gen_train,
                                {config.seeds.init, config.seeds.train}, options);
  for (const auto& e : result.epochs) {
    log << "epoch " << e.epoch << " lr " << e.lr << " l_rec " << e.l_rec << " l_per "
        << e.l_per << " l_gdisc " << e.l_gdisc << " l_ddisc " << e.l_ddisc << '\n';
  }
  log << "wrote " << (out / "generator.ckpt").string() << '\n';
  return result;
}

Json run_train_classifier(const RunConfig& config, AugmentSource source,
                          const std::optional<fs::path>& generator_ckpt, std::ostream& log) {
  config.validate();
  const fs::path out = config.output_dir;
  DirectoryLock lock(out);
  config.save(out / "resolved_config.json");
  const auto data = load_run_data(config);
  check_classifier_matches(config.classifier, data.train);
  write_subsample_manifest(Subsample{data.train, data.source_indices}, out / "subsample.tsv");

  std::unique_ptr<ChimeraMixer> mixer;
  std::unique_ptr<MaskSampler> masks;
  std::string source_name = "baseline";
  auto mask_config = config.gen_train.masks;
  if (source == AugmentSource::kGenerator) {
    if (!generator_ckpt) throw ConfigError("--generator: a generator checkpoint is required");
    auto bundle = GeneratorBundle::load(*generator_ckpt);
    if (bundle.generator_config.channels != data.train.shape().channels) {
      throw ConfigError("generator checkpoint channel count does not match the dataset");
    }
    masks = make_run_mask_sampler(mask_config, data.train,
                                  bundle.generator_config.feature_height(),
                                  bundle.generator_config.feature_width(), out);
    bundle.generator->eval();
    mixer = std::make_unique<GeneratorMixer>(bundle.generator);
    source_name = "chimeramix-" + to_string(mask_config.kind);
  } else if (source == AugmentSource::kGridMix || source == AugmentSource::kSegMix) {
    mask_config.kind = source == AugmentSource::kGridMix ? MaskKind::kGrid
                                                         : MaskKind::kSegmentation;
    const auto gen_cfg = generator_config_for(data.train, config.gen_train, config.generator);
    masks = make_run_mask_sampler(mask_config, data.train, gen_cfg.feature_height(),
                                  gen_cfg.feature_width(), out);
    mixer = std::make_unique<PixelMixer>();
    source_name = source == AugmentSource::kGridMix ? "gridmix" : "segmix";
  }

  ClsTrainOptions options;
  options.output_dir = out;
  options.test_set = data.test ? &*data.test : nullptr;
  options.mixer = mixer.get();
  options.masks = masks.get();
  options.on_epoch = [&](const ClsEpochMetrics& m) {
    log << "epoch " << m.epoch << " lr " << m.lr << " loss " << m.loss << " train_acc "
        << m.train_acc;
    if (m.test_acc) log << " acc " << *m.test_acc;
    log << '\n';
  };
  log << "training classifier (" << source_name << ") on " << data.train.size() << " images\n";
  const auto result = train_classifier(data.train, config.classifier, config.cls_train,
                                       {config.seeds.init, config.seeds.train}, options);

  Json epochs = Json::array();
  for (const auto& e : result.epochs) {
    Json row{{"epoch", e.epoch},
             {"lr", e.lr},
             {"loss", e.loss},
             {"train_acc", e.train_acc},
             {"replaced_batches", e.replaced_batches}};
    row["acc"] = e.test_acc ? Json(*e.test_acc) : Json(nullptr);
    epochs.push_back(row);
  }
  Json report{{"source", source_name},
              {"train_count", data.train.size()},
              {"test_count", data.test ? data.test->size() : 0},
              {"epochs", epochs},
              {"best_epoch", result.best_epoch}};
  report["final_accuracy"] = result.final_accuracy ? Json(*result.final_accuracy) : Json(nullptr);
  report["best_accuracy"] = result.best_accuracy ? Json(*result.best_accuracy) : Json(nullptr);
  if (generator_ckpt) report["generator"] = generator_ckpt->string();
  write_json(report, out / "classifier_report.json");
  if (result.final_accuracy) log << "final accuracy " << *result.final_accuracy << '\n';
  return report;
}

int64_t run_sample(const RunConfig& config, const fs::path& generator_ckpt, int64_t n,
                   const fs::path& out_dir, uint64_t seed) {
  if (n < 0) throw ConfigError("-n: must be >= 0");
  fs::create_directories(out_dir);
  if (n == 0) return 0;
  const auto data = load_run_data(config);
  auto bundle = GeneratorBundle::load(generator_ckpt);
  bundle.generator->eval();
  GeneratorMixer mixer(bundle.generator);
  const auto masks = make_run_mask_sampler(config.gen_train.masks, data.train,
                                           bundle.generator_config.feature_height(),
                                           bundle.generator_config.feature_width());
  constexpr int64_t kChimeras = 3;
  const auto& s = data.train.shape();
  auto grid = torch::zeros({s.channels, n * s.height, (2 + kChimeras) * s.width});
  std::mt19937_64 rng(seed);
  for (int64_t row = 0; row < n; ++row) {
    const std::vector<int64_t> anchor{uniform_index(rng, data.train.size())};
    const auto pair = pair_with_same_class(data.train, anchor, rng);
    std::vector<int64_t> firsts(kChimeras, pair.first[0]);
    std::vector<int64_t> seconds(kChimeras, pair.second[0]);
    std::vector<MixMask> row_masks;
    for (int64_t k = 0; k < kChimeras; ++k) row_masks.push_back(masks->sample(anchor[0], rng));
    const auto x1 = images_to_tensor(data.train, firsts);
    const auto x2 = images_to_tensor(data.train, seconds);
    const auto chimeras = mixer.mix(x1, x2, row_masks);
    auto band = grid.slice(1, row * s.height, (row + 1) * s.height);
    band.slice(2, 0, s.width).copy_(x1[0]);
    band.slice(2, s.width, 2 * s.width).copy_(x2[0]);
    for (int64_t k = 0; k < kChimeras; ++k) {
      band.slice(2, (2 + k) * s.width, (3 + k) * s.width).copy_(chimeras[k]);
    }
  }
  const auto planar = tensor_to_planar(grid);
  write_png(out_dir / "grid.png",
            ImageView{planar, ImageShape{n * s.height, (2 + kChimeras) * s.width, s.channels}});
  return n;
}

FidReport run_fid_generator(const RunConfig& config, const fs::path& generator_ckpt) {
  config.validate();
  const fs::path out = config.output_dir;
  DirectoryLock lock(out);
  const auto data = load_run_data(config);
  auto bundle = GeneratorBundle::load(generator_ckpt);
  bundle.generator->eval();
  GeneratorMixer mixer(bundle.generator);
  const auto masks = make_run_mask_sampler(config.gen_train.masks, data.train,
                                           bundle.generator_config.feature_height(),
                                           bundle.generator_config.feature_width(), out);
  auto extractor = make_extractor(config.eval, data.train.shape().channels);
  const auto& reference = data.test ? *data.test : data.train;
  auto report = fid_report(mixer, *masks, data.train, reference, *extractor,
                           config.eval.fid_samples, config.seeds.train);
  report.manifest["generator"] = generator_ckpt.string();
  report.manifest["mask_kind"] = to_string(config.gen_train.masks.kind);
  write_json(report.manifest, out / "fid_report.json");
  return report;
}

int64_t run_segment_preview(const std::vector<fs::path>& inputs, const FelzParams& params,
                            const fs::path& out_dir) {
  params.validate();
  fs::create_directories(out_dir);
  int64_t written = 0;
  std::map<std::string, int> stems;
  for (const auto& input : inputs) {
    const auto image = read_png(input);
    const ImageView view{image.pixels, image.shape};
    const auto seg = felzenszwalb_segment(view, params);
    std::vector<std::array<float, 3>> colors(static_cast<size_t>(seg.region_count));
    for (int64_t r = 0; r < seg.region_count; ++r) {
      std::mt19937_64 rng(static_cast<uint64_t>(r) * 7919u + 17u);
      for (auto& c : colors[static_cast<size_t>(r)]) c = static_cast<float>(uniform_unit(rng));
    }
    const auto& s = image.shape;
    std::vector<float> overlay(image.pixels.size());
    for (int64_t c = 0; c < s.channels; ++c) {
      for (int64_t y = 0; y < s.height; ++y) {
        for (int64_t x = 0; x < s.width; ++x) {
          const auto i = static_cast<size_t>((c * s.height + y) * s.width + x);
          const auto& color = colors[static_cast<size_t>(seg.at(y, x))];
          overlay[i] = 0.4f * image.pixels[i] + 0.6f * color[static_cast<size_t>(c % 3)];
        }
      }
    }
    std::string name = input.stem().string();
    if (const int seen = stems[name]++; seen > 0) name += "_" + std::to_string(seen);
    write_png(out_dir / (name + "_segments.png"), ImageView{overlay, s});
    ++written;
  }
  return written;
}

}  // namespace chimeramix
