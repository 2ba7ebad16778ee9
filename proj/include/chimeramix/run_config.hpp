#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chimeramix/classifier.hpp"
#include "chimeramix/classifier_trainer.hpp"
#include "chimeramix/discriminator.hpp"
#include "chimeramix/generator.hpp"
#include "chimeramix/generator_trainer.hpp"
#include "chimeramix/json_reader.hpp"

namespace chimeramix {

struct DatasetSpec {
  std::string format = "cifar-binary";  // cifar-binary | image-folder | synthetic
  std::string path;
  std::string test_path;                // optional
  int64_t samples_per_class = 5;        // 0 keeps the full training set
  std::string synthetic_kind = "structured";  // structured | flat-color | two-class
  int64_t synthetic_side = 16;
  int64_t synthetic_per_class = 20;
  int64_t synthetic_test_per_class = 50;
  uint64_t synthetic_seed = 1234;
};

struct EvalConfig {
  std::string extractor = "random-projection";  // random-projection | torchscript
  std::string extractor_path;
  int64_t extractor_side = 32;
  int64_t extractor_dim = 64;
  uint64_t extractor_seed = 0;
  int64_t fid_samples = 1000;
};

struct RunSeeds {
  uint64_t split = 0;
  uint64_t init = 0;
  uint64_t train = 0;
};

struct RunConfig {
  std::string preset;  // informational; values below are already resolved
  DatasetSpec dataset;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  GenTrainConfig gen_train;  // includes mask source and loss weights
  ClassifierConfig classifier;
  ClsTrainConfig cls_train;
  EvalConfig eval;
  std::string output_dir = "runs/default";
  RunSeeds seeds;

  /// Range checks plus existence of every referenced path.
  void validate() const;
  /// Fully resolved document; from_json(to_json()) reproduces the config.
  Json to_json() const;
  /// Parses a document. A "preset" key selects base values that the remaining keys
  /// override; "dataset" and "output_dir" are always required.
  static RunConfig from_json(const Json& doc);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

std::vector<std::string> preset_names();
/// Values of a named preset; throws ConfigError for unknown names.
RunConfig preset_config(const std::string& name);

}  // namespace chimeramix
