#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "chimeramix/evaluation.hpp"
#include "chimeramix/run_config.hpp"

namespace chimeramix {

struct RunData {
  LabeledImageDataset train;                  // after per-class subsampling
  std::optional<LabeledImageDataset> test;
  std::vector<int64_t> source_indices;        // rows of the full training set kept in `train`
};

RunData load_run_data(const RunConfig& config);

/// Exclusive advisory lock on a directory (created if missing) for the lifetime of
/// the object; throws Error when another process holds it.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

std::unique_ptr<FeatureExtractor> make_extractor(const EvalConfig& config, int64_t channels);

/// Mask sampler for `dataset` at the generator's feature size. Segmentations are cached
/// under `cache_dir` when it is given.
std::unique_ptr<MaskSampler> make_run_mask_sampler(
    const MaskConfig& config, const LabeledImageDataset& dataset, int64_t feat_h,
    int64_t feat_w, const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

/// Trains the generator; writes resolved_config.json, subsample.tsv, generator.ckpt and
/// generator_metrics.csv under config.output_dir.
GenTrainResult run_train_generator(const RunConfig& config, std::ostream& log);

enum class AugmentSource { kGenerator, kGridMix, kSegMix, kBaseline };

/// Trains a classifier with the chosen chimera source and writes classifier.ckpt,
/// classifier_metrics.csv and classifier_report.json. Returns the report.
Json run_train_classifier(const RunConfig& config, AugmentSource source,
                          const std::optional<std::filesystem::path>& generator_ckpt,
                          std::ostream& log);

/// Writes <out>/grid.png with one row per pair: x1, x2 and three chimeras. n = 0
/// writes nothing.
int64_t run_sample(const RunConfig& config, const std::filesystem::path& generator_ckpt,
                   int64_t n, const std::filesystem::path& out_dir, uint64_t seed);

/// FID between generated chimeras and the (test or training) reference set; writes
/// fid_report.json to config.output_dir.
FidReport run_fid_generator(const RunConfig& config,
                            const std::filesystem::path& generator_ckpt);

/// Region overlay per input PNG (<stem>_segments.png, with a _<n> suffix when stems
/// repeat); returns the number written.
int64_t run_segment_preview(const std::vector<std::filesystem::path>& inputs,
                            const FelzParams& params, const std::filesystem::path& out_dir);

/// Loads a dataset file or directory by extension: .bin is CIFAR binary, a directory is
/// an image folder.
LabeledImageDataset load_dataset_path(const std::filesystem::path& path);

}  // namespace chimeramix
