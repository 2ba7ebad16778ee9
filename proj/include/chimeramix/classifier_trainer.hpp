#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "chimeramix/classifier.hpp"
#include "chimeramix/dataset.hpp"
#include "chimeramix/generator_trainer.hpp"
#include "chimeramix/mixers.hpp"

namespace chimeramix {

struct ClsTrainConfig {
  int64_t epochs = 200;
  int64_t batch_size = 10;
  double lr0 = 0.0046;
  double weight_decay = 0.0053;
  double momentum = 0.9;
  int64_t repetition_base = 500;
  double replace_prob = 0.5;
  ReplacementMode replacement = ReplacementMode::kWholeBatch;
  bool flip = false;             // random horizontal flip
  int64_t crop_padding = 0;      // random crop after zero padding; 0 disables
  int64_t eval_every = 1;        // test accuracy every k epochs (and always at the end)
  int64_t max_steps = 0;

  void validate() const;

  static ClsTrainConfig small_image();  // 32 x 32 datasets
  static ClsTrainConfig large_image();  // 96 x 96 datasets
};

struct ClsEpochMetrics {
  int64_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> test_acc;
  int64_t iterations = 0;
  int64_t replaced_batches = 0;
  int64_t degenerate_masks = 0;
};

struct ClsTrainOptions {
  std::optional<std::filesystem::path> output_dir;  // classifier.ckpt + classifier_metrics.csv
  const LabeledImageDataset* test_set = nullptr;
  /// Chimera source. An empty mixer trains the plain baseline.
  ChimeraMixer* mixer = nullptr;
  const MaskSampler* masks = nullptr;
  std::function<void(const ClsEpochMetrics&)> on_epoch;
};

struct ClsTrainResult {
  Classifier model{nullptr};
  std::vector<ClsEpochMetrics> epochs;
  std::optional<double> final_accuracy;
  std::optional<double> best_accuracy;
  int64_t best_epoch = -1;
};

/// SGD with momentum and per-epoch cosine annealing over the repeated dataset. Data
/// order, chimera sampling and base augmentation draw from separate streams derived
/// from seeds.train, so replace_prob = 0 gives exactly the baseline run.
ClsTrainResult train_classifier(const LabeledImageDataset& dataset,
                                const ClassifierConfig& model_config,
                                const ClsTrainConfig& config, const TrainingSeeds& seeds,
                                const ClsTrainOptions& options = {});

/// Top-1 accuracy of `predict` (logits for a [0, 1] image batch) over `test_set`.
double evaluate_accuracy(const std::function<torch::Tensor(const torch::Tensor&)>& predict,
                         const LabeledImageDataset& test_set, int64_t num_classes,
                         int64_t batch_size = 256);
double evaluate_accuracy(Classifier& model, const LabeledImageDataset& test_set,
                         int64_t batch_size = 256);

void write_classifier_metrics_csv(const std::vector<ClsEpochMetrics>& rows,
                                  const std::filesystem::path& path);

}  // namespace chimeramix
