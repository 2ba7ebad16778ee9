#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "chimeramix/checkpoint.hpp"
#include "chimeramix/dataset.hpp"
#include "chimeramix/losses.hpp"
#include "chimeramix/mixers.hpp"

namespace chimeramix {

struct GenTrainConfig {
  int64_t epochs = 200;
  double lr0 = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double weight_decay = 5e-4;
  bool decoupled_weight_decay = true;
  std::vector<int64_t> milestones{60, 120, 160};
  double lr_factor = 0.2;
  int64_t batch_size = 64;
  bool pre_upsample = true;      // bilinear resize by upsample_factor before the generator
  int64_t upsample_factor = 2;
  int64_t repetition_base = 500;
  int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  int64_t max_steps = 0;         // 0: no cap; otherwise stop after this many iterations
  LossWeights weights;
  PerceptualOptions perceptual;
  MaskConfig masks;

  void validate() const;
};

struct TrainingSeeds {
  uint64_t init = 0;   // parameter initialization
  uint64_t train = 0;  // data order, pairing, masks
};

/// Per-iteration losses.
struct GenStepMetrics {
  int64_t step = 0;
  int64_t epoch = 0;
  double l_rec = 0.0;
  double l_per = 0.0;
  double l_gdisc = 0.0;
  double l_ddisc = 0.0;
};

/// Epoch means of the loss parts; one CSV row each.
struct GenEpochMetrics {
  int64_t epoch = 0;
  double lr = 0.0;
  double l_rec = 0.0;
  double l_per = 0.0;
  double l_gdisc = 0.0;
  double l_ddisc = 0.0;
  int64_t iterations = 0;
  int64_t degenerate_masks = 0;
};

struct GenTrainOptions {
  std::optional<std::filesystem::path> output_dir;  // checkpoints + generator_metrics.csv
  std::function<void(const GenStepMetrics&)> on_step;
  /// Optional external mask sampler (e.g. precomputed segmentations); built from
  /// config.masks when empty.
  const MaskSampler* masks = nullptr;
};

struct GenTrainResult {
  GeneratorBundle bundle;
  std::vector<GenEpochMetrics> epochs;
  int64_t steps = 0;
};

/// One generator/discriminator optimization pair. Batches are already in model range
/// at the generator's input resolution.
class GeneratorTrainer {
 public:
  struct Batch {
    torch::Tensor x1;
    torch::Tensor x2;
    torch::Tensor masks;  // B x 1 x H' x W'
  };
  struct Outputs {
    torch::Tensor mixed;
    torch::Tensor x1_hat;
    torch::Tensor x2_hat;
  };

  GeneratorTrainer(GeneratorBundle bundle, const GenTrainConfig& config);

  Outputs forward(const Batch& batch);
  /// LSGAN update of D on real {x1, x2} against the detached mix.
  double discriminator_step(const Batch& batch, const Outputs& outputs);
  /// Update of f and g on the composite loss; D is frozen for the duration.
  GenStepMetrics generator_step(const Batch& batch, const Outputs& outputs);
  /// forward, discriminator_step, generator_step.
  GenStepMetrics step(const Batch& batch);

  void set_learning_rate(double lr);
  GeneratorBundle& bundle() { return bundle_; }

 private:
  GeneratorBundle bundle_;
  GenTrainConfig config_;
  std::unique_ptr<torch::optim::Optimizer> g_opt_;
  std::unique_ptr<torch::optim::Optimizer> d_opt_;
};

/// Input size the generator sees for a dataset under `config`.
GeneratorConfig generator_config_for(const LabeledImageDataset& dataset,
                                     const GenTrainConfig& config, GeneratorConfig base);

/// Iterations per epoch: ceil(N * repetitions / batch).
int64_t iterations_per_epoch(int64_t dataset_size, int64_t repetitions, int64_t batch);

/// Alternating LSGAN training, discriminator step first. Each iteration samples
/// same-class pairs, one mask per pair, and decodes three feature sets in one pass:
/// the mix and the two constant-mask reconstructions (m = 1 gives x1, m = 0 gives x2).
GenTrainResult train_generator(const LabeledImageDataset& dataset,
                               const GeneratorConfig& generator_config,
                               const DiscriminatorConfig& discriminator_config,
                               const GenTrainConfig& config, const TrainingSeeds& seeds,
                               const GenTrainOptions& options = {});

void write_generator_metrics_csv(const std::vector<GenEpochMetrics>& rows,
                                 const std::filesystem::path& path);

}  // namespace chimeramix
