#pragma once

#include <torch/torch.h>

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "chimeramix/dataset.hpp"
#include "chimeramix/felzenszwalb.hpp"
#include "chimeramix/generator.hpp"
#include "chimeramix/masks.hpp"

namespace chimeramix {

enum class MaskKind { kGrid, kSegmentation };

std::string to_string(MaskKind kind);
MaskKind parse_mask_kind(const std::string& name);

struct MaskConfig {
  MaskKind kind = MaskKind::kGrid;
  int64_t grid_size = 4;
  double grid_probability = 0.5;
  FelzParams felzenszwalb;
  bool per_region = false;  // union of Bernoulli-selected regions instead of one region
};

/// Produces one mask per anchor image at a fixed feature resolution.
class MaskSampler {
 public:
  virtual ~MaskSampler() = default;
  virtual MixMask sample(int64_t anchor_index, std::mt19937_64& rng) const = 0;
  virtual int64_t feature_height() const = 0;
  virtual int64_t feature_width() const = 0;
};

class GridMaskSampler final : public MaskSampler {
 public:
  GridMaskSampler(int64_t grid_size, int64_t feat_h, int64_t feat_w, double p = 0.5);
  MixMask sample(int64_t anchor_index, std::mt19937_64& rng) const override;
  int64_t feature_height() const override { return feat_h_; }
  int64_t feature_width() const override { return feat_w_; }

 private:
  int64_t grid_size_;
  int64_t feat_h_;
  int64_t feat_w_;
  double p_;
};

/// Regions of the anchor's precomputed segmentation (indexed like the dataset).
class SegMaskSampler final : public MaskSampler {
 public:
  SegMaskSampler(std::vector<SegmentationMap> segmentations, int64_t feat_h, int64_t feat_w,
                 bool per_region = false);
  MixMask sample(int64_t anchor_index, std::mt19937_64& rng) const override;
  int64_t feature_height() const override { return feat_h_; }
  int64_t feature_width() const override { return feat_w_; }

 private:
  std::vector<SegmentationMap> segmentations_;
  int64_t feat_h_;
  int64_t feat_w_;
  bool per_region_;
};

/// Builds the sampler named by `config` for `dataset` (segmenting it when needed).
std::unique_ptr<MaskSampler> make_mask_sampler(const MaskConfig& config,
                                               const LabeledImageDataset& dataset,
                                               int64_t feat_h, int64_t feat_w);

/// Turns parent pairs plus masks into chimeras. Inputs and outputs are N x C x H x W
/// batches in [0, 1] at the dataset's native resolution.
class ChimeraMixer {
 public:
  virtual ~ChimeraMixer() = default;
  virtual torch::Tensor mix(const torch::Tensor& x1, const torch::Tensor& x2,
                            std::span<const MixMask> masks) = 0;
  virtual std::string name() const = 0;
};

/// Feature mixing through a frozen generator; resizes to the generator's input size
/// and back when they differ from the native resolution.
class GeneratorMixer final : public ChimeraMixer {
 public:
  explicit GeneratorMixer(Generator generator);
  torch::Tensor mix(const torch::Tensor& x1, const torch::Tensor& x2,
                    std::span<const MixMask> masks) override;
  std::string name() const override { return "generator"; }

 private:
  Generator generator_;
};

/// Direct pixel-space composition (GridMix / SegMix ablations).
class PixelMixer final : public ChimeraMixer {
 public:
  torch::Tensor mix(const torch::Tensor& x1, const torch::Tensor& x2,
                    std::span<const MixMask> masks) override;
  std::string name() const override { return "pixel"; }
};

enum class ReplacementMode { kWholeBatch, kPerSample };

/// Mixer + mask sampler + replacement rule, applied to classifier batches.
struct Augmenter {
  ChimeraMixer* mixer = nullptr;
  const MaskSampler* masks = nullptr;
  double replace_prob = 0.5;
  ReplacementMode mode = ReplacementMode::kWholeBatch;
};

struct AugmentedBatch {
  torch::Tensor images;     // [0, 1]
  int64_t replaced = 0;     // number of samples swapped for chimeras
  int64_t degenerate = 0;   // masks that were all-zero or all-one
};

/// With probability replace_prob the whole batch becomes chimeras: every anchor gets a
/// uniform same-class partner from `dataset` and a fresh mask; labels are unchanged.
/// `images` holds the anchors `indices` of `dataset`, in [0, 1].
AugmentedBatch augment_batch(const torch::Tensor& images, std::span<const int64_t> indices,
                             const LabeledImageDataset& dataset, const Augmenter& augmenter,
                             std::mt19937_64& rng);

}  // namespace chimeramix
