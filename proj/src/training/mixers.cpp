#include "chimeramix/mixers.hpp"

#include "chimeramix/errors.hpp"
#include "chimeramix/evaluation.hpp"
#include "chimeramix/segmentation_cache.hpp"
#include "chimeramix/tensor_ops.hpp"

namespace chimeramix {

std::string to_string(MaskKind kind) { return kind == MaskKind::kGrid ? "grid" : "seg"; }

MaskKind parse_mask_kind(const std::string& name) {
  if (name == "grid") return MaskKind::kGrid;
  if (name == "seg" || name == "segmentation") return MaskKind::kSegmentation;
  throw InvalidArgument("unknown mask kind '" + name + "' (expected grid or seg)");
}

GridMaskSampler::GridMaskSampler(int64_t grid_size, int64_t feat_h, int64_t feat_w, double p)
    : grid_size_(grid_size), feat_h_(feat_h), feat_w_(feat_w), p_(p) {
  if (grid_size < 1 || grid_size > std::min(feat_h, feat_w)) {
    throw InvalidArgument("grid size " + std::to_string(grid_size) +
                          " exceeds the feature resolution " + std::to_string(feat_h) + "x" +
                          std::to_string(feat_w));
  }
}

MixMask GridMaskSampler::sample(int64_t, std::mt19937_64& rng) const {
  return sample_grid_mask(grid_size_, feat_h_, feat_w_, rng, p_);
}

SegMaskSampler::SegMaskSampler(std::vector<SegmentationMap> segmentations, int64_t feat_h,
                               int64_t feat_w, bool per_region)
    : segmentations_(std::move(segmentations)),
      feat_h_(feat_h),
      feat_w_(feat_w),
      per_region_(per_region) {}

MixMask SegMaskSampler::sample(int64_t anchor_index, std::mt19937_64& rng) const {
  const auto& segmap = segmentations_.at(static_cast<size_t>(anchor_index));
  return per_region_ ? sample_seg_mask_per_region(segmap, feat_h_, feat_w_, rng)
                     : sample_seg_mask(segmap, feat_h_, feat_w_, rng);
}

std::unique_ptr<MaskSampler> make_mask_sampler(const MaskConfig& config,
                                               const LabeledImageDataset& dataset,
                                               int64_t feat_h, int64_t feat_w) {
  if (config.kind == MaskKind::kGrid) {
    return std::make_unique<GridMaskSampler>(config.grid_size, feat_h, feat_w,
                                             config.grid_probability);
  }
  return std::make_unique<SegMaskSampler>(segment_dataset(dataset, config.felzenszwalb), feat_h,
                                          feat_w, config.per_region);
}

GeneratorMixer::GeneratorMixer(Generator generator) : generator_(std::move(generator)) {
  if (!generator_) throw InvalidArgument("GeneratorMixer needs a generator");
}

torch::Tensor GeneratorMixer::mix(const torch::Tensor& x1, const torch::Tensor& x2,
                                  std::span<const MixMask> masks) {
  torch::NoGradGuard no_grad;
  const auto& cfg = generator_->config();
  const int64_t h = x1.size(2);
  const int64_t w = x1.size(3);
  const auto in1 = to_model_range(resize_bilinear(x1, cfg.input_height, cfg.input_width));
  const auto in2 = to_model_range(resize_bilinear(x2, cfg.input_height, cfg.input_width));
  const auto out = generator_->generate(in1, in2, masks_to_tensor(masks));
  return resize_bilinear(to_unit_range(out), h, w).clamp(0.0, 1.0);
}

torch::Tensor PixelMixer::mix(const torch::Tensor& x1, const torch::Tensor& x2,
                              std::span<const MixMask> masks) {
  return pixel_mix(x1, x2, masks);
}

AugmentedBatch augment_batch(const torch::Tensor& images, std::span<const int64_t> indices,
                             const LabeledImageDataset& dataset, const Augmenter& augmenter,
                             std::mt19937_64& rng) {
  if (augmenter.mixer == nullptr || augmenter.masks == nullptr) {
    throw InvalidArgument("augment_batch requires a loaded generator (mixer) and mask sampler");
  }
  if (augmenter.replace_prob < 0.0 || augmenter.replace_prob > 1.0) {
    throw InvalidArgument("replace probability must lie in [0, 1]");
  }
  const auto n = static_cast<int64_t>(indices.size());
  std::vector<uint8_t> replace(static_cast<size_t>(n), 0);
  if (augmenter.mode == ReplacementMode::kWholeBatch) {
    const bool hit = uniform_unit(rng) < augmenter.replace_prob;
    std::fill(replace.begin(), replace.end(), hit ? 1 : 0);
  } else {
    for (auto& r : replace) r = uniform_unit(rng) < augmenter.replace_prob ? 1 : 0;
  }
  std::vector<int64_t> anchors;
  std::vector<int64_t> rows;
  for (int64_t i = 0; i < n; ++i) {
    if (replace[static_cast<size_t>(i)]) {
      anchors.push_back(indices[static_cast<size_t>(i)]);
      rows.push_back(i);
    }
  }
  AugmentedBatch result{images, 0, 0};
  if (anchors.empty()) return result;

  const auto pairs = pair_with_same_class(dataset, anchors, rng);
  std::vector<MixMask> masks;
  masks.reserve(anchors.size());
  for (const int64_t a : anchors) {
    masks.push_back(augmenter.masks->sample(a, rng));
    if (masks.back().all_zero() || masks.back().all_one()) ++result.degenerate;
  }
  const auto x1 = images.index_select(0, torch::tensor(rows, torch::kInt64));
  const auto x2 = images_to_tensor(dataset, pairs.second);
  const auto chimeras = augmenter.mixer->mix(x1, x2, masks);
  result.images = images.clone();
  result.images.index_copy_(0, torch::tensor(rows, torch::kInt64), chimeras.to(images.dtype()));
  result.replaced = static_cast<int64_t>(rows.size());
  return result;
}

}  // namespace chimeramix
