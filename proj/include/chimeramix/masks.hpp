#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "chimeramix/felzenszwalb.hpp"

namespace chimeramix {

enum class MaskSource { kGrid, kSegmentation, kConstant };

std::string to_string(MaskSource source);

/// Binary mask at feature resolution. A 1 selects the first parent's feature vector.
struct MixMask {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> values;  // row-major, entries in {0, 1}
  MaskSource source = MaskSource::kConstant;

  uint8_t at(int64_t y, int64_t x) const {
    return values[static_cast<size_t>(y * width + x)];
  }
  bool all_zero() const;
  bool all_one() const;
  /// Elementwise 1 - m; keeps the source tag.
  MixMask complement() const;
};

/// g x g Bernoulli(p) bits, nearest-upsampled to feat_h x feat_w.
MixMask sample_grid_mask(int64_t grid_size, int64_t feat_h, int64_t feat_w,
                         std::mt19937_64& rng, double p = 0.5);

MixMask constant_mask(uint8_t value, int64_t feat_h, int64_t feat_w);

/// Binary full-resolution mask (1 inside `selected`), area-averaged onto the feature
/// grid and thresholded at 0.5 with ties going to 1.
MixMask downsample_region_mask(const SegmentationMap& segmap,
                               const std::vector<uint8_t>& selected, int64_t feat_h,
                               int64_t feat_w);

/// One region chosen uniformly; its mask downsampled to the feature grid.
MixMask sample_seg_mask(const SegmentationMap& segmap, int64_t feat_h, int64_t feat_w,
                        std::mt19937_64& rng);

/// Variant where every region independently joins the mask with probability p.
MixMask sample_seg_mask_per_region(const SegmentationMap& segmap, int64_t feat_h,
                                   int64_t feat_w, std::mt19937_64& rng, double p = 0.5);

/// Nearest-neighbor upsampling of a mask to image resolution, as 0/1 floats (H x W).
std::vector<float> upsample_mask_nearest(const MixMask& mask, int64_t height, int64_t width);

}  // namespace chimeramix
