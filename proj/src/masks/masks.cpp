#include "chimeramix/masks.hpp"

#include <algorithm>

#include "chimeramix/dataset.hpp"
#include "chimeramix/errors.hpp"

namespace chimeramix {

std::string to_string(MaskSource source) {
  switch (source) {
    case MaskSource::kGrid:
      return "grid";
    case MaskSource::kSegmentation:
      return "segmentation";
    case MaskSource::kConstant:
      return "constant";
  }
  return "unknown";
}

bool MixMask::all_zero() const {
  return std::all_of(values.begin(), values.end(), [](uint8_t v) { return v == 0; });
}

bool MixMask::all_one() const {
  return std::all_of(values.begin(), values.end(), [](uint8_t v) { return v == 1; });
}

MixMask MixMask::complement() const {
  MixMask out = *this;
  for (auto& v : out.values) v = static_cast<uint8_t>(1 - v);
  return out;
}

namespace {

void check_feature_size(int64_t feat_h, int64_t feat_w) {
  if (feat_h < 1 || feat_w < 1) {
    throw InvalidArgument("mask feature size must be positive, got " + std::to_string(feat_h) +
                          "x" + std::to_string(feat_w));
  }
}

}  // namespace

MixMask sample_grid_mask(int64_t grid_size, int64_t feat_h, int64_t feat_w,
                         std::mt19937_64& rng, double p) {
  check_feature_size(feat_h, feat_w);
  if (grid_size < 1 || grid_size > std::min(feat_h, feat_w)) {
    throw InvalidArgument("grid size " + std::to_string(grid_size) + " must lie in [1, " +
                          std::to_string(std::min(feat_h, feat_w)) + "]");
  }
  std::vector<uint8_t> bits(static_cast<size_t>(grid_size * grid_size));
  for (auto& b : bits) b = uniform_unit(rng) < p ? 1 : 0;

  MixMask mask{feat_h, feat_w, std::vector<uint8_t>(static_cast<size_t>(feat_h * feat_w)),
               MaskSource::kGrid};
  for (int64_t y = 0; y < feat_h; ++y) {
    const int64_t gy = y * grid_size / feat_h;
    for (int64_t x = 0; x < feat_w; ++x) {
      const int64_t gx = x * grid_size / feat_w;
      mask.values[static_cast<size_t>(y * feat_w + x)] =
          bits[static_cast<size_t>(gy * grid_size + gx)];
    }
  }
  return mask;
}

MixMask constant_mask(uint8_t value, int64_t feat_h, int64_t feat_w) {
  check_feature_size(feat_h, feat_w);
  if (value > 1) {
    throw InvalidArgument("constant mask value must be 0 or 1");
  }
  return {feat_h, feat_w, std::vector<uint8_t>(static_cast<size_t>(feat_h * feat_w), value),
          MaskSource::kConstant};
}

MixMask downsample_region_mask(const SegmentationMap& segmap,
                               const std::vector<uint8_t>& selected, int64_t feat_h,
                               int64_t feat_w) {
  check_feature_size(feat_h, feat_w);
  const int64_t h = segmap.height;
  const int64_t w = segmap.width;
  // Coordinates scaled so that both pixel and cell boundaries are integers:
  // pixel y spans [y*feat_h, (y+1)*feat_h), cell fy spans [fy*h, (fy+1)*h).
  MixMask mask{feat_h, feat_w, std::vector<uint8_t>(static_cast<size_t>(feat_h * feat_w)),
               MaskSource::kSegmentation};
  for (int64_t fy = 0; fy < feat_h; ++fy) {
    const int64_t cy0 = fy * h;
    const int64_t cy1 = (fy + 1) * h;
    for (int64_t fx = 0; fx < feat_w; ++fx) {
      const int64_t cx0 = fx * w;
      const int64_t cx1 = (fx + 1) * w;
      int64_t covered = 0;
      for (int64_t y = cy0 / feat_h; y < h && y * feat_h < cy1; ++y) {
        const int64_t oy = std::min(cy1, (y + 1) * feat_h) - std::max(cy0, y * feat_h);
        if (oy <= 0) continue;
        for (int64_t x = cx0 / feat_w; x < w && x * feat_w < cx1; ++x) {
          const int64_t ox = std::min(cx1, (x + 1) * feat_w) - std::max(cx0, x * feat_w);
          if (ox <= 0) continue;
          if (selected[static_cast<size_t>(segmap.at(y, x))]) covered += oy * ox;
        }
      }
      const int64_t total = h * w;  // area of one cell in scaled units
      mask.values[static_cast<size_t>(fy * feat_w + fx)] = 2 * covered >= total ? 1 : 0;
    }
  }
  return mask;
}

MixMask sample_seg_mask(const SegmentationMap& segmap, int64_t feat_h, int64_t feat_w,
                        std::mt19937_64& rng) {
  if (segmap.region_count < 1) {
    throw InvalidArgument("segmentation map has no regions");
  }
  const int64_t region = uniform_index(rng, segmap.region_count);
  std::vector<uint8_t> selected(static_cast<size_t>(segmap.region_count), 0);
  selected[static_cast<size_t>(region)] = 1;
  return downsample_region_mask(segmap, selected, feat_h, feat_w);
}

MixMask sample_seg_mask_per_region(const SegmentationMap& segmap, int64_t feat_h,
                                   int64_t feat_w, std::mt19937_64& rng, double p) {
  if (segmap.region_count < 1) {
    throw InvalidArgument("segmentation map has no regions");
  }
  std::vector<uint8_t> selected(static_cast<size_t>(segmap.region_count));
  for (auto& s : selected) s = uniform_unit(rng) < p ? 1 : 0;
  return downsample_region_mask(segmap, selected, feat_h, feat_w);
}

std::vector<float> upsample_mask_nearest(const MixMask& mask, int64_t height, int64_t width) {
  std::vector<float> out(static_cast<size_t>(height * width));
  for (int64_t y = 0; y < height; ++y) {
    const int64_t my = y * mask.height / height;
    for (int64_t x = 0; x < width; ++x) {
      const int64_t mx = x * mask.width / width;
      out[static_cast<size_t>(y * width + x)] = static_cast<float>(mask.at(my, mx));
    }
  }
  return out;
}

}  // namespace chimeramix
