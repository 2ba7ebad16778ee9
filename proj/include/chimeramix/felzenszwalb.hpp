#pragma once

#include <cstdint>
#include <vector>

#include "chimeramix/dataset.hpp"

namespace chimeramix {

enum class Connectivity { kFour = 4, kEight = 8 };

struct FelzParams {
  double scale = 60.0;  // merge threshold constant k
  int64_t min_size = 60;
  double sigma = 0.8;   // Gaussian pre-smoothing std in pixels
  Connectivity connectivity = Connectivity::kEight;

  void validate() const;
  friend bool operator==(const FelzParams&, const FelzParams&) = default;
};

/// Dense per-pixel region labels 0..region_count-1.
struct SegmentationMap {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<int32_t> labels;  // row-major
  int64_t region_count = 0;

  int32_t at(int64_t y, int64_t x) const { return labels[static_cast<size_t>(y * width + x)]; }
  std::vector<int64_t> region_sizes() const;
};

/// Graph-based segmentation: Gaussian smoothing, grid graph with Euclidean color
/// distances, Kruskal-order merging with the scale/|C| tolerance, then a pass that
/// folds components below min_size into a neighbor along the cheapest edge.
SegmentationMap felzenszwalb_segment(const ImageView& image, const FelzParams& params);

/// Separable Gaussian blur per channel (radius ceil(4 sigma), clamped borders).
/// sigma == 0 returns the input unchanged.
std::vector<float> gaussian_smooth(const ImageView& image, double sigma);

}  // namespace chimeramix
