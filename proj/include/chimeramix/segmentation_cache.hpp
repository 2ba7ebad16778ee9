#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <unordered_map>
#include <vector>

#include "chimeramix/dataset.hpp"
#include "chimeramix/felzenszwalb.hpp"

namespace chimeramix {

/// FNV-1a over the shape and the raw float bytes of an image.
uint64_t image_hash(const ImageView& image);

/// Segmentations keyed by image hash, all computed with one parameter set.
///
/// File layout (little-endian):
///   magic "CMXSEGC\0" | u32 version | f64 scale | i64 min_size | f64 sigma |
///   i32 connectivity | u64 entry count |
///   per entry: u64 hash | i64 height | i64 width | i64 region_count | i32 labels[h*w]
/// Entries are written in ascending hash order so identical caches serialize identically.
class SegmentationCache {
 public:
  static constexpr uint32_t kVersion = 1;

  explicit SegmentationCache(FelzParams params);

  const FelzParams& params() const { return params_; }
  size_t size() const { return entries_.size(); }

  const SegmentationMap& get_or_compute(const ImageView& image);
  const SegmentationMap* find(uint64_t hash) const;

  void save(const std::filesystem::path& path) const;

  /// Throws FormatError on a bad header or when the stored parameters differ from `expected`.
  static SegmentationCache load(const std::filesystem::path& path, const FelzParams& expected);

 private:
  FelzParams params_;
  std::unordered_map<uint64_t, SegmentationMap> entries_;
};

/// Segmentations for every image of a dataset, in dataset order. When `cache_path` is
/// given, a compatible cache file is reused and then rewritten with any new entries.
std::vector<SegmentationMap> segment_dataset(
    const LabeledImageDataset& dataset, const FelzParams& params,
    const std::optional<std::filesystem::path>& cache_path = std::nullopt);

}  // namespace chimeramix
