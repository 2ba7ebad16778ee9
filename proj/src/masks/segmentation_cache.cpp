#include "chimeramix/segmentation_cache.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>

#include "chimeramix/errors.hpp"

namespace chimeramix {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'M', 'X', 'S', 'E', 'G', 'C', '\0'};

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw FormatError(path.string() + ": truncated segmentation cache");
  }
  return value;
}

uint64_t fnv1a(uint64_t hash, const void* data, size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < bytes; ++i) {
    hash ^= p[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

}  // namespace

uint64_t image_hash(const ImageView& image) {
  uint64_t hash = 14695981039346656037ULL;
  const int64_t dims[3] = {image.shape.height, image.shape.width, image.shape.channels};
  hash = fnv1a(hash, dims, sizeof(dims));
  return fnv1a(hash, image.data.data(), image.data.size_bytes());
}

SegmentationCache::SegmentationCache(FelzParams params) : params_(params) {
  params_.validate();
}

const SegmentationMap& SegmentationCache::get_or_compute(const ImageView& image) {
  const uint64_t hash = image_hash(image);
  auto it = entries_.find(hash);
  if (it == entries_.end()) {
    it = entries_.emplace(hash, felzenszwalb_segment(image, params_)).first;
  }
  return it->second;
}

const SegmentationMap* SegmentationCache::find(uint64_t hash) const {
  const auto it = entries_.find(hash);
  return it == entries_.end() ? nullptr : &it->second;
}

void SegmentationCache::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write segmentation cache " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put(out, kVersion);
  put(out, params_.scale);
  put(out, params_.min_size);
  put(out, params_.sigma);
  put(out, static_cast<int32_t>(params_.connectivity));
  put(out, static_cast<uint64_t>(entries_.size()));

  std::vector<uint64_t> keys;
  keys.reserve(entries_.size());
  for (const auto& [hash, map] : entries_) keys.push_back(hash);
  std::sort(keys.begin(), keys.end());
  for (const uint64_t hash : keys) {
    const auto& map = entries_.at(hash);
    put(out, hash);
    put(out, map.height);
    put(out, map.width);
    put(out, map.region_count);
    out.write(reinterpret_cast<const char*>(map.labels.data()),
              static_cast<std::streamsize>(map.labels.size() * sizeof(int32_t)));
  }
}

SegmentationCache SegmentationCache::load(const std::filesystem::path& path,
                                          const FelzParams& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open segmentation cache " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError(path.string() + ": not a segmentation cache (bad magic)");
  }
  const auto version = get<uint32_t>(in, path);
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported segmentation cache version " +
                      std::to_string(version));
  }
  FelzParams stored;
  stored.scale = get<double>(in, path);
  stored.min_size = get<int64_t>(in, path);
  stored.sigma = get<double>(in, path);
  const auto connectivity = get<int32_t>(in, path);
  if (connectivity != 4 && connectivity != 8) {
    throw FormatError(path.string() + ": invalid connectivity " + std::to_string(connectivity));
  }
  stored.connectivity = static_cast<Connectivity>(connectivity);
  if (!(stored == expected)) {
    throw FormatError(path.string() + ": cache was built with different segmentation parameters");
  }
  SegmentationCache cache(stored);
  const auto count = get<uint64_t>(in, path);
  for (uint64_t i = 0; i < count; ++i) {
    const auto hash = get<uint64_t>(in, path);
    SegmentationMap map;
    map.height = get<int64_t>(in, path);
    map.width = get<int64_t>(in, path);
    map.region_count = get<int64_t>(in, path);
    if (map.height <= 0 || map.width <= 0 || map.region_count <= 0) {
      throw FormatError(path.string() + ": corrupt entry " + std::to_string(i));
    }
    map.labels.resize(static_cast<size_t>(map.height * map.width));
    if (!in.read(reinterpret_cast<char*>(map.labels.data()),
                 static_cast<std::streamsize>(map.labels.size() * sizeof(int32_t)))) {
      throw FormatError(path.string() + ": truncated segmentation cache");
    }
    cache.entries_.emplace(hash, std::move(map));
  }
  return cache;
}

std::vector<SegmentationMap> segment_dataset(
    const LabeledImageDataset& dataset, const FelzParams& params,
    const std::optional<std::filesystem::path>& cache_path) {
  SegmentationCache cache(params);
  if (cache_path && std::filesystem::exists(*cache_path)) {
    try {
      cache = SegmentationCache::load(*cache_path, params);
    } catch (const FormatError&) {
      cache = SegmentationCache(params);  // stale or foreign cache: rebuild
    }
  }
  const size_t before = cache.size();
  std::vector<SegmentationMap> maps;
  maps.reserve(static_cast<size_t>(dataset.size()));
  for (int64_t i = 0; i < dataset.size(); ++i) {
    maps.push_back(cache.get_or_compute(dataset.image(i)));
  }
  if (cache_path && (cache.size() != before || !std::filesystem::exists(*cache_path))) {
    cache.save(*cache_path);
  }
  return maps;
}

}  // namespace chimeramix
