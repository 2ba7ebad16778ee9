#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace chimeramix {

struct ImageShape {
  int64_t height = 0;
  int64_t width = 0;
  int64_t channels = 0;

  int64_t pixels() const { return height * width; }
  int64_t elements() const { return height * width * channels; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

std::string to_string(const ImageShape& shape);

/// Read-only view of one image stored as channel planes (C x H x W), row-major.
struct ImageView {
  std::span<const float> data;
  ImageShape shape;

  float at(int64_t c, int64_t y, int64_t x) const {
    return data[static_cast<size_t>((c * shape.height + y) * shape.width + x)];
  }
};

/// Images with class labels. Intensities live in [0, 1]; storage is N x C x H x W.
class LabeledImageDataset {
 public:
  LabeledImageDataset() = default;

  /// Validates every invariant: equal lengths, N >= 1, labels in [0, K),
  /// pixel buffer size N * C * H * W.
  LabeledImageDataset(std::string name, ImageShape shape, int64_t class_count,
                      std::vector<float> pixels, std::vector<int64_t> labels);

  const std::string& name() const { return name_; }
  const ImageShape& shape() const { return shape_; }
  int64_t class_count() const { return class_count_; }
  int64_t size() const { return static_cast<int64_t>(labels_.size()); }

  ImageView image(int64_t index) const;
  int64_t label(int64_t index) const { return labels_.at(static_cast<size_t>(index)); }
  const std::vector<int64_t>& labels() const { return labels_; }
  std::span<const float> pixels() const { return pixels_; }

  /// Dataset restricted to `indices`, in that order.
  LabeledImageDataset select(std::span<const int64_t> indices) const;

  /// Indices of every sample, grouped per class, in dataset order.
  std::vector<std::vector<int64_t>> indices_by_class() const;

 private:
  std::string name_;
  ImageShape shape_;
  int64_t class_count_ = 0;
  std::vector<float> pixels_;
  std::vector<int64_t> labels_;
};

inline constexpr int64_t kCifarSide = 32;
inline constexpr int64_t kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;  // 3073
inline constexpr int64_t kCifarMaxLabel = 10;

/// CIFAR binary layout: records of 1 label byte + 3 channel planes of 32x32.
LabeledImageDataset load_cifar_binary(const std::filesystem::path& path);

/// Inverse of load_cifar_binary; intensities are rounded to the nearest byte.
void write_cifar_binary(const LabeledImageDataset& dataset, const std::filesystem::path& path);

/// One subdirectory per class (lexicographic order gives the label), PNG files inside.
LabeledImageDataset load_image_folder(const std::filesystem::path& root);

/// Per-class uniform subsample without replacement.
struct Subsample {
  LabeledImageDataset dataset;
  std::vector<int64_t> source_indices;  // index into the parent dataset, per sample
};

Subsample subsample_per_class(const LabeledImageDataset& dataset, int64_t per_class,
                              uint64_t seed);

/// "index<TAB>label" per line, one line per selected sample.
void write_subsample_manifest(const Subsample& subsample, const std::filesystem::path& path);
std::vector<std::pair<int64_t, int64_t>> read_subsample_manifest(
    const std::filesystem::path& path);

/// max(1, floor(base / samples_per_class)).
int64_t repetition_factor(int64_t samples_per_class, int64_t base);

/// Indices of an epoch over the dataset repeated `repetitions` times, shuffled.
std::vector<int64_t> repeated_epoch_order(int64_t dataset_size, int64_t repetitions,
                                          std::mt19937_64& rng);

/// Anchors plus same-class partners. first/second hold dataset indices.
struct PairBatch {
  std::vector<int64_t> first;
  std::vector<int64_t> second;
  std::vector<int64_t> label;

  int64_t size() const { return static_cast<int64_t>(first.size()); }
};

/// Draws a uniform partner from the anchor's class for every anchor.
/// A class with a single sample pairs the image with itself.
PairBatch pair_with_same_class(const LabeledImageDataset& dataset,
                               std::span<const int64_t> anchors, std::mt19937_64& rng);

/// `batch` anchors drawn uniformly from the dataset, each with a same-class partner.
PairBatch sample_same_class_pairs(const LabeledImageDataset& dataset, int64_t batch,
                                  std::mt19937_64& rng);

/// Uniform integer in [0, n) from a 64-bit engine; platform independent.
int64_t uniform_index(std::mt19937_64& rng, int64_t n);

/// Uniform real in [0, 1) from a 64-bit engine; platform independent.
double uniform_unit(std::mt19937_64& rng);
/// Standard normal draw (Box-Muller over uniform_unit).
double standard_normal(std::mt19937_64& rng);

}  // namespace chimeramix
