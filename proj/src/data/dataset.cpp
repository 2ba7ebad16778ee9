#include "chimeramix/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "chimeramix/errors.hpp"
#include "chimeramix/png_io.hpp"

namespace chimeramix {

std::string to_string(const ImageShape& shape) {
  std::ostringstream out;
  out << shape.height << "x" << shape.width << "x" << shape.channels;
  return out.str();
}

LabeledImageDataset::LabeledImageDataset(std::string name, ImageShape shape,
                                         int64_t class_count, std::vector<float> pixels,
                                         std::vector<int64_t> labels)
    : name_(std::move(name)),
      shape_(shape),
      class_count_(class_count),
      pixels_(std::move(pixels)),
      labels_(std::move(labels)) {
  if (labels_.empty()) {
    throw InvalidArgument("dataset '" + name_ + "' must contain at least one image");
  }
  if (shape_.height <= 0 || shape_.width <= 0 || shape_.channels <= 0) {
    throw InvalidArgument("dataset '" + name_ + "' has invalid image shape " +
                          to_string(shape_));
  }
  if (class_count_ <= 0) {
    throw InvalidArgument("dataset '" + name_ + "' must have at least one class");
  }
  const auto expected = static_cast<size_t>(shape_.elements()) * labels_.size();
  if (pixels_.size() != expected) {
    throw InvalidArgument("dataset '" + name_ + "': pixel buffer holds " +
                          std::to_string(pixels_.size()) + " values, expected " +
                          std::to_string(expected));
  }
  for (size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= class_count_) {
      throw InvalidArgument("dataset '" + name_ + "': label " + std::to_string(labels_[i]) +
                            " of sample " + std::to_string(i) + " outside [0, " +
                            std::to_string(class_count_) + ")");
    }
  }
}

ImageView LabeledImageDataset::image(int64_t index) const {
  if (index < 0 || index >= size()) {
    throw InvalidArgument("image index " + std::to_string(index) + " out of range");
  }
  const auto stride = static_cast<size_t>(shape_.elements());
  return {std::span<const float>(pixels_).subspan(static_cast<size_t>(index) * stride, stride),
          shape_};
}

LabeledImageDataset LabeledImageDataset::select(std::span<const int64_t> indices) const {
  std::vector<float> pixels;
  std::vector<int64_t> labels;
  pixels.reserve(indices.size() * static_cast<size_t>(shape_.elements()));
  labels.reserve(indices.size());
  for (const int64_t i : indices) {
    const auto view = image(i);
    pixels.insert(pixels.end(), view.data.begin(), view.data.end());
    labels.push_back(label(i));
  }
  return {name_, shape_, class_count_, std::move(pixels), std::move(labels)};
}

std::vector<std::vector<int64_t>> LabeledImageDataset::indices_by_class() const {
  std::vector<std::vector<int64_t>> groups(static_cast<size_t>(class_count_));
  for (int64_t i = 0; i < size(); ++i) {
    groups[static_cast<size_t>(labels_[static_cast<size_t>(i)])].push_back(i);
  }
  return groups;
}

LabeledImageDataset load_cifar_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open CIFAR binary file " + path.string());
  }
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const auto length = static_cast<int64_t>(bytes.size());
  if (length == 0 || length % kCifarRecordBytes != 0) {
    throw FormatError(path.string() + ": length " + std::to_string(length) +
                      " is not a positive multiple of the record size " +
                      std::to_string(kCifarRecordBytes) + " (1 label byte + 3072 pixel bytes)");
  }
  const int64_t count = length / kCifarRecordBytes;
  const ImageShape shape{kCifarSide, kCifarSide, 3};
  std::vector<float> pixels(static_cast<size_t>(count * shape.elements()));
  std::vector<int64_t> labels(static_cast<size_t>(count));
  for (int64_t r = 0; r < count; ++r) {
    const auto* record = bytes.data() + r * kCifarRecordBytes;
    if (record[0] >= kCifarMaxLabel) {
      throw FormatError(path.string() + ": record " + std::to_string(r) + " has label " +
                        std::to_string(record[0]) + ", expected < " +
                        std::to_string(kCifarMaxLabel));
    }
    labels[static_cast<size_t>(r)] = record[0];
    float* dst = pixels.data() + r * shape.elements();
    for (int64_t k = 0; k < shape.elements(); ++k) {
      dst[k] = static_cast<float>(record[1 + k]) / 255.0f;
    }
  }
  return {path.filename().string(), shape, kCifarMaxLabel, std::move(pixels), std::move(labels)};
}

void write_cifar_binary(const LabeledImageDataset& dataset, const std::filesystem::path& path) {
  if (dataset.shape() != ImageShape{kCifarSide, kCifarSide, 3}) {
    throw InvalidArgument("CIFAR binary requires 32x32x3 images, got " +
                          to_string(dataset.shape()));
  }
  if (dataset.class_count() > kCifarMaxLabel) {
    throw InvalidArgument("CIFAR binary stores at most 10 classes");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot write " + path.string());
  }
  std::vector<unsigned char> record(static_cast<size_t>(kCifarRecordBytes));
  for (int64_t i = 0; i < dataset.size(); ++i) {
    record[0] = static_cast<unsigned char>(dataset.label(i));
    const auto view = dataset.image(i);
    for (size_t k = 0; k < view.data.size(); ++k) {
      const float v = std::clamp(view.data[k], 0.0f, 1.0f);
      record[1 + k] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(record.data()),
              static_cast<std::streamsize>(record.size()));
  }
}

LabeledImageDataset load_image_folder(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw FormatError("image folder " + root.string() + " is not a directory");
  }
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) {
    throw FormatError("image folder " + root.string() + " has no class subdirectories");
  }

  std::optional<ImageShape> shape;
  fs::path first_file;
  std::vector<float> pixels;
  std::vector<int64_t> labels;
  for (size_t label = 0; label < class_dirs.size(); ++label) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[label])) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw FormatError("class directory " + class_dirs[label].string() +
                        " contains no PNG images");
    }
    for (const auto& file : files) {
      auto image = read_png(file);
      if (!shape) {
        shape = image.shape;
        first_file = file;
      } else if (image.shape != *shape) {
        throw FormatError("image " + file.string() + " has size " + to_string(image.shape) +
                          " but " + first_file.string() + " has " + to_string(*shape));
      }
      pixels.insert(pixels.end(), image.pixels.begin(), image.pixels.end());
      labels.push_back(static_cast<int64_t>(label));
    }
  }
  return {root.filename().string(), *shape, static_cast<int64_t>(class_dirs.size()),
          std::move(pixels), std::move(labels)};
}

int64_t uniform_index(std::mt19937_64& rng, int64_t n) {
  if (n <= 0) {
    throw InvalidArgument("uniform_index requires n > 0");
  }
  const auto range = static_cast<uint64_t>(n);
  // Rejection sampling keeps the draw exactly uniform.
  const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                         std::numeric_limits<uint64_t>::max() % range;
  uint64_t value = rng();
  while (value >= limit) value = rng();
  return static_cast<int64_t>(value % range);
}

double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

void shuffle(std::vector<int64_t>& values, std::mt19937_64& rng) {
  for (int64_t i = static_cast<int64_t>(values.size()) - 1; i > 0; --i) {
    std::swap(values[static_cast<size_t>(i)],
              values[static_cast<size_t>(uniform_index(rng, i + 1))]);
  }
}

}  // namespace

Subsample subsample_per_class(const LabeledImageDataset& dataset, int64_t per_class,
                              uint64_t seed) {
  if (per_class < 1) {
    throw InvalidArgument("samples per class must be >= 1");
  }
  std::mt19937_64 rng(seed);
  const auto groups = dataset.indices_by_class();
  std::vector<int64_t> chosen;
  for (size_t k = 0; k < groups.size(); ++k) {
    if (static_cast<int64_t>(groups[k].size()) < per_class) {
      throw InvalidArgument("class " + std::to_string(k) + " has " +
                            std::to_string(groups[k].size()) + " samples, fewer than the " +
                            std::to_string(per_class) + " requested");
    }
    auto members = groups[k];
    // Partial Fisher-Yates: the first per_class slots are a uniform sample.
    for (int64_t i = 0; i < per_class; ++i) {
      const int64_t remaining = static_cast<int64_t>(members.size()) - i;
      std::swap(members[static_cast<size_t>(i)],
                members[static_cast<size_t>(i + uniform_index(rng, remaining))]);
    }
    std::sort(members.begin(), members.begin() + per_class);
    chosen.insert(chosen.end(), members.begin(), members.begin() + per_class);
  }
  return {dataset.select(chosen), chosen};
}

void write_subsample_manifest(const Subsample& subsample, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot write manifest " + path.string());
  }
  for (size_t i = 0; i < subsample.source_indices.size(); ++i) {
    out << subsample.source_indices[i] << '\t' << subsample.dataset.label(static_cast<int64_t>(i))
        << '\n';
  }
}

std::vector<std::pair<int64_t, int64_t>> read_subsample_manifest(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot read manifest " + path.string());
  }
  std::vector<std::pair<int64_t, int64_t>> rows;
  std::string line;
  int64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream fields(line);
    int64_t index = 0;
    int64_t label = 0;
    char tab = 0;
    if (!(fields >> index) || !fields.get(tab) || tab != '\t' || !(fields >> label)) {
      throw FormatError(path.string() + ":" + std::to_string(line_number) +
                        ": expected 'index<TAB>label'");
    }
    rows.emplace_back(index, label);
  }
  return rows;
}

int64_t repetition_factor(int64_t samples_per_class, int64_t base) {
  if (samples_per_class < 1 || base < 1) {
    throw InvalidArgument("repetition_factor requires samples_per_class >= 1 and base >= 1");
  }
  return std::max<int64_t>(1, base / samples_per_class);
}

std::vector<int64_t> repeated_epoch_order(int64_t dataset_size, int64_t repetitions,
                                          std::mt19937_64& rng) {
  std::vector<int64_t> order;
  order.reserve(static_cast<size_t>(dataset_size * repetitions));
  for (int64_t r = 0; r < repetitions; ++r) {
    for (int64_t i = 0; i < dataset_size; ++i) order.push_back(i);
  }
  shuffle(order, rng);
  return order;
}

PairBatch pair_with_same_class(const LabeledImageDataset& dataset,
                               std::span<const int64_t> anchors, std::mt19937_64& rng) {
  if (dataset.size() == 0) {
    throw InvalidArgument("cannot sample pairs from an empty dataset");
  }
  const auto groups = dataset.indices_by_class();
  PairBatch batch;
  batch.first.reserve(anchors.size());
  batch.second.reserve(anchors.size());
  batch.label.reserve(anchors.size());
  for (const int64_t anchor : anchors) {
    const int64_t label = dataset.label(anchor);
    const auto& members = groups[static_cast<size_t>(label)];
    const int64_t partner =
        members[static_cast<size_t>(uniform_index(rng, static_cast<int64_t>(members.size())))];
    batch.first.push_back(anchor);
    batch.second.push_back(partner);
    batch.label.push_back(label);
  }
  return batch;
}

PairBatch sample_same_class_pairs(const LabeledImageDataset& dataset, int64_t batch,
                                  std::mt19937_64& rng) {
  if (dataset.size() == 0) {
    throw InvalidArgument("cannot sample pairs from an empty dataset");
  }
  std::vector<int64_t> anchors(static_cast<size_t>(batch));
  for (auto& a : anchors) a = uniform_index(rng, dataset.size());
  return pair_with_same_class(dataset, anchors, rng);
}

}  // namespace chimeramix
