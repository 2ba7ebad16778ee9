#include "chimeramix/tensor_ops.hpp"

#include "chimeramix/errors.hpp"

namespace chimeramix {

torch::Tensor images_to_tensor(const LabeledImageDataset& dataset,
                               std::span<const int64_t> indices) {
  const auto& s = dataset.shape();
  auto out = torch::empty({static_cast<int64_t>(indices.size()), s.channels, s.height, s.width},
                          torch::kFloat32);
  float* dst = out.data_ptr<float>();
  for (size_t i = 0; i < indices.size(); ++i) {
    const auto view = dataset.image(indices[i]);
    std::copy(view.data.begin(), view.data.end(), dst + i * view.data.size());
  }
  return out;
}

torch::Tensor dataset_to_tensor(const LabeledImageDataset& dataset) {
  std::vector<int64_t> all(static_cast<size_t>(dataset.size()));
  for (int64_t i = 0; i < dataset.size(); ++i) all[static_cast<size_t>(i)] = i;
  return images_to_tensor(dataset, all);
}

torch::Tensor labels_to_tensor(const LabeledImageDataset& dataset,
                               std::span<const int64_t> indices) {
  auto out = torch::empty({static_cast<int64_t>(indices.size())}, torch::kInt64);
  auto* dst = out.data_ptr<int64_t>();
  for (size_t i = 0; i < indices.size(); ++i) dst[i] = dataset.label(indices[i]);
  return out;
}

torch::Tensor masks_to_tensor(std::span<const MixMask> masks) {
  if (masks.empty()) {
    throw InvalidArgument("masks_to_tensor needs at least one mask");
  }
  const int64_t h = masks.front().height;
  const int64_t w = masks.front().width;
  auto out = torch::empty({static_cast<int64_t>(masks.size()), 1, h, w}, torch::kFloat32);
  float* dst = out.data_ptr<float>();
  for (size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].height != h || masks[i].width != w) {
      throw InvalidArgument("all masks in a batch must share one size");
    }
    for (size_t k = 0; k < masks[i].values.size(); ++k) {
      dst[i * h * w + k] = static_cast<float>(masks[i].values[k]);
    }
  }
  return out;
}

torch::Tensor to_model_range(const torch::Tensor& unit) { return unit * 2.0 - 1.0; }

torch::Tensor to_unit_range(const torch::Tensor& model) { return (model + 1.0) * 0.5; }

torch::Tensor resize_bilinear(const torch::Tensor& images, int64_t height, int64_t width,
                              bool antialias) {
  if (images.size(2) == height && images.size(3) == width) return images;
  namespace F = torch::nn::functional;
  return F::interpolate(images, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{height, width})
                                    .mode(torch::kBilinear)
                                    .align_corners(false)
                                    .antialias(antialias));
}

std::vector<float> tensor_to_planar(const torch::Tensor& image) {
  auto flat = image.detach().to(torch::kFloat32).contiguous().reshape({-1});
  const float* src = flat.data_ptr<float>();
  return {src, src + flat.numel()};
}

LabeledImageDataset tensor_to_dataset(const std::string& name, const torch::Tensor& images,
                                      std::vector<int64_t> labels, int64_t class_count) {
  if (images.dim() != 4) {
    throw InvalidArgument("tensor_to_dataset expects N x C x H x W");
  }
  const ImageShape shape{images.size(2), images.size(3), images.size(1)};
  return {name, shape, class_count, tensor_to_planar(images), std::move(labels)};
}

}  // namespace chimeramix
