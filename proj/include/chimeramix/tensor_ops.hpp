#pragma once

#include <torch/torch.h>

#include <span>
#include <vector>

#include "chimeramix/dataset.hpp"
#include "chimeramix/masks.hpp"

namespace chimeramix {

/// Batch of dataset images as N x C x H x W float32 in [0, 1].
torch::Tensor images_to_tensor(const LabeledImageDataset& dataset,
                               std::span<const int64_t> indices);
torch::Tensor dataset_to_tensor(const LabeledImageDataset& dataset);

/// Labels of `indices` as an int64 tensor.
torch::Tensor labels_to_tensor(const LabeledImageDataset& dataset,
                               std::span<const int64_t> indices);

/// Stack of masks as B x 1 x H' x W' float32 holding 0/1.
torch::Tensor masks_to_tensor(std::span<const MixMask> masks);

/// [0, 1] -> [-1, 1] and back; model inputs/outputs live in [-1, 1].
torch::Tensor to_model_range(const torch::Tensor& unit);
torch::Tensor to_unit_range(const torch::Tensor& model);

/// Bilinear resize of an N x C x H x W batch; identity when the size already matches.
torch::Tensor resize_bilinear(const torch::Tensor& images, int64_t height, int64_t width,
                              bool antialias = false);

/// One C x H x W tensor copied out into planar storage.
std::vector<float> tensor_to_planar(const torch::Tensor& image);

/// Dataset built from an N x C x H x W tensor in [0, 1].
LabeledImageDataset tensor_to_dataset(const std::string& name, const torch::Tensor& images,
                                      std::vector<int64_t> labels, int64_t class_count);

}  // namespace chimeramix
