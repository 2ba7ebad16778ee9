#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <span>

#include "chimeramix/dataset.hpp"
#include "chimeramix/feature_extractor.hpp"
#include "chimeramix/fid.hpp"
#include "chimeramix/json_reader.hpp"
#include "chimeramix/masks.hpp"
#include "chimeramix/mixers.hpp"

namespace chimeramix {

/// x1 * M + x2 * (1 - M) in pixel space, with each feature-resolution mask
/// nearest-upsampled to the image size. x1, x2: N x C x H x W; one mask per sample.
torch::Tensor pixel_mix(const torch::Tensor& x1, const torch::Tensor& x2,
                        std::span<const MixMask> masks);

/// Features of a whole image tensor, extracted in chunks.
Eigen::MatrixXd extract_features(FeatureExtractor& extractor, const torch::Tensor& images,
                                 int64_t batch_size = 256);

ActivationStats dataset_stats(FeatureExtractor& extractor, const LabeledImageDataset& dataset);

double fid_between(FeatureExtractor& extractor, const LabeledImageDataset& a,
                   const LabeledImageDataset& b);

struct FidReport {
  double fid = 0.0;
  Json manifest;
};

/// Draws n_samples chimeras from `train` (uniform anchor, uniform same-class partner,
/// fresh mask) and compares their features against `reference`.
FidReport fid_report(ChimeraMixer& mixer, const MaskSampler& masks,
                     const LabeledImageDataset& train, const LabeledImageDataset& reference,
                     FeatureExtractor& extractor, int64_t n_samples, uint64_t seed,
                     int64_t batch_size = 64);

/// Chimeras as a tensor; the draws used by fid_report.
torch::Tensor sample_chimeras(ChimeraMixer& mixer, const MaskSampler& masks,
                              const LabeledImageDataset& train, int64_t n_samples,
                              std::mt19937_64& rng, int64_t batch_size = 64);

}  // namespace chimeramix
