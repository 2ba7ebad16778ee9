#include "chimeramix/evaluation.hpp"

#include <algorithm>

#include "chimeramix/errors.hpp"
#include "chimeramix/tensor_ops.hpp"

namespace chimeramix {

torch::Tensor pixel_mix(const torch::Tensor& x1, const torch::Tensor& x2,
                        std::span<const MixMask> masks) {
  if (x1.dim() != 4 || x1.sizes() != x2.sizes()) {
    throw InvalidArgument("pixel_mix: parents must be N x C x H x W batches of equal shape");
  }
  const int64_t n = x1.size(0);
  if (static_cast<int64_t>(masks.size()) != n) {
    throw InvalidArgument("pixel_mix: " + std::to_string(masks.size()) + " masks for " +
                          std::to_string(n) + " image pairs");
  }
  const int64_t h = x1.size(2);
  const int64_t w = x1.size(3);
  auto full = torch::empty({n, 1, h, w}, torch::kFloat32);
  for (int64_t i = 0; i < n; ++i) {
    const auto up = upsample_mask_nearest(masks[static_cast<size_t>(i)], h, w);
    std::copy(up.begin(), up.end(), full[i].data_ptr<float>());
  }
  full = full.to(x1.dtype());
  return x1 * full + x2 * (1.0 - full);
}

Eigen::MatrixXd extract_features(FeatureExtractor& extractor, const torch::Tensor& images,
                                 int64_t batch_size) {
  const int64_t n = images.size(0);
  Eigen::MatrixXd out(n, extractor.dim());
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t end = std::min(n, start + batch_size);
    const auto block = extractor.extract(images.slice(0, start, end));
    if (block.cols() != extractor.dim()) {
      throw InvalidArgument("feature extractor " + extractor.id() + " changed dimension");
    }
    out.middleRows(start, end - start) = block;
  }
  return out;
}

ActivationStats dataset_stats(FeatureExtractor& extractor, const LabeledImageDataset& dataset) {
  return activation_stats(extract_features(extractor, dataset_to_tensor(dataset)));
}

double fid_between(FeatureExtractor& extractor, const LabeledImageDataset& a,
                   const LabeledImageDataset& b) {
  return fid(dataset_stats(extractor, a), dataset_stats(extractor, b));
}

torch::Tensor sample_chimeras(ChimeraMixer& mixer, const MaskSampler& masks,
                              const LabeledImageDataset& train, int64_t n_samples,
                              std::mt19937_64& rng, int64_t batch_size) {
  const auto& s = train.shape();
  auto out = torch::empty({n_samples, s.channels, s.height, s.width}, torch::kFloat32);
  for (int64_t start = 0; start < n_samples; start += batch_size) {
    const int64_t end = std::min(n_samples, start + batch_size);
    std::vector<int64_t> anchors;
    for (int64_t i = start; i < end; ++i) anchors.push_back(uniform_index(rng, train.size()));
    const auto pairs = pair_with_same_class(train, anchors, rng);
    std::vector<MixMask> batch_masks;
    for (const int64_t a : anchors) batch_masks.push_back(masks.sample(a, rng));
    out.slice(0, start, end)
        .copy_(mixer.mix(images_to_tensor(train, pairs.first),
                         images_to_tensor(train, pairs.second), batch_masks));
  }
  return out;
}

FidReport fid_report(ChimeraMixer& mixer, const MaskSampler& masks,
                     const LabeledImageDataset& train, const LabeledImageDataset& reference,
                     FeatureExtractor& extractor, int64_t n_samples, uint64_t seed,
                     int64_t batch_size) {
  if (n_samples < 2) throw InvalidArgument("fid_report needs n_samples >= 2");
  if (reference.size() < 2) throw InvalidArgument("fid_report needs >= 2 reference images");
  std::mt19937_64 rng(seed);
  const auto generated = sample_chimeras(mixer, masks, train, n_samples, rng, batch_size);
  const auto gen_stats = activation_stats(extract_features(extractor, generated));
  const auto ref_stats = dataset_stats(extractor, reference);

  FidReport report;
  report.fid = fid(gen_stats, ref_stats);
  report.manifest = Json{{"fid", report.fid},
                         {"seed", seed},
                         {"extractor", extractor.id()},
                         {"feature_dim", extractor.dim()},
                         {"mixer", mixer.name()},
                         {"generated_count", n_samples},
                         {"reference_count", reference.size()},
                         {"reference_name", reference.name()},
                         {"train_count", train.size()},
                         {"resize_filter", "bilinear-antialias"}};
  return report;
}

}  // namespace chimeramix
