#include "chimeramix/feature_extractor.hpp"

#include <cmath>
#include <random>

#include "chimeramix/dataset.hpp"
#include "chimeramix/errors.hpp"
#include "chimeramix/tensor_ops.hpp"

namespace chimeramix {

Eigen::MatrixXd tensor_to_matrix(const torch::Tensor& features) {
  if (features.dim() != 2) throw InvalidArgument("features must be an N x d tensor");
  const auto f = features.to(torch::kFloat64).contiguous();
  Eigen::MatrixXd out(f.size(0), f.size(1));
  const double* src = f.data_ptr<double>();
  for (int64_t i = 0; i < f.size(0); ++i) {
    for (int64_t j = 0; j < f.size(1); ++j) out(i, j) = src[i * f.size(1) + j];
  }
  return out;
}

namespace {

torch::Tensor prepare(const torch::Tensor& images, int64_t channels, int64_t side) {
  if (images.dim() != 4 || images.size(1) != channels) {
    throw InvalidArgument("feature extractor expects N x " + std::to_string(channels) +
                          " x H x W images");
  }
  return resize_bilinear(images.to(torch::kFloat32), side, side, /*antialias=*/true);
}

}  // namespace

RandomProjectionExtractor::RandomProjectionExtractor(int64_t channels, int64_t dim,
                                                     int64_t side, uint64_t seed)
    : channels_(channels), dim_(dim), side_(side), seed_(seed) {
  if (channels < 1 || dim < 1 || side < 1) {
    throw InvalidArgument("random projection sizes must be positive");
  }
  const int64_t in = channels * side * side;
  std::mt19937_64 rng(seed);
  projection_ = torch::empty({in, dim}, torch::kFloat64);
  double* w = projection_.data_ptr<double>();
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (int64_t i = 0; i < in * dim; ++i) {
    w[i] = scale * standard_normal(rng);
  }
}

Eigen::MatrixXd RandomProjectionExtractor::extract(const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  const auto x = prepare(images, channels_, side_).to(torch::kFloat64);
  const auto centered = x.reshape({x.size(0), -1}) * 2.0 - 1.0;
  return tensor_to_matrix(torch::tanh(centered.matmul(projection_)));
}

std::string RandomProjectionExtractor::id() const {
  return "random-projection(c=" + std::to_string(channels_) + ",d=" + std::to_string(dim_) +
         ",side=" + std::to_string(side_) + ",seed=" + std::to_string(seed_) + ")";
}

TorchScriptExtractor::TorchScriptExtractor(const std::filesystem::path& path, int64_t side,
                                           int64_t channels)
    : path_(path), side_(side) {
  if (!std::filesystem::exists(path)) {
    throw InvalidArgument("feature extractor weights not found: " + path.string());
  }
  try {
    module_ = torch::jit::load(path.string());
  } catch (const c10::Error& e) {
    throw FormatError("cannot load TorchScript module " + path.string() + ": " + e.msg());
  }
  module_.eval();
  torch::NoGradGuard no_grad;
  const auto probe = module_.forward({torch::zeros({1, channels, side, side})}).toTensor();
  dim_ = probe.numel();
}

Eigen::MatrixXd TorchScriptExtractor::extract(const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  const auto x = prepare(images, images.size(1), side_);
  const auto out = module_.forward({x}).toTensor();
  return tensor_to_matrix(out.reshape({out.size(0), -1}));
}

std::string TorchScriptExtractor::id() const {
  return "torchscript(" + path_.filename().string() + ",side=" + std::to_string(side_) + ")";
}

}  // namespace chimeramix
