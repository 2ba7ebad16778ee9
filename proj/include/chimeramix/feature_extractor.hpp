#pragma once

#include <Eigen/Dense>
#include <torch/script.h>
#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>

namespace chimeramix {

/// Deterministic map from an N x C x H x W batch in [0, 1] to N x d features.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual Eigen::MatrixXd extract(const torch::Tensor& images) = 0;
  virtual int64_t dim() const = 0;
  virtual std::string id() const = 0;
};

/// Images are resized (bilinear, antialiased) to side x side, flattened and passed
/// through a fixed Gaussian projection followed by tanh. Needs no external weights.
class RandomProjectionExtractor final : public FeatureExtractor {
 public:
  explicit RandomProjectionExtractor(int64_t channels = 3, int64_t dim = 64, int64_t side = 32,
                                     uint64_t seed = 0);
  Eigen::MatrixXd extract(const torch::Tensor& images) override;
  int64_t dim() const override { return dim_; }
  std::string id() const override;

 private:
  int64_t channels_;
  int64_t dim_;
  int64_t side_;
  uint64_t seed_;
  torch::Tensor projection_;  // (channels * side * side) x dim, float64
};

/// Externally supplied TorchScript module (e.g. an exported Inception-v3 pool layer).
/// Inputs are resized to side x side and passed in [0, 1]; the output is flattened
/// per sample. The feature size is probed once at load time.
class TorchScriptExtractor final : public FeatureExtractor {
 public:
  TorchScriptExtractor(const std::filesystem::path& path, int64_t side, int64_t channels = 3);
  Eigen::MatrixXd extract(const torch::Tensor& images) override;
  int64_t dim() const override { return dim_; }
  std::string id() const override;

 private:
  std::filesystem::path path_;
  int64_t side_;
  int64_t dim_ = 0;
  torch::jit::script::Module module_;
};

/// Converts an N x d tensor to a float64 Eigen matrix.
Eigen::MatrixXd tensor_to_matrix(const torch::Tensor& features);

}  // namespace chimeramix
