#pragma once

#include <torch/torch.h>

#include <functional>

#include "chimeramix/json_reader.hpp"

namespace chimeramix {

enum class UpsampleMode { kResizeConv, kTransposed };

/// Encoder/decoder split of a residual image-to-image generator.
struct GeneratorConfig {
  int64_t n_res_blocks = 4;
  int64_t mix_after_block = 2;  // blocks [0, mix_after_block) belong to the encoder
  int64_t base_channels = 64;
  int64_t input_height = 64;
  int64_t input_width = 64;
  int64_t channels = 3;
  UpsampleMode upsample = UpsampleMode::kResizeConv;

  void validate() const;
  int64_t feature_height() const { return input_height / 4; }
  int64_t feature_width() const { return input_width / 4; }
  int64_t feature_channels() const { return 4 * base_channels; }

  Json to_json() const;
  static GeneratorConfig from_json(const JsonReader& reader);
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_;
};
TORCH_MODULE(ResidualBlock);

/// Encoder f: 7x7 stem, two stride-2 3x3 convolutions doubling channels, then the
/// first mix_after_block residual blocks. Decoder g: remaining residual blocks, two
/// 2x upsampling stages halving channels, a 7x7 projection to image channels and tanh.
/// Instance normalization and ReLU follow every convolution except the last.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(GeneratorConfig config);

  /// x in [-1, 1], N x C x H x W with H, W divisible by 4.
  torch::Tensor encode(const torch::Tensor& x);
  torch::Tensor decode(const torch::Tensor& features);
  /// decode(mix_features(encode(x1), encode(x2), mask)); the two parents share one
  /// encoder pass.
  torch::Tensor generate(const torch::Tensor& x1, const torch::Tensor& x2,
                         const torch::Tensor& mask);

  const GeneratorConfig& config() const { return config_; }

 private:
  GeneratorConfig config_;
  torch::nn::Sequential encoder_;
  torch::nn::Sequential decoder_;
};
TORCH_MODULE(Generator);

/// Per location, the feature vector of e1 where mask == 1 and of e2 elsewhere.
/// `mask` is B x 1 x H' x W', 1 x 1 x H' x W' or H' x W'.
torch::Tensor mix_features(const torch::Tensor& e1, const torch::Tensor& e2,
                           const torch::Tensor& mask);

using FeatureFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// The mixing pipeline with pluggable encoder and decoder.
torch::Tensor generate_with(const FeatureFn& encode, const FeatureFn& decode,
                            const torch::Tensor& x1, const torch::Tensor& x2,
                            const torch::Tensor& mask);

/// normal(0, 0.02) for convolution weights, zero biases.
void init_conv_weights(torch::nn::Module& module);

int64_t parameter_count(const torch::nn::Module& module);

}  // namespace chimeramix
