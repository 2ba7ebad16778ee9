#pragma once

#include <torch/torch.h>

#include <vector>

#include "chimeramix/json_reader.hpp"

namespace chimeramix {

/// Patch discriminator: conv blocks with leaky ReLU (instance norm from the second
/// block on by default), then a 1-channel head with a sigmoid per patch.
struct DiscriminatorConfig {
  std::vector<int64_t> block_channels{64, 128, 256, 512};
  int64_t kernel = 4;
  int64_t stride = 1;
  int64_t padding = 0;      // per block; 0 = valid convolutions
  int64_t head_kernel = 1;  // 1x1 head keeps the block output resolution
  bool norm_first_block = false;
  double leaky_slope = 0.2;
  int64_t channels = 3;

  void validate() const;
  /// Spatial size of the score map for an input of `input` pixels; < 1 when too small.
  int64_t output_size(int64_t input) const;
  /// Smallest input side that still yields a 1x1 score map.
  int64_t min_input_size() const;

  Json to_json() const;
  static DiscriminatorConfig from_json(const JsonReader& reader);
  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(DiscriminatorConfig config);

  /// x in [-1, 1]; returns N x 1 x H_out x W_out scores in (0, 1).
  torch::Tensor forward(const torch::Tensor& x);

  const DiscriminatorConfig& config() const { return config_; }

 private:
  DiscriminatorConfig config_;
  torch::nn::Sequential net_;
};
TORCH_MODULE(Discriminator);

}  // namespace chimeramix
