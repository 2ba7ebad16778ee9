#include "chimeramix/discriminator.hpp"

#include "chimeramix/errors.hpp"
#include "chimeramix/generator.hpp"

namespace chimeramix {

namespace nn = torch::nn;

void DiscriminatorConfig::validate() const {
  if (block_channels.empty()) throw InvalidArgument("discriminator needs at least one block");
  for (const auto c : block_channels) {
    if (c < 1) throw InvalidArgument("discriminator block channels must be >= 1");
  }
  if (kernel < 1 || stride < 1 || padding < 0 || head_kernel < 1) {
    throw InvalidArgument("discriminator kernel/stride/padding out of range");
  }
  if (channels < 1) throw InvalidArgument("discriminator channels must be >= 1");
}

int64_t DiscriminatorConfig::output_size(int64_t input) const {
  int64_t size = input;
  for (size_t i = 0; i < block_channels.size(); ++i) {
    if (size + 2 * padding < kernel) return 0;
    size = (size + 2 * padding - kernel) / stride + 1;
  }
  return size - head_kernel + 1;
}

int64_t DiscriminatorConfig::min_input_size() const {
  int64_t input = 1;
  while (output_size(input) < 1) ++input;
  return input;
}

Json DiscriminatorConfig::to_json() const {
  return Json{{"block_channels", block_channels},
              {"kernel", kernel},
              {"stride", stride},
              {"padding", padding},
              {"head_kernel", head_kernel},
              {"norm_first_block", norm_first_block},
              {"leaky_slope", leaky_slope},
              {"channels", channels}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const JsonReader& reader) {
  DiscriminatorConfig c;
  c.block_channels = reader.get_or<std::vector<int64_t>>("block_channels", c.block_channels);
  c.kernel = reader.get_or<int64_t>("kernel", c.kernel);
  c.stride = reader.get_or<int64_t>("stride", c.stride);
  c.padding = reader.get_or<int64_t>("padding", c.padding);
  c.head_kernel = reader.get_or<int64_t>("head_kernel", c.head_kernel);
  c.norm_first_block = reader.get_or<bool>("norm_first_block", c.norm_first_block);
  c.leaky_slope = reader.get_or<double>("leaky_slope", c.leaky_slope);
  c.channels = reader.get_or<int64_t>("channels", c.channels);
  reader.reject_unknown();
  return c;
}

DiscriminatorImpl::DiscriminatorImpl(DiscriminatorConfig config) : config_(std::move(config)) {
  config_.validate();
  net_ = nn::Sequential();
  int64_t in = config_.channels;
  for (size_t i = 0; i < config_.block_channels.size(); ++i) {
    const int64_t out = config_.block_channels[i];
    net_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, config_.kernel)
                                   .stride(config_.stride)
                                   .padding(config_.padding)));
    if (i > 0 || config_.norm_first_block) {
      net_->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(false)));
    }
    net_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(config_.leaky_slope)));
    in = out;
  }
  net_->push_back(nn::Conv2d(nn::Conv2dOptions(in, 1, config_.head_kernel)));
  net_->push_back(nn::Sigmoid());
  register_module("net", net_);
  init_conv_weights(*this);
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != config_.channels) {
    throw InvalidArgument("discriminate expects N x " + std::to_string(config_.channels) +
                          " x H x W input");
  }
  const int64_t smallest = std::min(x.size(2), x.size(3));
  if (config_.output_size(smallest) < 1) {
    throw InvalidArgument("discriminator input " + std::to_string(x.size(2)) + "x" +
                          std::to_string(x.size(3)) + " is smaller than its receptive field (" +
                          std::to_string(config_.min_input_size()) + " pixels)");
  }
  return net_->forward(x);
}

}  // namespace chimeramix
