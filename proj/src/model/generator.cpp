#include "chimeramix/generator.hpp"

#include "chimeramix/errors.hpp"

namespace chimeramix {

namespace nn = torch::nn;

namespace {

std::string upsample_name(UpsampleMode mode) {
  return mode == UpsampleMode::kTransposed ? "transposed" : "resize_conv";
}

UpsampleMode parse_upsample(const std::string& name, const std::string& path) {
  if (name == "resize_conv") return UpsampleMode::kResizeConv;
  if (name == "transposed") return UpsampleMode::kTransposed;
  throw ConfigError(path + ": expected 'resize_conv' or 'transposed', got '" + name + "'");
}

nn::InstanceNorm2d instance_norm(int64_t channels) {
  return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(false));
}

void add_conv_block(nn::Sequential& seq, int64_t in, int64_t out, int64_t kernel,
                    int64_t stride, int64_t padding) {
  seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding)));
  seq->push_back(instance_norm(out));
  seq->push_back(nn::ReLU());
}

void add_upsample_block(nn::Sequential& seq, int64_t in, int64_t out, UpsampleMode mode) {
  if (mode == UpsampleMode::kTransposed) {
    seq->push_back(nn::ConvTranspose2d(
        nn::ConvTranspose2dOptions(in, out, 3).stride(2).padding(1).output_padding(1)));
  } else {
    seq->push_back(nn::Upsample(nn::UpsampleOptions()
                                    .scale_factor(std::vector<double>{2.0, 2.0})
                                    .mode(torch::kNearest)));
    seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)));
  }
  seq->push_back(instance_norm(out));
  seq->push_back(nn::ReLU());
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n_res_blocks < 0) throw InvalidArgument("generator n_res_blocks must be >= 0");
  if (mix_after_block < 0 || mix_after_block > n_res_blocks) {
    throw InvalidArgument("generator mix_after_block must lie in [0, n_res_blocks]");
  }
  if (base_channels < 1) throw InvalidArgument("generator base_channels must be >= 1");
  if (channels < 1) throw InvalidArgument("generator channels must be >= 1");
  if (input_height % 4 != 0 || input_width % 4 != 0 || input_height < 8 || input_width < 8) {
    throw InvalidArgument("generator input size " + std::to_string(input_height) + "x" +
                          std::to_string(input_width) +
                          " must be at least 8 and divisible by 4; pre-upsample the images");
  }
}

Json GeneratorConfig::to_json() const {
  return Json{{"n_res_blocks", n_res_blocks},   {"mix_after_block", mix_after_block},
              {"base_channels", base_channels}, {"input_height", input_height},
              {"input_width", input_width},     {"channels", channels},
              {"upsample", upsample_name(upsample)}};
}

GeneratorConfig GeneratorConfig::from_json(const JsonReader& reader) {
  GeneratorConfig c;
  c.n_res_blocks = reader.get_or<int64_t>("n_res_blocks", c.n_res_blocks);
  c.mix_after_block = reader.get_or<int64_t>("mix_after_block", c.mix_after_block);
  c.base_channels = reader.get_or<int64_t>("base_channels", c.base_channels);
  c.input_height = reader.get_or<int64_t>("input_height", c.input_height);
  c.input_width = reader.get_or<int64_t>("input_width", c.input_width);
  c.channels = reader.get_or<int64_t>("channels", c.channels);
  c.upsample = parse_upsample(reader.get_or<std::string>("upsample", upsample_name(c.upsample)),
                              reader.join("upsample"));
  reader.reject_unknown();
  return c;
}

ResidualBlockImpl::ResidualBlockImpl(int64_t channels) {
  body_ = nn::Sequential(
      nn::ReflectionPad2d(1), nn::Conv2d(nn::Conv2dOptions(channels, channels, 3)),
      instance_norm(channels), nn::ReLU(), nn::ReflectionPad2d(1),
      nn::Conv2d(nn::Conv2dOptions(channels, channels, 3)), instance_norm(channels));
  register_module("body", body_);
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + body_->forward(x); }

GeneratorImpl::GeneratorImpl(GeneratorConfig config) : config_(config) {
  config_.validate();
  const int64_t b = config_.base_channels;

  encoder_ = nn::Sequential();
  encoder_->push_back(nn::ReflectionPad2d(3));
  add_conv_block(encoder_, config_.channels, b, 7, 1, 0);
  add_conv_block(encoder_, b, 2 * b, 3, 2, 1);
  add_conv_block(encoder_, 2 * b, 4 * b, 3, 2, 1);
  for (int64_t i = 0; i < config_.mix_after_block; ++i) encoder_->push_back(ResidualBlock(4 * b));

  decoder_ = nn::Sequential();
  for (int64_t i = config_.mix_after_block; i < config_.n_res_blocks; ++i) {
    decoder_->push_back(ResidualBlock(4 * b));
  }
  add_upsample_block(decoder_, 4 * b, 2 * b, config_.upsample);
  add_upsample_block(decoder_, 2 * b, b, config_.upsample);
  decoder_->push_back(nn::ReflectionPad2d(3));
  decoder_->push_back(nn::Conv2d(nn::Conv2dOptions(b, config_.channels, 7)));
  decoder_->push_back(nn::Tanh());

  register_module("encoder", encoder_);
  register_module("decoder", decoder_);
  init_conv_weights(*this);
}

torch::Tensor GeneratorImpl::encode(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != config_.channels) {
    throw InvalidArgument("encode expects N x " + std::to_string(config_.channels) +
                          " x H x W input");
  }
  if (x.size(2) % 4 != 0 || x.size(3) % 4 != 0 || x.size(2) < 8 || x.size(3) < 8) {
    throw InvalidArgument("encode input " + std::to_string(x.size(2)) + "x" +
                          std::to_string(x.size(3)) +
                          " must be at least 8 and divisible by 4; pre-upsample the images");
  }
  return encoder_->forward(x);
}

torch::Tensor GeneratorImpl::decode(const torch::Tensor& features) {
  if (features.dim() != 4 || features.size(1) != config_.feature_channels()) {
    throw InvalidArgument("decode expects N x " + std::to_string(config_.feature_channels()) +
                          " x H' x W' features");
  }
  return decoder_->forward(features);
}

torch::Tensor GeneratorImpl::generate(const torch::Tensor& x1, const torch::Tensor& x2,
                                      const torch::Tensor& mask) {
  if (!x1.sizes().equals(x2.sizes())) {
    throw InvalidArgument("generate: parents must have identical shapes");
  }
  const auto both = encode(torch::cat({x1, x2}, 0));
  const auto parts = both.chunk(2, 0);
  return decode(mix_features(parts[0], parts[1], mask));
}

torch::Tensor mix_features(const torch::Tensor& e1, const torch::Tensor& e2,
                           const torch::Tensor& mask) {
  if (!e1.sizes().equals(e2.sizes())) {
    throw InvalidArgument("mix_features: feature shapes differ");
  }
  if (e1.dim() != 4) {
    throw InvalidArgument("mix_features expects B x C' x H' x W' features");
  }
  auto m = mask;
  if (m.dim() == 2) m = m.unsqueeze(0).unsqueeze(0);
  if (m.dim() != 4 || m.size(1) != 1 || m.size(2) != e1.size(2) || m.size(3) != e1.size(3) ||
      (m.size(0) != 1 && m.size(0) != e1.size(0))) {
    throw InvalidArgument("mix_features: mask shape does not match features " +
                          std::to_string(e1.size(2)) + "x" + std::to_string(e1.size(3)));
  }
  return torch::where(m > 0.5, e1, e2);
}

torch::Tensor generate_with(const FeatureFn& encode, const FeatureFn& decode,
                            const torch::Tensor& x1, const torch::Tensor& x2,
                            const torch::Tensor& mask) {
  return decode(mix_features(encode(x1), encode(x2), mask));
}

void init_conv_weights(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  module.apply([](nn::Module& child) {
    if (auto* conv = child.as<nn::Conv2d>()) {
      conv->weight.normal_(0.0, 0.02);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* deconv = child.as<nn::ConvTranspose2d>()) {
      deconv->weight.normal_(0.0, 0.02);
      if (deconv->bias.defined()) deconv->bias.zero_();
    }
  });
}

int64_t parameter_count(const torch::nn::Module& module) {
  int64_t total = 0;
  for (const auto& p : module.parameters()) total += p.numel();
  return total;
}

}  // namespace chimeramix
