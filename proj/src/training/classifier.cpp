#include "chimeramix/classifier.hpp"

#include "chimeramix/checkpoint.hpp"
#include "chimeramix/errors.hpp"

namespace chimeramix {

namespace nn = torch::nn;

std::string to_string(ClassifierArch arch) {
  switch (arch) {
    case ClassifierArch::kTinyResNet:
      return "tiny_resnet";
    case ClassifierArch::kWideResNet:
      return "wide_resnet";
    case ClassifierArch::kResNet50:
      return "resnet50";
  }
  return "unknown";
}

ClassifierArch parse_classifier_arch(const std::string& name) {
  if (name == "tiny_resnet") return ClassifierArch::kTinyResNet;
  if (name == "wide_resnet") return ClassifierArch::kWideResNet;
  if (name == "resnet50") return ClassifierArch::kResNet50;
  throw ConfigError("unknown classifier architecture '" + name +
                    "' (expected tiny_resnet, wide_resnet or resnet50)");
}

void ClassifierConfig::validate() const {
  if (num_classes < 1) throw InvalidArgument("classifier needs at least one class");
  if (channels < 1) throw InvalidArgument("classifier channels must be >= 1");
  if (arch == ClassifierArch::kWideResNet && (wrn_depth < 10 || (wrn_depth - 4) % 6 != 0)) {
    throw InvalidArgument("WideResNet depth must be 6n + 4 with n >= 1");
  }
  if (wrn_width < 1 || tiny_width < 1) throw InvalidArgument("classifier width must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must lie in [0, 1)");
}

Json ClassifierConfig::to_json() const {
  return Json{{"arch", to_string(arch)},     {"num_classes", num_classes},
              {"channels", channels},        {"wrn_depth", wrn_depth},
              {"wrn_width", wrn_width},      {"tiny_width", tiny_width},
              {"dropout", dropout}};
}

ClassifierConfig ClassifierConfig::from_json(const JsonReader& reader) {
  ClassifierConfig c;
  c.arch = parse_classifier_arch(reader.get_or<std::string>("arch", to_string(c.arch)));
  c.num_classes = reader.get_or<int64_t>("num_classes", c.num_classes);
  c.channels = reader.get_or<int64_t>("channels", c.channels);
  c.wrn_depth = reader.get_or<int64_t>("wrn_depth", c.wrn_depth);
  c.wrn_width = reader.get_or<int64_t>("wrn_width", c.wrn_width);
  c.tiny_width = reader.get_or<int64_t>("tiny_width", c.tiny_width);
  c.dropout = reader.get_or<double>("dropout", c.dropout);
  reader.reject_unknown();
  return c;
}

namespace {

nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1) {
  return nn::Conv2d(
      nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2).bias(false));
}

// Post-activation basic block.
class BasicBlockImpl : public nn::Module {
 public:
  BasicBlockImpl(int64_t in, int64_t out, int64_t stride)
      : conv1_(conv(in, out, 3, stride)),
        bn1_(out),
        conv2_(conv(out, out, 3)),
        bn2_(out) {
    register_module("conv1", conv1_);
    register_module("bn1", bn1_);
    register_module("conv2", conv2_);
    register_module("bn2", bn2_);
    if (stride != 1 || in != out) {
      shortcut_ = register_module("shortcut", nn::Sequential(conv(in, out, 1, stride),
                                                             nn::BatchNorm2d(out)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1_(conv1_(x)));
    y = bn2_(conv2_(y));
    return torch::relu(y + (shortcut_ ? shortcut_->forward(x) : x));
  }

 private:
  nn::Conv2d conv1_;
  nn::BatchNorm2d bn1_;
  nn::Conv2d conv2_;
  nn::BatchNorm2d bn2_;
  nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(BasicBlock);

// Pre-activation block of a wide residual network.
class WideBlockImpl : public nn::Module {
 public:
  WideBlockImpl(int64_t in, int64_t out, int64_t stride, double dropout)
      : bn1_(in), conv1_(conv(in, out, 3, stride)), bn2_(out), conv2_(conv(out, out, 3)),
        dropout_(dropout) {
    register_module("bn1", bn1_);
    register_module("conv1", conv1_);
    register_module("bn2", bn2_);
    register_module("conv2", conv2_);
    if (stride != 1 || in != out) {
      shortcut_ = register_module("shortcut", conv(in, out, 1, stride));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    const auto pre = torch::relu(bn1_(x));
    auto y = conv1_(pre);
    y = torch::relu(bn2_(y));
    if (dropout_ > 0.0) y = torch::dropout(y, dropout_, is_training());
    y = conv2_(y);
    return y + (shortcut_ ? shortcut_(pre) : x);
  }

 private:
  nn::BatchNorm2d bn1_;
  nn::Conv2d conv1_;
  nn::BatchNorm2d bn2_;
  nn::Conv2d conv2_;
  nn::Conv2d shortcut_{nullptr};
  double dropout_;
};
TORCH_MODULE(WideBlock);

class BottleneckImpl : public nn::Module {
 public:
  static constexpr int64_t kExpansion = 4;

  BottleneckImpl(int64_t in, int64_t width, int64_t stride)
      : conv1_(conv(in, width, 1)),
        bn1_(width),
        conv2_(conv(width, width, 3, stride)),
        bn2_(width),
        conv3_(conv(width, width * kExpansion, 1)),
        bn3_(width * kExpansion) {
    register_module("conv1", conv1_);
    register_module("bn1", bn1_);
    register_module("conv2", conv2_);
    register_module("bn2", bn2_);
    register_module("conv3", conv3_);
    register_module("bn3", bn3_);
    if (stride != 1 || in != width * kExpansion) {
      shortcut_ = register_module(
          "shortcut", nn::Sequential(conv(in, width * kExpansion, 1, stride),
                                     nn::BatchNorm2d(width * kExpansion)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1_(conv1_(x)));
    y = torch::relu(bn2_(conv2_(y)));
    y = bn3_(conv3_(y));
    return torch::relu(y + (shortcut_ ? shortcut_->forward(x) : x));
  }

 private:
  nn::Conv2d conv1_;
  nn::BatchNorm2d bn1_;
  nn::Conv2d conv2_;
  nn::BatchNorm2d bn2_;
  nn::Conv2d conv3_;
  nn::BatchNorm2d bn3_;
  nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(Bottleneck);

int64_t build_tiny(nn::Sequential& seq, const ClassifierConfig& c) {
  const int64_t w = c.tiny_width;
  seq->push_back(conv(c.channels, w, 3));
  seq->push_back(nn::BatchNorm2d(w));
  seq->push_back(nn::ReLU());
  seq->push_back(BasicBlock(w, w, 1));
  seq->push_back(BasicBlock(w, 2 * w, 2));
  return 2 * w;
}

int64_t build_wide(nn::Sequential& seq, const ClassifierConfig& c) {
  const int64_t blocks = (c.wrn_depth - 4) / 6;
  const int64_t widths[] = {16, 16 * c.wrn_width, 32 * c.wrn_width, 64 * c.wrn_width};
  seq->push_back(conv(c.channels, widths[0], 3));
  int64_t in = widths[0];
  for (int group = 0; group < 3; ++group) {
    for (int64_t b = 0; b < blocks; ++b) {
      const int64_t stride = (group > 0 && b == 0) ? 2 : 1;
      seq->push_back(WideBlock(in, widths[group + 1], stride, c.dropout));
      in = widths[group + 1];
    }
  }
  seq->push_back(nn::BatchNorm2d(in));
  seq->push_back(nn::ReLU());
  return in;
}

int64_t build_resnet50(nn::Sequential& seq, const ClassifierConfig& c) {
  seq->push_back(nn::Conv2d(nn::Conv2dOptions(c.channels, 64, 7).stride(2).padding(3).bias(false)));
  seq->push_back(nn::BatchNorm2d(64));
  seq->push_back(nn::ReLU());
  seq->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
  const int64_t layers[] = {3, 4, 6, 3};
  const int64_t widths[] = {64, 128, 256, 512};
  int64_t in = 64;
  for (int stage = 0; stage < 4; ++stage) {
    for (int64_t b = 0; b < layers[stage]; ++b) {
      const int64_t stride = (stage > 0 && b == 0) ? 2 : 1;
      seq->push_back(Bottleneck(in, widths[stage], stride));
      in = widths[stage] * BottleneckImpl::kExpansion;
    }
  }
  return in;
}

}  // namespace

ClassifierImpl::ClassifierImpl(ClassifierConfig config) : config_(config) {
  config_.validate();
  features_ = nn::Sequential();
  int64_t feature_dim = 0;
  switch (config_.arch) {
    case ClassifierArch::kTinyResNet:
      feature_dim = build_tiny(features_, config_);
      break;
    case ClassifierArch::kWideResNet:
      feature_dim = build_wide(features_, config_);
      break;
    case ClassifierArch::kResNet50:
      feature_dim = build_resnet50(features_, config_);
      break;
  }
  features_->push_back(nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)));
  features_->push_back(nn::Flatten());
  head_ = nn::Linear(feature_dim, config_.num_classes);
  register_module("features", features_);
  register_module("head", head_);

  torch::NoGradGuard no_grad;
  apply([](nn::Module& m) {
    if (auto* c = m.as<nn::Conv2d>()) {
      nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanOut, torch::kReLU);
    }
  });
}

torch::Tensor ClassifierImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != config_.channels) {
    throw InvalidArgument("classifier expects N x " + std::to_string(config_.channels) +
                          " x H x W input");
  }
  return head_(features_->forward(x));
}

void save_classifier(const Classifier& model, const std::filesystem::path& path) {
  Checkpoint ckpt;
  ckpt.config = Json{{"kind", "classifier"}, {"classifier", model->config().to_json()}};
  append_module_state(*model, "", ckpt.tensors);
  ckpt.save(path);
}

Classifier load_classifier(const std::filesystem::path& path) {
  const auto ckpt = Checkpoint::load(path);
  if (!ckpt.config.is_object() || ckpt.config.value("kind", "") != "classifier") {
    throw FormatError(path.string() + ": not a classifier checkpoint");
  }
  const JsonReader root(ckpt.config, "");
  Classifier model(ClassifierConfig::from_json(root.child("classifier")));
  restore_module_state(*model, "", ckpt);
  return model;
}

}  // namespace chimeramix
