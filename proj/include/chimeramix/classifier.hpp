#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>

#include "chimeramix/json_reader.hpp"

namespace chimeramix {

enum class ClassifierArch { kTinyResNet, kWideResNet, kResNet50 };

std::string to_string(ClassifierArch arch);
ClassifierArch parse_classifier_arch(const std::string& name);

struct ClassifierConfig {
  ClassifierArch arch = ClassifierArch::kWideResNet;
  int64_t num_classes = 10;
  int64_t channels = 3;
  int64_t wrn_depth = 16;  // WideResNet-depth-width
  int64_t wrn_width = 8;
  int64_t tiny_width = 16;
  double dropout = 0.0;

  void validate() const;
  Json to_json() const;
  static ClassifierConfig from_json(const JsonReader& reader);
  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

/// Image classifier taking N x C x H x W inputs in [-1, 1] and returning logits.
class ClassifierImpl : public torch::nn::Module {
 public:
  explicit ClassifierImpl(ClassifierConfig config);
  torch::Tensor forward(const torch::Tensor& x);
  const ClassifierConfig& config() const { return config_; }

 private:
  ClassifierConfig config_;
  torch::nn::Sequential features_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(Classifier);

void save_classifier(const Classifier& model, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace chimeramix
