#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "chimeramix/discriminator.hpp"
#include "chimeramix/generator.hpp"
#include "chimeramix/json_reader.hpp"

namespace chimeramix {

/// Versioned container: config echo plus named tensors.
///
/// Layout (little-endian):
///   magic "CMXCKPT\0" | u32 version | u64 config length | config JSON (compact, sorted keys) |
///   u64 tensor count | per tensor: u32 name length | name | u8 dtype (0 f32, 1 f64, 2 i64) |
///   u32 ndim | i64 dims[ndim] | raw contiguous data
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  Json config;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  const torch::Tensor* find(const std::string& name) const;
};

/// Field-level differences between two config echoes, one "path: expected X, found Y"
/// line per differing leaf.
std::vector<std::string> config_diff(const Json& expected, const Json& actual,
                                     const std::string& prefix = "");

/// Parameters and buffers of `module`, names prefixed with `prefix`.
void append_module_state(const torch::nn::Module& module, const std::string& prefix,
                         std::vector<std::pair<std::string, torch::Tensor>>& out);

/// Copies every parameter and buffer of `module` from the checkpoint; a missing name or
/// shape mismatch is a FormatError.
void restore_module_state(torch::nn::Module& module, const std::string& prefix,
                          const Checkpoint& checkpoint);

/// Generator f/g together with its discriminator D.
struct GeneratorBundle {
  GeneratorConfig generator_config;
  DiscriminatorConfig discriminator_config;
  Generator generator{nullptr};
  Discriminator discriminator{nullptr};

  static GeneratorBundle create(const GeneratorConfig& gen, const DiscriminatorConfig& disc);

  Json config_echo() const;
  void save(const std::filesystem::path& path) const;

  /// Rebuilds the bundle from the config stored in the file.
  static GeneratorBundle load(const std::filesystem::path& path);

  /// Rejects a file whose stored config differs from the expected one; the ConfigError
  /// lists every differing field.
  static GeneratorBundle load(const std::filesystem::path& path, const GeneratorConfig& gen,
                              const DiscriminatorConfig& disc);
};

}  // namespace chimeramix
