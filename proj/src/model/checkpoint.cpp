#include "chimeramix/checkpoint.hpp"

#include <array>
#include <fstream>

#include "chimeramix/errors.hpp"

namespace chimeramix {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'M', 'X', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw FormatError(path.string() + ": truncated checkpoint");
  }
  return value;
}

uint8_t dtype_code(torch::ScalarType type) {
  switch (type) {
    case torch::kFloat32:
      return 0;
    case torch::kFloat64:
      return 1;
    case torch::kInt64:
      return 2;
    default:
      throw InvalidArgument(std::string("checkpoint cannot store dtype ") +
                            c10::toString(type));
  }
}

torch::ScalarType dtype_from_code(uint8_t code, const std::filesystem::path& path) {
  switch (code) {
    case 0:
      return torch::kFloat32;
    case 1:
      return torch::kFloat64;
    case 2:
      return torch::kInt64;
    default:
      throw FormatError(path.string() + ": unknown dtype code " + std::to_string(code));
  }
}

std::string compact(const Json& value) { return value.dump(); }

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put(out, kVersion);
  const std::string text = config.dump();
  put(out, static_cast<uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put(out, static_cast<uint64_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto value = tensor.detach().cpu().contiguous();
    put(out, dtype_code(value.scalar_type()));
    put(out, static_cast<uint32_t>(value.dim()));
    for (const auto d : value.sizes()) put(out, static_cast<int64_t>(d));
    out.write(static_cast<const char*>(value.data_ptr()),
              static_cast<std::streamsize>(value.numel() * value.element_size()));
  }
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  }
  const auto version = get<uint32_t>(in, path);
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  Checkpoint ckpt;
  const auto text_size = get<uint64_t>(in, path);
  std::string text(text_size, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(text_size))) {
    throw FormatError(path.string() + ": truncated config block");
  }
  try {
    ckpt.config = Json::parse(text);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": invalid config block: " + e.what());
  }
  const auto count = get<uint64_t>(in, path);
  for (uint64_t i = 0; i < count; ++i) {
    const auto name_size = get<uint32_t>(in, path);
    std::string name(name_size, '\0');
    if (!in.read(name.data(), name_size)) throw FormatError(path.string() + ": truncated name");
    const auto type = dtype_from_code(get<uint8_t>(in, path), path);
    const auto ndim = get<uint32_t>(in, path);
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) {
      d = get<int64_t>(in, path);
      if (d < 0) throw FormatError(path.string() + ": negative dimension in " + name);
    }
    auto tensor = torch::empty(dims, torch::TensorOptions().dtype(type));
    if (!in.read(static_cast<char*>(tensor.data_ptr()),
                 static_cast<std::streamsize>(tensor.numel() * tensor.element_size()))) {
      throw FormatError(path.string() + ": truncated data for " + name);
    }
    ckpt.tensors.emplace_back(std::move(name), std::move(tensor));
  }
  return ckpt;
}

const torch::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::vector<std::string> config_diff(const Json& expected, const Json& actual,
                                     const std::string& prefix) {
  std::vector<std::string> diffs;
  auto path_of = [&](const std::string& key) { return prefix.empty() ? key : prefix + "." + key; };
  if (expected.is_object() && actual.is_object()) {
    for (const auto& [key, value] : expected.items()) {
      if (!actual.contains(key)) {
        diffs.push_back(path_of(key) + ": expected " + compact(value) + ", found <missing>");
      } else {
        auto sub = config_diff(value, actual.at(key), path_of(key));
        diffs.insert(diffs.end(), sub.begin(), sub.end());
      }
    }
    for (const auto& [key, value] : actual.items()) {
      if (!expected.contains(key)) {
        diffs.push_back(path_of(key) + ": expected <missing>, found " + compact(value));
      }
    }
  } else if (expected != actual) {
    diffs.push_back((prefix.empty() ? "<root>" : prefix) + ": expected " + compact(expected) +
                    ", found " + compact(actual));
  }
  return diffs;
}

void append_module_state(const torch::nn::Module& module, const std::string& prefix,
                         std::vector<std::pair<std::string, torch::Tensor>>& out) {
  for (const auto& item : module.named_parameters()) {
    out.emplace_back(prefix + item.key(), item.value().detach().clone());
  }
  for (const auto& item : module.named_buffers()) {
    out.emplace_back(prefix + item.key(), item.value().detach().clone());
  }
}

void restore_module_state(torch::nn::Module& module, const std::string& prefix,
                          const Checkpoint& checkpoint) {
  torch::NoGradGuard no_grad;
  auto copy_into = [&](const std::string& name, torch::Tensor& target) {
    const auto* stored = checkpoint.find(prefix + name);
    if (stored == nullptr) {
      throw FormatError("checkpoint is missing tensor '" + prefix + name + "'");
    }
    if (!stored->sizes().equals(target.sizes())) {
      throw FormatError("checkpoint tensor '" + prefix + name + "' has a different shape");
    }
    target.copy_(*stored);
  };
  for (auto& item : module.named_parameters()) copy_into(item.key(), item.value());
  for (auto& item : module.named_buffers()) copy_into(item.key(), item.value());
}

GeneratorBundle GeneratorBundle::create(const GeneratorConfig& gen,
                                        const DiscriminatorConfig& disc) {
  GeneratorBundle bundle;
  bundle.generator_config = gen;
  bundle.discriminator_config = disc;
  bundle.generator = Generator(gen);
  bundle.discriminator = Discriminator(disc);
  return bundle;
}

Json GeneratorBundle::config_echo() const {
  return Json{{"kind", "generator_bundle"},
              {"generator", generator_config.to_json()},
              {"discriminator", discriminator_config.to_json()}};
}

void GeneratorBundle::save(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  ckpt.config = config_echo();
  append_module_state(*generator, "generator.", ckpt.tensors);
  append_module_state(*discriminator, "discriminator.", ckpt.tensors);
  ckpt.save(path);
}

namespace {

GeneratorBundle bundle_from_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (!ckpt.config.is_object() || ckpt.config.value("kind", "") != "generator_bundle") {
    throw FormatError(path.string() + ": not a generator checkpoint");
  }
  const JsonReader root(ckpt.config, "");
  auto bundle = GeneratorBundle::create(GeneratorConfig::from_json(root.child("generator")),
                                        DiscriminatorConfig::from_json(root.child("discriminator")));
  restore_module_state(*bundle.generator, "generator.", ckpt);
  restore_module_state(*bundle.discriminator, "discriminator.", ckpt);
  return bundle;
}

}  // namespace

GeneratorBundle GeneratorBundle::load(const std::filesystem::path& path) {
  return bundle_from_checkpoint(Checkpoint::load(path), path);
}

GeneratorBundle GeneratorBundle::load(const std::filesystem::path& path,
                                      const GeneratorConfig& gen,
                                      const DiscriminatorConfig& disc) {
  const auto ckpt = Checkpoint::load(path);
  GeneratorBundle expected;
  expected.generator_config = gen;
  expected.discriminator_config = disc;
  const auto diffs = config_diff(expected.config_echo(), ckpt.config);
  if (!diffs.empty()) {
    std::string message = path.string() + ": checkpoint config mismatch";
    for (const auto& d : diffs) message += "\n  " + d;
    throw ConfigError(message);
  }
  return bundle_from_checkpoint(ckpt, path);
}

}  // namespace chimeramix
