#pragma once

#include <json.hpp>
#include <set>
#include <string>
#include <utility>

#include "chimeramix/errors.hpp"

namespace chimeramix {

using Json = nlohmann::json;

/// Typed access to a JSON object that reports failures with the full key path.
class JsonReader {
 public:
  JsonReader(const Json& node, std::string path) : node_(&node), path_(std::move(path)) {
    if (!node_->is_object()) {
      throw ConfigError(display_path() + ": expected an object");
    }
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return node_->contains(key); }

  template <typename T>
  T get(const std::string& key) const {
    seen_.insert(key);
    if (!node_->contains(key)) {
      throw ConfigError(join(key) + ": missing required key");
    }
    return convert<T>(node_->at(key), key);
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) const {
    seen_.insert(key);
    if (!node_->contains(key)) return fallback;
    return convert<T>(node_->at(key), key);
  }

  JsonReader child(const std::string& key) const {
    seen_.insert(key);
    if (!node_->contains(key)) {
      throw ConfigError(join(key) + ": missing required key");
    }
    return {node_->at(key), join(key)};
  }

  /// Throws on keys that were never read.
  void reject_unknown() const {
    for (const auto& [key, value] : node_->items()) {
      if (!seen_.count(key)) {
        throw ConfigError(join(key) + ": unknown key");
      }
    }
  }

  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  std::string display_path() const { return path_.empty() ? "<root>" : path_; }

  template <typename T>
  T convert(const Json& value, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!value.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!value.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!value.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!value.is_string()) throw ConfigError("");
      }
      return value.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(join(key) + ": wrong type (found " + std::string(value.type_name()) + ")");
    }
  }

  const Json* node_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

}  // namespace chimeramix
