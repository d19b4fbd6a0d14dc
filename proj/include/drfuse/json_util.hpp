// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "drfuse/errors.hpp"

namespace drfuse {

// Configs reject unknown keys so typos fail loudly before any work starts.
inline void check_known_keys(const nlohmann::json& obj,
                             const std::vector<std::string>& known,
                             const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& k : known) ok = ok || it.key() == k;
    if (!ok) throw InvalidConfigError("unknown key '" + it.key() + "' in " + context);
  }
}

template <typename T>
T json_get(const nlohmann::json& obj, const std::string& key, const T& fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfigError("bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T json_require(const nlohmann::json& obj, const std::string& key,
               const std::string& context) {
  if (!obj.contains(key))
    throw InvalidConfigError("missing key '" + key + "' in " + context);
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfigError("bad value for '" + key + "' in " + context + ": " + e.what());
  }
}

}  // namespace drfuse
