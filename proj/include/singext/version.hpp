#pragma once

#include <json.hpp>

namespace singext {

inline constexpr const char* kVersion = "0.1.0";

// Per-module versions embedded in every CLI report.
inline nlohmann::json module_versions() {
  return {{"singext", kVersion},   {"geometry", "0.1.0"},   {"energy", "0.1.0"},      {"averaging", "0.1.0"},
          {"cubes", "0.1.0"},      {"extension", "0.1.0"},  {"conformal", "0.1.0"},   {"diagnostics", "0.1.0"},
          {"cli", "0.1.0"}};
}

}  // namespace singext
