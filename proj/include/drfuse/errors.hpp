// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace drfuse {

struct InvalidInputError : std::runtime_error {
  explicit InvalidInputError(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidMaskError : std::runtime_error {
  explicit InvalidMaskError(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidConfigError : std::runtime_error {
  explicit InvalidConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainingDivergenceError : std::runtime_error {
  explicit TrainingDivergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct UndefinedMetricError : std::runtime_error {
  explicit UndefinedMetricError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace drfuse
