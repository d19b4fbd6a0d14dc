// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "drfuse/data.hpp"
#include "drfuse/model.hpp"
#include "drfuse/training.hpp"

namespace drfuse {

// One experiment = one config file. Every section is validated up front and
// unknown keys are rejected; the resolved form is snapshotted next to the
// outputs so a run can be reproduced from its artifacts alone.
struct ExperimentConfig {
  // dataset section: exactly one of the two
  std::string manifest_path;                 // ingest an existing dataset
  std::optional<SyntheticConfig> synthetic;  // generate one

  ModelConfig model;
  TrainConfig training;

  struct EvalSection {
    std::size_t bootstrap_iters = 1000;
    std::uint64_t bootstrap_seed = 17;
    bool matched_only = false;
  } eval;

  struct SplitSection {
    std::array<double, 3> ratios{0.7, 0.1, 0.2};
    std::uint64_t seed = 7;
  } split;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json_text() const;  // fully resolved snapshot
};

// Built-in dataset presets for the generate command: "default", "mimic-like",
// "smoke".
SyntheticConfig synthetic_preset(const std::string& name);

}  // namespace drfuse
