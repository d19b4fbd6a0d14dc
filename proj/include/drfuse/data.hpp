// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drfuse/tensor.hpp"

namespace drfuse {

// One patient record. EHR is always present; the image modality may be ABSENT
// (empty optional). Synthetic records carry their generating factors so the
// disentanglement probes have ground truth to regress onto.
struct SampleRecord {
  std::string id;
  Tensor ehr;                  // T x J
  std::optional<Tensor> cxr;   // channels x H x W
  std::vector<double> labels;  // 0/1, length |C|
  std::vector<double> z_shared, z_ehr, z_cxr;

  bool has_cxr() const { return cxr.has_value(); }
  bool has_factors() const { return !z_shared.empty(); }
};

enum class MissingMechanism { kMCAR, kMNAR };

struct SyntheticConfig {
  std::size_t n_samples = 5000;
  std::size_t n_classes = 8;
  std::size_t d_shared = 4;
  std::size_t d_ehr_distinct = 4;
  std::size_t d_cxr_distinct = 4;
  std::size_t seq_len = 16;     // T
  std::size_t n_features = 12;  // J
  std::size_t image_size = 16;
  double missing_rate = 0.4;
  MissingMechanism missing_mechanism = MissingMechanism::kMCAR;
  double label_noise = 0.0;
  std::uint64_t seed = 7;

  void validate() const;  // throws InvalidConfigError
};

struct Dataset {
  std::vector<SampleRecord> records;
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  // per-class driving factor, "shared" / "ehr" / "cxr"; empty when unknown
  std::vector<std::string> class_drivers;

  std::size_t size() const { return records.size(); }
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Draws latent factors z_shared/z_ehr/z_cxr, decodes them through fixed random
// networks into the EHR sequence and the image grid, assigns labels from
// factor-group logistic models (class c is driven by factor group c mod 3:
// shared, ehr, cxr), and applies the configured missingness mechanism.
Dataset generate_synthetic(const SyntheticConfig& cfg);

// Fingerprint of the fixed decoder parameters for a given config.
std::string synthetic_decoder_digest(const SyntheticConfig& cfg);

void write_records_jsonl(const Dataset& ds, const std::string& path);

// Streams and validates records; schema violations name the record id and
// field. n_classes/n_features pin the expected shapes.
Dataset load_records_jsonl(const std::string& path, std::size_t n_classes,
                           std::size_t n_features);

struct DatasetManifest {
  std::string records_path;  // relative to the manifest's directory
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::size_t seq_len = 0;
  std::size_t image_size = 0;
  std::vector<std::string> class_drivers;
  std::uint64_t split_seed = 0;
  std::array<double, 3> split_ratios{0.7, 0.1, 0.2};
  SplitIndices split;  // empty vectors when the manifest does not pin a split
  std::string generator_json;  // serialized SyntheticConfig, empty for ingested data
  std::string decoder_digest;

  bool has_split() const {
    return !(split.train.empty() && split.val.empty() && split.test.empty());
  }
};

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Loads the record file referenced by a manifest (resolved relative to the
// manifest path) and validates it against the manifest schema.
Dataset load_dataset(const std::string& manifest_path);
Dataset load_dataset(const DatasetManifest& m, const std::string& manifest_dir);

// Deterministic 7:1:2-style split, stratified by CXR presence so that the
// matched subset's validation/test members stay inside the full dataset's
// validation/test splits when both views are built with the same seed.
SplitIndices split_dataset(const Dataset& ds, const std::array<double, 3>& ratios,
                           std::uint64_t seed);

std::string serialize_synthetic_config(const SyntheticConfig& cfg);
SyntheticConfig parse_synthetic_config_json(const std::string& json_text);

}  // namespace drfuse
