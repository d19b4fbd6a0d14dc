// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "drfuse/data.hpp"
#include "drfuse/model.hpp"
#include "drfuse/training.hpp"

namespace drfuse {

// Average precision: sum over positives, in descending-score order, of
// precision at that rank, divided by the number of positives. Ties keep their
// original order. Throws UndefinedMetricError when there is no positive.
double prauc(std::span<const double> scores, std::span<const double> labels);

struct MacroPrauc {
  double value = 0.0;
  std::vector<double> per_class;  // NaN for skipped classes
  std::size_t n_skipped = 0;
};

// Unweighted mean over classes with at least one positive label.
// scores[sample][class] and labels[sample][class].
MacroPrauc macro_prauc(const std::vector<std::vector<double>>& scores,
                       const std::vector<std::vector<double>>& labels);

struct BootstrapCi {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n_degenerate = 0;  // iterations with no scorable class
};

// A metric over per-sample score/label matrices; may throw
// UndefinedMetricError for degenerate resamples.
using SampleMetric = std::function<double(const std::vector<std::vector<double>>&,
                                          const std::vector<std::vector<double>>&)>;

// Percentile interval of a metric under resampling test samples with
// replacement; per-iteration seeds derive from the root seed. The default
// metric is the macro PRAUC.
BootstrapCi bootstrap_ci(const std::vector<std::vector<double>>& scores,
                         const std::vector<std::vector<double>>& labels,
                         const SampleMetric& metric, std::size_t n_iter = 1000,
                         double level = 0.95, std::uint64_t seed = 0);
BootstrapCi bootstrap_ci(const std::vector<std::vector<double>>& scores,
                         const std::vector<std::vector<double>>& labels,
                         std::size_t n_iter = 1000, double level = 0.95,
                         std::uint64_t seed = 0);

// Rank-based AUROC with midrank tie handling (generator self-checks only).
double auroc(std::span<const double> scores, std::span<const double> labels);

// Closed-form ridge regression on standardized features (train statistics);
// returns predictions for the test rows.
std::vector<double> ridge_predict(const std::vector<std::vector<double>>& x_train,
                                  const std::vector<double>& y_train,
                                  const std::vector<std::vector<double>>& x_test,
                                  double lambda = 1e-2);

// Ridge regression R^2: fit on the train rows, score on the test rows.
double ridge_r2(const std::vector<std::vector<double>>& x_train,
                const std::vector<double>& y_train,
                const std::vector<std::vector<double>>& x_test,
                const std::vector<double>& y_test, double lambda = 1e-2);

struct MetricReport {
  double macro = 0.0;
  BootstrapCi ci;
  std::vector<double> per_class;   // NaN for skipped classes
  std::vector<double> prevalence;  // positive rate per class on the eval split
  std::size_t n_skipped = 0;
  std::size_t n_samples = 0;
};

MetricReport evaluate_model(Model& model, const Dataset& ds,
                            const std::vector<std::size_t>& idx,
                            std::size_t bootstrap_iters, std::uint64_t bootstrap_seed);

struct AlphaRow {
  std::string id;
  std::size_t class_idx = 0;
  std::array<double, 3> alpha{0.0, 0.0, 0.0};
  bool has_cxr = false;
};

std::vector<AlphaRow> export_alpha(DrFuseModel& model, const Dataset& ds,
                                   const std::vector<std::size_t>& idx);

// Representation order: h_shared_ehr, h_distinct_ehr, h_shared_cxr,
// h_distinct_cxr; factor order: z_shared, z_ehr, z_cxr. The pooled shared
// representation (logit pooling of the two shared halves) is probed as well.
struct ProbeReport {
  std::array<std::array<double, 3>, 4> r2{};
  std::array<std::array<double, 3>, 4> r2_control{};  // shuffled-target probes
  std::array<double, 3> r2_pooled{};
  std::array<double, 3> r2_pooled_control{};
  double mean_jsd_shared = 0.0;  // mean JSD(h_shared_ehr, h_shared_cxr), paired samples
  std::size_t n_paired_train = 0;
  std::size_t n_paired_test = 0;
};

// Ridge probes from each representation to each latent factor, fit on the
// train split and scored on the test split (paired samples only, so all four
// representations exist).
ProbeReport disentanglement_probe(DrFuseModel& model, const Dataset& ds,
                                  const std::vector<std::size_t>& train_idx,
                                  const std::vector<std::size_t>& test_idx,
                                  std::uint64_t control_seed = 99);

// Fraction of (sample, class) pairs on paired samples where the
// highest-attention representation is also the one with the smallest
// auxiliary loss.
double attention_agreement(DrFuseModel& model, const Dataset& ds,
                           const std::vector<std::size_t>& idx);

// Mean JSD between the two shared representations over paired samples.
double mean_shared_jsd(DrFuseModel& model, const Dataset& ds,
                       const std::vector<std::size_t>& idx);

struct AblationSpec {
  ModelConfig model;
  TrainConfig training;
  std::size_t bootstrap_iters = 1000;
  std::uint64_t bootstrap_seed = 17;
  std::string out_dir;  // per-variant checkpoints + resume live here when set
};

struct AblationRow {
  std::string name;       // display name, Table-4 style
  std::string key;        // directory-safe identifier
  MetricReport matched;   // test restricted to CXR-present samples
  MetricReport full;      // whole test split
};

// Trains and evaluates {full, w/o disentangled, MSE alignment,
// w/o attn. ranking} on one dataset and split. Completed variants found in
// out_dir are reused instead of retrained.
std::vector<AblationRow> run_ablations(const Dataset& ds, const SplitIndices& split,
                                       const AblationSpec& spec);

struct BaselineResult {
  std::string name;
  MetricReport report;
};

// EHR-only on the full training split, image-only on its paired subset, and
// zero-fill concatenation on the full split; all evaluated on the same test
// indices.
std::vector<BaselineResult> internal_baselines(const Dataset& ds, const SplitIndices& split,
                                               const ModelConfig& base,
                                               const TrainConfig& training,
                                               std::size_t bootstrap_iters,
                                               std::uint64_t bootstrap_seed);

// 2-d principal-component projection of a point set (visual parity export).
std::vector<std::array<double, 2>> pca_2d(const std::vector<std::vector<double>>& points);

}  // namespace drfuse
