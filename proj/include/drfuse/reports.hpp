// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "drfuse/eval.hpp"

namespace drfuse {

// Machine-readable summary: macro PRAUC, CI, per-class values, plus caller
// context (config echo, seeds, split sizes).
void write_summary_json(const std::string& path, const MetricReport& r,
                        const nlohmann::json& extra);

// One row per class and a trailing macro summary row.
void write_per_class_csv(const std::string& path, const MetricReport& r,
                         const std::vector<std::string>& class_drivers);

void write_alpha_csv(const std::string& path, const std::vector<AlphaRow>& rows);

void write_probes_json(const std::string& path, const ProbeReport& p);

// 2-d projection of the four representations over a split, one row per
// (sample, representation).
void write_projection_csv(const std::string& path, DrFuseModel& model, const Dataset& ds,
                          const std::vector<std::size_t>& idx);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);
void write_ablation_json(const std::string& path, const std::vector<AblationRow>& rows,
                         const nlohmann::json& extra);

// Table-3-style comparison: per-class PRAUC of a model against the best
// unimodal baseline with the relative difference in percent.
void write_baseline_comparison_csv(const std::string& path, const MetricReport& model_report,
                                   const std::string& model_name,
                                   const std::vector<BaselineResult>& baselines);

}  // namespace drfuse
