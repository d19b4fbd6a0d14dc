// SPDX-License-Identifier: Apache-2.0
#include "drfuse/reports.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "drfuse/errors.hpp"

namespace drfuse {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::string(buf);
}

nlohmann::json report_json(const MetricReport& r) {
  nlohmann::json j;
  j["macro_prauc"] = r.macro;
  j["ci_lo"] = r.ci.lo;
  j["ci_hi"] = r.ci.hi;
  j["bootstrap_degenerate_iterations"] = r.ci.n_degenerate;
  j["n_samples"] = r.n_samples;
  j["n_classes_skipped"] = r.n_skipped;
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    nlohmann::json row;
    row["class"] = c;
    if (std::isnan(r.per_class[c]))
      row["prauc"] = nullptr;
    else
      row["prauc"] = r.per_class[c];
    row["prevalence"] = r.prevalence.empty() ? 0.0 : r.prevalence[c];
    per.push_back(std::move(row));
  }
  j["per_class"] = std::move(per);
  return j;
}

}  // namespace

void write_summary_json(const std::string& path, const MetricReport& r,
                        const nlohmann::json& extra) {
  nlohmann::json j = report_json(r);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_per_class_csv(const std::string& path, const MetricReport& r,
                         const std::vector<std::string>& class_drivers) {
  auto out = open_out(path);
  out << "class,driver,prevalence,prauc\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    std::string driver = c < class_drivers.size() ? class_drivers[c] : "";
    out << c << "," << driver << "," << fmt(r.prevalence.empty() ? 0.0 : r.prevalence[c])
        << "," << fmt(r.per_class[c]) << "\n";
  }
  out << "macro,," << "," << fmt(r.macro) << "\n";
}

void write_alpha_csv(const std::string& path, const std::vector<AlphaRow>& rows) {
  auto out = open_out(path);
  out << "id,class,has_cxr,alpha_ehr_distinct,alpha_shared,alpha_cxr_distinct\n";
  for (const auto& row : rows)
    out << row.id << "," << row.class_idx << "," << (row.has_cxr ? 1 : 0) << ","
        << fmt(row.alpha[0]) << "," << fmt(row.alpha[1]) << "," << fmt(row.alpha[2]) << "\n";
}

void write_probes_json(const std::string& path, const ProbeReport& p) {
  static const char* kReps[4] = {"h_shared_ehr", "h_distinct_ehr", "h_shared_cxr",
                                 "h_distinct_cxr"};
  static const char* kFactors[3] = {"z_shared", "z_ehr", "z_cxr"};
  nlohmann::json j;
  nlohmann::json r2, ctrl;
  for (std::size_t r = 0; r < 4; ++r) {
    nlohmann::json row, crow;
    for (std::size_t f = 0; f < 3; ++f) {
      row[kFactors[f]] = p.r2[r][f];
      crow[kFactors[f]] = p.r2_control[r][f];
    }
    r2[kReps[r]] = std::move(row);
    ctrl[kReps[r]] = std::move(crow);
  }
  j["r2"] = std::move(r2);
  j["r2_shuffled_control"] = std::move(ctrl);
  nlohmann::json pooled, pooled_ctrl;
  for (std::size_t f = 0; f < 3; ++f) {
    pooled[kFactors[f]] = p.r2_pooled[f];
    pooled_ctrl[kFactors[f]] = p.r2_pooled_control[f];
  }
  j["r2_pooled_shared"] = std::move(pooled);
  j["r2_pooled_shared_control"] = std::move(pooled_ctrl);
  j["mean_jsd_shared"] = p.mean_jsd_shared;
  j["n_paired_train"] = p.n_paired_train;
  j["n_paired_test"] = p.n_paired_test;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_projection_csv(const std::string& path, DrFuseModel& model, const Dataset& ds,
                          const std::vector<std::size_t>& idx) {
  static const char* kReps[4] = {"h_shared_ehr", "h_distinct_ehr", "h_shared_cxr",
                                 "h_distinct_cxr"};
  std::vector<std::vector<double>> points;
  std::vector<std::string> ids;
  std::vector<int> rep_of;
  for (std::size_t i : idx) {
    const SampleRecord& rec = ds.records[i];
    if (!rec.has_cxr()) continue;
    auto ev = model.evaluate_sample(rec);
    const std::vector<double>* reps[4] = {&ev.h_shared_ehr, &ev.h_distinct_ehr,
                                          &*ev.h_shared_cxr, &*ev.h_distinct_cxr};
    for (int r = 0; r < 4; ++r) {
      points.push_back(*reps[r]);
      ids.push_back(rec.id);
      rep_of.push_back(r);
    }
  }
  auto proj = pca_2d(points);
  auto out = open_out(path);
  out << "id,representation,x,y\n";
  for (std::size_t i = 0; i < proj.size(); ++i)
    out << ids[i] << "," << kReps[rep_of[i]] << "," << fmt(proj[i][0]) << ","
        << fmt(proj[i][1]) << "\n";
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
  auto out = open_out(path);
  out << "variant,prauc_matched,ci_lo_matched,ci_hi_matched,prauc_full,ci_lo_full,ci_hi_full\n";
  for (const auto& r : rows)
    out << r.name << "," << fmt(r.matched.macro) << "," << fmt(r.matched.ci.lo) << ","
        << fmt(r.matched.ci.hi) << "," << fmt(r.full.macro) << "," << fmt(r.full.ci.lo)
        << "," << fmt(r.full.ci.hi) << "\n";
}

void write_ablation_json(const std::string& path, const std::vector<AblationRow>& rows,
                         const nlohmann::json& extra) {
  nlohmann::json j;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row;
    row["variant"] = r.name;
    row["key"] = r.key;
    row["matched"] = report_json(r.matched);
    row["full"] = report_json(r.full);
    arr.push_back(std::move(row));
  }
  j["rows"] = std::move(arr);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_baseline_comparison_csv(const std::string& path, const MetricReport& model_report,
                                   const std::string& model_name,
                                   const std::vector<BaselineResult>& baselines) {
  const MetricReport* ehr = nullptr;
  const MetricReport* cxr = nullptr;
  for (const auto& b : baselines) {
    if (b.name == "ehr_only") ehr = &b.report;
    if (b.name == "cxr_only") cxr = &b.report;
  }
  auto out = open_out(path);
  out << "class,prevalence,ehr_only,cxr_only,best_unimodal," << model_name
      << ",relative_diff_pct\n";
  for (std::size_t c = 0; c < model_report.per_class.size(); ++c) {
    double e = ehr && c < ehr->per_class.size() ? ehr->per_class[c]
                                                : std::numeric_limits<double>::quiet_NaN();
    double x = cxr && c < cxr->per_class.size() ? cxr->per_class[c]
                                                : std::numeric_limits<double>::quiet_NaN();
    double best = std::isnan(e) ? x : (std::isnan(x) ? e : std::max(e, x));
    double m = model_report.per_class[c];
    double rel = (std::isnan(best) || best <= 0.0 || std::isnan(m))
                     ? std::numeric_limits<double>::quiet_NaN()
                     : 100.0 * (m - best) / best;
    out << c << "," << fmt(model_report.prevalence[c]) << "," << fmt(e) << "," << fmt(x)
        << "," << fmt(best) << "," << fmt(m) << "," << fmt(rel) << "\n";
  }
}

}  // namespace drfuse
