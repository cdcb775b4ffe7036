#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spes/ablation.hpp"
#include "spes/experiment.hpp"
#include "spes/metrics.hpp"

namespace spes {

// One (run, test patient) metric row; the unit the paper averages over.
struct MetricRow {
  int repeat = 0, fold = 0;
  std::string patient_id;
  Outcome outcome = Outcome::unknown;
  double auroc = 0.0;
  double specificity = 0.0, sensitivity = 0.0, youden = 0.0;
  bool single_class = false;   // AUROC undefined; excluded from aggregates
  bool youden_valid = false;   // threshold rule available for this run
};

struct Aggregate {
  double mean = 0.0, sd = 0.0;
  int n = 0;
};

Aggregate aggregate(const std::vector<double>& values);

struct FamilyReport {
  Family family = Family::cnn_transformer;
  std::vector<MetricRow> rows;
  std::vector<double> per_run_mean_auroc;  // plan.runs() order, NaN when unusable
  Aggregate auroc, specificity, sensitivity, youden;
  int completed_runs = 0;
  int expected_runs = 0;
};

struct SuiteReport {
  std::vector<FamilyReport> families;
  bool has_comparison = false;  // transformer vs cnn_convergent
  TTestResult comparison;       // corrected resampled t-test
  OutcomeReport outcome;        // transformer per-patient AUROC by outcome
  int n_patients = 0, k = 0;
};

FamilyReport evaluate_family(const std::filesystem::path& results_dir, Family family,
                             const FoldPlan& plan);
SuiteReport evaluate_suite(const std::filesystem::path& results_dir, const FoldPlan& plan,
                           const std::vector<Family>& families);

// human-readable summary + machine-readable summary.json
void write_summary(const SuiteReport& report, const std::filesystem::path& report_dir);

// plot-ready series files: ROC per family, outcome box data, ablation curve
void write_series(const SuiteReport& report, const std::filesystem::path& results_dir,
                  const std::filesystem::path& report_dir);

void write_ablation_series(const std::vector<AblationPoint>& curve,
                           const std::filesystem::path& path);
std::vector<AblationPoint> read_ablation_series(const std::filesystem::path& path);

std::string render_summary_text(const SuiteReport& report);

}  // namespace spes
