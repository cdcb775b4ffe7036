#include "spes/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace spes {

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.n = int(values.size());
  if (values.empty()) return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / double(values.size() - 1));
  }
  return a;
}

FamilyReport evaluate_family(const fs::path& results_dir, Family family,
                             const FoldPlan& plan) {
  FamilyReport report;
  report.family = family;
  report.expected_runs = int(plan.runs().size());

  std::vector<double> aurocs, specs, senss, youdens;
  for (const auto& run : plan.runs()) {
    fs::path dir = run_dir(results_dir, family, run.repeat, run.test_fold);
    if (!fs::exists(dir / "scores_test.tsv")) {
      report.per_run_mean_auroc.push_back(std::nan(""));
      continue;
    }
    ++report.completed_runs;
    auto test_scores = read_patient_scores(dir / "scores_test.tsv");

    bool have_rule = false;
    ThresholdRule rule;
    try {
      auto val_scores = read_patient_scores(dir / "scores_val.tsv");
      rule = fit_threshold_rule(val_scores).rule;
      have_rule = true;
    } catch (const Error&) {
      // every validation patient degenerate: threshold metrics unavailable
    }

    double run_sum = 0.0;
    int run_n = 0;
    for (const auto& ps : test_scores) {
      MetricRow row;
      row.repeat = run.repeat;
      row.fold = run.test_fold;
      row.patient_id = ps.patient_id;
      row.outcome = ps.outcome;
      if (!ps.has_both_classes()) {
        row.single_class = true;
        report.rows.push_back(row);
        continue;
      }
      auto scores = ps.scores();
      auto labels = ps.labels();
      row.auroc = auroc(scores, labels);
      aurocs.push_back(row.auroc);
      run_sum += row.auroc;
      ++run_n;
      if (have_rule) {
        double thresh = apply_threshold_rule(rule, scores);
        YoudenResult y = youden(scores, labels, thresh);
        row.specificity = y.specificity;
        row.sensitivity = y.sensitivity;
        row.youden = y.youden;
        row.youden_valid = true;
        specs.push_back(y.specificity);
        senss.push_back(y.sensitivity);
        youdens.push_back(y.youden);
      }
      report.rows.push_back(row);
    }
    report.per_run_mean_auroc.push_back(run_n > 0 ? run_sum / double(run_n)
                                                  : std::nan(""));
  }
  report.auroc = aggregate(aurocs);
  report.specificity = aggregate(specs);
  report.sensitivity = aggregate(senss);
  report.youden = aggregate(youdens);
  return report;
}

SuiteReport evaluate_suite(const fs::path& results_dir, const FoldPlan& plan,
                           const std::vector<Family>& families) {
  SuiteReport suite;
  suite.n_patients = int(plan.patient_ids.size());
  suite.k = plan.k;
  for (Family f : families) suite.families.push_back(evaluate_family(results_dir, f, plan));

  const FamilyReport* transformer = nullptr;
  const FamilyReport* convergent = nullptr;
  for (const auto& fr : suite.families) {
    if (fr.family == Family::cnn_transformer) transformer = &fr;
    if (fr.family == Family::cnn_convergent) convergent = &fr;
  }

  if (transformer && convergent) {
    std::vector<double> a, b;
    for (size_t i = 0; i < transformer->per_run_mean_auroc.size(); ++i) {
      double x = transformer->per_run_mean_auroc[i];
      double y = convergent->per_run_mean_auroc[i];
      if (std::isnan(x) || std::isnan(y)) continue;
      a.push_back(x);
      b.push_back(y);
    }
    if (a.size() >= 2) {
      double n = double(suite.n_patients);
      double k = double(suite.k);
      // patients are the resampled unit: one test fold vs k-2 training folds
      suite.comparison =
          corrected_ttest(a, b, (k - 2.0) * n / k, n / k);
      suite.has_comparison = true;
    }
  }

  if (transformer) {
    // per-patient mean test AUROC across runs, stratified by outcome
    std::map<std::string, std::pair<double, int>> per_patient;
    std::map<std::string, Outcome> outcome_of;
    for (const auto& row : transformer->rows) {
      if (row.single_class) continue;
      auto& [sum, count] = per_patient[row.patient_id];
      sum += row.auroc;
      ++count;
      outcome_of[row.patient_id] = row.outcome;
    }
    std::vector<double> values;
    std::vector<Outcome> outcomes;
    for (const auto& [pid, sc] : per_patient) {
      values.push_back(sc.first / double(sc.second));
      outcomes.push_back(outcome_of[pid]);
    }
    if (!values.empty()) suite.outcome = outcome_stratified_report(values, outcomes);
  }
  return suite;
}

std::string render_summary_text(const SuiteReport& report) {
  std::ostringstream out;
  char buf[256];
  out << "model performance (mean +/- sd over per-patient test metrics, all runs)\n";
  std::snprintf(buf, sizeof buf, "%-18s %-17s %-17s %-17s %-17s %s\n", "model", "AUROC",
                "specificity", "sensitivity", "youden", "runs");
  out << buf;
  for (const auto& fr : report.families) {
    auto cell = [&](const Aggregate& a) {
      char c[40];
      if (a.n == 0)
        std::snprintf(c, sizeof c, "n/a");
      else
        std::snprintf(c, sizeof c, "%.3f +/- %.3f", a.mean, a.sd);
      return std::string(c);
    };
    std::snprintf(buf, sizeof buf, "%-18s %-17s %-17s %-17s %-17s %d/%d\n",
                  to_string(fr.family), cell(fr.auroc).c_str(), cell(fr.specificity).c_str(),
                  cell(fr.sensitivity).c_str(), cell(fr.youden).c_str(), fr.completed_runs,
                  fr.expected_runs);
    out << buf;
  }
  if (report.has_comparison) {
    std::snprintf(buf, sizeof buf,
                  "\ncnn_transformer vs cnn_convergent (corrected resampled t-test, "
                  "one-sided): t = %.4f, p = %.4f\n",
                  report.comparison.t, report.comparison.p);
    out << buf;
  }
  if (report.outcome.applicable) {
    std::snprintf(buf, sizeof buf,
                  "outcome stratification (cnn_transformer): seizure-free median %.3f "
                  "(n=%d) vs not-seizure-free median %.3f (n=%d), one-tailed "
                  "Mann-Whitney p = %.4f\n",
                  report.outcome.seizure_free.median, report.outcome.seizure_free.n,
                  report.outcome.not_seizure_free.median, report.outcome.not_seizure_free.n,
                  report.outcome.p_one_tailed);
    out << buf;
  }
  return out.str();
}

namespace {

json aggregate_json(const Aggregate& a) {
  return {{"mean", a.mean}, {"sd", a.sd}, {"n", a.n}};
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_summary(const SuiteReport& report, const fs::path& report_dir) {
  fs::create_directories(report_dir);
  {
    std::ofstream out(report_dir / "summary.txt", std::ios::binary);
    out << render_summary_text(report);
  }
  json j;
  j["n_patients"] = report.n_patients;
  j["k"] = report.k;
  for (const auto& fr : report.families) {
    json fj;
    fj["completed_runs"] = fr.completed_runs;
    fj["expected_runs"] = fr.expected_runs;
    fj["auroc"] = aggregate_json(fr.auroc);
    fj["specificity"] = aggregate_json(fr.specificity);
    fj["sensitivity"] = aggregate_json(fr.sensitivity);
    fj["youden"] = aggregate_json(fr.youden);
    json runs = json::array();
    for (double v : fr.per_run_mean_auroc)
      runs.push_back(std::isnan(v) ? json(nullptr) : json(v));
    fj["per_run_mean_auroc"] = runs;
    json rows = json::array();
    for (const auto& row : fr.rows) {
      rows.push_back({{"repeat", row.repeat},
                      {"fold", row.fold},
                      {"patient", row.patient_id},
                      {"outcome", to_string(row.outcome)},
                      {"single_class", row.single_class},
                      {"auroc", row.auroc},
                      {"specificity", row.specificity},
                      {"sensitivity", row.sensitivity},
                      {"youden", row.youden},
                      {"youden_valid", row.youden_valid}});
    }
    fj["rows"] = rows;
    j["families"][to_string(fr.family)] = fj;
  }
  if (report.has_comparison)
    j["transformer_vs_convergent"] = {{"t", report.comparison.t},
                                      {"p", report.comparison.p},
                                      {"mean_diff", report.comparison.mean_diff}};
  if (report.outcome.applicable)
    j["outcome"] = {{"p_one_tailed", report.outcome.p_one_tailed},
                    {"seizure_free_median", report.outcome.seizure_free.median},
                    {"not_seizure_free_median", report.outcome.not_seizure_free.median}};
  std::ofstream out(report_dir / "summary.json", std::ios::binary);
  out << j.dump(2) << '\n';
}

void write_series(const SuiteReport& report, const fs::path& results_dir,
                  const fs::path& report_dir) {
  fs::create_directories(report_dir);

  // pooled ROC per family (x=fpr, y=tpr; no CI on the curve itself)
  for (const auto& fr : report.families) {
    FoldPlan plan =
        FoldPlan::from_json([&] {
          std::ifstream in(results_dir / "plan.json");
          std::stringstream ss;
          ss << in.rdbuf();
          return ss.str();
        }());
    std::vector<std::pair<double, int>> pool;  // (score, label)
    for (const auto& run : plan.runs()) {
      fs::path dir = run_dir(results_dir, fr.family, run.repeat, run.test_fold);
      if (!fs::exists(dir / "scores_test.tsv")) continue;
      for (const auto& ps : read_patient_scores(dir / "scores_test.tsv"))
        for (const auto& es : ps.electrodes) pool.push_back({es.score, es.soz ? 1 : 0});
    }
    if (pool.empty()) continue;
    std::sort(pool.begin(), pool.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    long p_total = 0, n_total = 0;
    for (const auto& [s, l] : pool) (l ? p_total : n_total) += 1;
    std::ofstream out(report_dir / ("roc_" + std::string(to_string(fr.family)) + ".tsv"),
                      std::ios::binary);
    out << "x\ty\tci_lo\tci_hi\n";
    out << "0\t0\t0\t0\n";
    long tp = 0, fp = 0;
    size_t i = 0;
    while (i < pool.size()) {  // advance over tie groups
      size_t j = i;
      while (j < pool.size() && pool[j].first == pool[i].first) {
        (pool[j].second ? tp : fp) += 1;
        ++j;
      }
      double fpr = n_total ? double(fp) / double(n_total) : 0.0;
      double tpr = p_total ? double(tp) / double(p_total) : 0.0;
      out << fmt17(fpr) << '\t' << fmt17(tpr) << '\t' << fmt17(tpr) << '\t' << fmt17(tpr)
          << '\n';
      i = j;
    }
  }

  // outcome box-plot data for the transformer
  if (report.outcome.applicable) {
    std::ofstream out(report_dir / "outcome_box.tsv", std::ios::binary);
    out << "group\tn\tmedian\tq1\tq3\twhisker_lo\twhisker_hi\n";
    auto line = [&](const char* name, const BoxStats& b) {
      out << name << '\t' << b.n << '\t' << fmt17(b.median) << '\t' << fmt17(b.q1) << '\t'
          << fmt17(b.q3) << '\t' << fmt17(b.whisker_lo) << '\t' << fmt17(b.whisker_hi)
          << '\n';
    };
    line("seizure_free", report.outcome.seizure_free);
    line("not_seizure_free", report.outcome.not_seizure_free);
  }
}

void write_ablation_series(const std::vector<AblationPoint>& curve, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "x\ty\tci_lo\tci_hi\n";
  for (const auto& pt : curve)
    out << pt.n << '\t' << fmt17(pt.mean_auroc) << '\t' << fmt17(pt.ci.lo) << '\t'
        << fmt17(pt.ci.hi) << '\n';
}

std::vector<AblationPoint> read_ablation_series(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<AblationPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    AblationPoint pt;
    std::istringstream ss(line);
    ss >> pt.n >> pt.mean_auroc >> pt.ci.lo >> pt.ci.hi;
    out.push_back(pt);
  }
  return out;
}

}  // namespace spes
