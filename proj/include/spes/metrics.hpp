#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spes/types.hpp"

namespace spes {

struct ElectrodeScore {
  std::string electrode_id;
  double score = 0.0;  // SOZ likelihood in (0,1)
  bool soz = false;
};

struct PatientScores {
  std::string patient_id;
  std::vector<ElectrodeScore> electrodes;
  Outcome outcome = Outcome::unknown;

  std::vector<double> scores() const;
  std::vector<int> labels() const;
  bool has_both_classes() const;
};

// P(score_pos > score_neg) + 0.5 P(tie); throws when a class is missing.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

struct YoudenResult {
  double specificity = 0.0;
  double sensitivity = 0.0;
  double youden = 0.0;
};

// positive prediction <=> score >= thresh
YoudenResult youden(const std::vector<double>& scores, const std::vector<int>& labels,
                    double thresh);

double median(std::vector<double> values);
// raw median absolute deviation (no 1.4826 consistency constant — this
// changes n relative to a normal-consistent MAD, deliberately)
double mad(const std::vector<double>& values);

// type-7 quantile (linear interpolation) on unsorted input
double quantile(std::vector<double> values, double q);

// Youden-maximising threshold: candidates are midpoints between adjacent
// sorted unique scores plus -inf/+inf sentinels; ties break to the lowest.
double best_youden_threshold(const std::vector<double>& scores,
                             const std::vector<int>& labels);

struct ThresholdRule {
  double n = 0.0;  // MAD multiplier
};

struct ThresholdRuleFit {
  ThresholdRule rule;
  int skipped_patients = 0;  // MAD == 0
};

ThresholdRuleFit fit_threshold_rule(const std::vector<PatientScores>& validation);

// thresh = median(scores) + n * MAD(scores); scores only, never labels
double apply_threshold_rule(const ThresholdRule& rule, const std::vector<double>& scores);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // one-sided, alternative mean(A-B) > 0
  double mean_diff = 0.0;
};

// Corrected resampled t-test for repeated k-fold cross-validation:
// t = mean(d) / sqrt((1/J + n_test/n_train) * var(d)); var(d) = 0 with
// mean(d) = 0 gives p = 1 by convention. n_test/n_train = 0 recovers the
// classical paired t-test.
TTestResult corrected_ttest(const std::vector<double>& scores_a,
                            const std::vector<double>& scores_b, double n_train_patients,
                            double n_test_patients);

// One-tailed Mann-Whitney U, alternative: A stochastically greater than B.
// Exact permutation distribution when min(|A|,|B|) <= 8 and |A|+|B| <= 25;
// normal approximation with tie correction otherwise.
double mann_whitney_one_tailed(const std::vector<double>& a, const std::vector<double>& b);

double mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

struct BootstrapCi {
  double lo = 0.0;
  double hi = 0.0;
};

// percentile bootstrap of the mean
BootstrapCi bootstrap_ci(const std::vector<double>& values, double level = 0.95,
                         int resamples = 10000, uint64_t seed = 0);

struct BoxStats {
  int n = 0;
  double median = 0.0, q1 = 0.0, q3 = 0.0;
  double whisker_lo = 0.0, whisker_hi = 0.0;  // Tukey 1.5 IQR
};

BoxStats box_stats(const std::vector<double>& values);

struct OutcomeReport {
  BoxStats seizure_free;
  BoxStats not_seizure_free;
  double p_one_tailed = 1.0;  // seizure-free > non-seizure-free
  bool applicable = false;    // false when either group is empty
};

OutcomeReport outcome_stratified_report(const std::vector<double>& patient_aurocs,
                                        const std::vector<Outcome>& outcomes);

// one-sided survival P(T >= t) of Student's t with df degrees of freedom
double student_t_sf(double t, double df);
double normal_sf(double z);

}  // namespace spes
