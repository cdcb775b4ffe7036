#pragma once

#include <filesystem>
#include <vector>

#include "spes/experiment.hpp"

namespace spes {

struct AblationPoint {
  int n = 0;  // requested channel count
  double mean_auroc = 0.0;
  BootstrapCi ci;
  bool clamped = false;  // some target had fewer than n channels available
  int entries = 0;       // (run, patient) AUROC values behind the mean
};

// number of assembly rows available for one convergent target
int convergent_available(const AveragedPatient& patient, const std::string& target);

// Evaluate one trained Transformer with random n-channel subsets per target
// (no retraining). draws are averaged per target; when n covers every
// available channel a single draw is used since all draws coincide.
std::vector<PatientScores> predict_with_subsets(ModelF& model, const CohortData& data,
                                                const std::vector<int>& patient_idx,
                                                int n, int draws,
                                                const StandardizationStats& stats,
                                                uint64_t seed);

// Full sensitivity curve over every completed Transformer run in results_dir,
// pooling per-(run, patient) AUROCs; CI is a percentile bootstrap.
std::vector<AblationPoint> channel_sensitivity(const std::filesystem::path& results_dir,
                                               const CohortData& data, const FoldPlan& plan,
                                               const std::vector<int>& subset_sizes,
                                               int draws_per_size, uint64_t seed);

}  // namespace spes
