#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spes/checkpoint.hpp"
#include "spes/metrics.hpp"
#include "spes/models.hpp"
#include "spes/paradigm.hpp"
#include "spes/preprocess.hpp"
#include "spes/types.hpp"

namespace spes {

// ------------------------------------------------------------------- folds

enum class Role { train, validation, test };

// Patient-level repeated k-fold: every patient sits in exactly one fold per
// repeat; each run uses one test fold, the next fold for validation and the
// remaining k-2 folds for training (3 of 5 at the default k).
struct FoldPlan {
  int k = 5;
  int repeats = 5;
  uint64_t seed = 0;
  std::vector<std::string> patient_ids;         // sorted
  std::vector<std::vector<int>> assignments;    // [repeat][patient] -> fold

  struct Run {
    int repeat = 0;
    int test_fold = 0;
  };
  std::vector<Run> runs() const;
  std::vector<std::string> patients_in_role(int repeat, int test_fold, Role role) const;
  int fold_of(int repeat, const std::string& patient_id) const;

  std::string to_json() const;
  static FoldPlan from_json(const std::string& text);
};

FoldPlan plan_folds(std::vector<std::string> patient_ids, int k, int repeats, uint64_t seed);

// ------------------------------------------------------------- train config

struct TrainConfig {
  Family family = Family::cnn_transformer;
  double learning_rate = 1.5e-4;
  int channel_budget = 37;  // CNN families only
  double dropout = 0.46;
  int epochs = 50;
  int batch_size = 32;
  double pos_weight = 0.0;  // 0 = auto: (#negative / #positive) in the training targets
  uint64_t seed = 0;
  int base_width = 32;  // CNN trunk width; also the per-channel embedder width
  int embedding_dim = 16;
  int num_layers = 2;
  int eval_draws = 1;  // CNN inference channel-subset draws, averaged
  double weight_decay = 0.01;

  void validate() const;
  ModelConfig model_config() const;
  std::map<std::string, std::string> to_kv() const;
  static TrainConfig from_kv(const std::map<std::string, std::string>& kv);
};

// hyperparameters from the reference tuning run (Tables 2 and 3)
TrainConfig paper_config(Family family);

// ------------------------------------------------------------- cohort data

// Averaged, assembly-ready view of an epoched cohort, shared read-only
// across runs.
struct CohortData {
  std::vector<AveragedPatient> patients;
  std::vector<StandardizationAccumulator> moments;  // per patient, trial-level epochs
  std::vector<std::vector<std::string>> targets;    // per patient, stimulated electrodes
  int t_len = 0;

  int patient_index(const std::string& id) const;
};

CohortData prepare_cohort(const std::vector<PatientRecord>& epoched);

// ---------------------------------------------------------------- training

struct RunResult {
  Checkpoint checkpoint;
  std::vector<PatientScores> val_scores;
  std::vector<PatientScores> test_scores;
  std::vector<std::string> log_lines;
  StandardizationStats stats;
};

RunResult train_run(const CohortData& data, const FoldPlan& plan, int repeat, int test_fold,
                    const TrainConfig& cfg);

// deterministic evaluation of a model on whole patients (eval mode: single
// fixed-seed channel draw per CNN target, all channels for the Transformer)
std::vector<PatientScores> predict_patient_scores(ModelF& model, const CohortData& data,
                                                  const std::vector<int>& patient_idx,
                                                  const TrainConfig& cfg,
                                                  const StandardizationStats& stats,
                                                  uint64_t run_seed);

double mean_patient_auroc(const std::vector<PatientScores>& scores);

// ------------------------------------------------------------------ tuning

struct SearchSpace {
  double lr_lo = 1e-4, lr_hi = 1e-2;  // log-uniform
  double dropout_lo = 0.0, dropout_hi = 0.5;
  int budget_lo = 20, budget_hi = 80;  // CNN channel budget, integer
  std::vector<int> embedding_choices = {16, 32, 64};
  std::vector<int> layer_choices = {1, 2};
  int trials = 10;
  int tuning_epochs = 10;
  std::vector<TrainConfig> fixed_candidates;  // when non-empty, overrides sampling
};

TrainConfig sample_search_point(const SearchSpace& space, const TrainConfig& base, Rng& rng);

struct TuneTrial {
  TrainConfig config;
  double val_auroc = 0.0;
  bool failed = false;
  std::string error;
};

struct TuneResult {
  TrainConfig best;
  std::vector<TuneTrial> trials;
};

// ten sampled configs, ten epochs each, on the repeat-0 / fold-0 split; the
// search stream is independent of the fold/run streams
TuneResult tune(const CohortData& data, const FoldPlan& plan, Family family,
                const SearchSpace& space, const TrainConfig& base, uint64_t tune_seed);

// ------------------------------------------------------------------- suite

struct SuiteOptions {
  std::filesystem::path out_dir;
  std::vector<Family> families;
  std::map<Family, TrainConfig> configs;
  int k = 5;
  int repeats = 5;
  uint64_t seed = 0;
  int jobs = 1;
  bool force = false;
};

struct RunStatus {
  Family family;
  int repeat = 0, fold = 0;
  bool done = false;
  double mean_test_auroc = 0.0;
  std::string dir;
};

// trains and persists every (repeat, fold) run for every family; completed
// runs are skipped unless force is set
std::vector<RunStatus> run_suite(const CohortData& data, const FoldPlan& plan,
                                 const SuiteOptions& opt);

std::filesystem::path run_dir(const std::filesystem::path& out_dir, Family family,
                              int repeat, int fold);

void write_patient_scores(const std::vector<PatientScores>& scores,
                          const std::filesystem::path& path);
std::vector<PatientScores> read_patient_scores(const std::filesystem::path& path);

}  // namespace spes
