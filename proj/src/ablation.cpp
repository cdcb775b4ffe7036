#include "spes/ablation.hpp"

#include <algorithm>
#include <cmath>

namespace fs = std::filesystem;

namespace spes {

int convergent_available(const AveragedPatient& patient, const std::string& target) {
  int n = 0;
  for (const auto& site : patient.sites) {
    if (site.stim_id == target) continue;
    if (site.row_of(target) >= 0) ++n;
  }
  return n;
}

std::vector<PatientScores> predict_with_subsets(ModelF& model, const CohortData& data,
                                                const std::vector<int>& patient_idx,
                                                int n, int draws,
                                                const StandardizationStats& stats,
                                                uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::input, "predict_with_subsets: n must be >= 1");
  if (draws < 1) throw Error(ErrorKind::input, "predict_with_subsets: draws must be >= 1");
  Rng root(seed);
  std::vector<PatientScores> out;
  for (int p : patient_idx) {
    const AveragedPatient& patient = data.patients[size_t(p)];
    PatientScores ps;
    ps.patient_id = patient.patient_id;
    ps.outcome = patient.outcome;
    for (size_t t = 0; t < data.targets[size_t(p)].size(); ++t) {
      const std::string& target = data.targets[size_t(p)][t];
      int available = convergent_available(patient, target);
      int budget = std::min(n, available);
      int eff_draws = budget >= available ? 1 : draws;
      double prob = 0.0;
      for (int d = 0; d < eff_draws; ++d) {
        Rng draw_rng = root.substream("draw", uint64_t(p) << 20 | uint64_t(t),
                                      uint64_t(d));
        ParadigmSample s = assemble_convergent(patient, target, budget, draw_rng);
        apply_standardization(s.values, stats);
        prob += model.predict(Tensor<float>({s.n_channels, s.n_samples}, s.values));
      }
      ElectrodeScore es;
      es.electrode_id = target;
      es.soz = patient.electrode(target).soz;
      es.score = prob / double(eff_draws);
      ps.electrodes.push_back(std::move(es));
    }
    out.push_back(std::move(ps));
  }
  return out;
}

std::vector<AblationPoint> channel_sensitivity(const fs::path& results_dir,
                                               const CohortData& data, const FoldPlan& plan,
                                               const std::vector<int>& subset_sizes,
                                               int draws_per_size, uint64_t seed) {
  // gather completed transformer runs
  struct Run {
    Checkpoint ckpt;
    std::vector<int> test_idx;
    int repeat, fold;
  };
  std::vector<Run> runs;
  for (const auto& r : plan.runs()) {
    fs::path dir = run_dir(results_dir, Family::cnn_transformer, r.repeat, r.test_fold);
    if (!fs::exists(dir / "checkpoint.bin")) continue;
    Run run;
    run.ckpt = load_checkpoint(dir / "checkpoint.bin");
    run.repeat = r.repeat;
    run.fold = r.test_fold;
    for (const auto& id : plan.patients_in_role(r.repeat, r.test_fold, Role::test)) {
      int p = data.patient_index(id);
      if (p < 0) throw Error(ErrorKind::input, "ablation: cohort is missing " + id);
      run.test_idx.push_back(p);
    }
    runs.push_back(std::move(run));
  }
  if (runs.empty())
    throw Error(ErrorKind::missing_data,
                "ablation: no trained cnn_transformer runs in " + results_dir.string());

  int max_available = 0;
  for (const auto& patient : data.patients)
    for (const auto& e : patient.electrodes)
      if (patient.site(e.id))
        max_available = std::max(max_available, convergent_available(patient, e.id));

  std::vector<AblationPoint> curve;
  for (int n : subset_sizes) {
    AblationPoint pt;
    pt.n = n;
    pt.clamped = n > max_available;
    std::vector<double> entries;
    for (const auto& run : runs) {
      ModelF model = run.ckpt.restore_model();
      StandardizationStats stats{run.ckpt.stats_mean, run.ckpt.stats_sd};
      uint64_t run_seed = Rng(seed)
                              .substream("ablate", uint64_t(run.repeat), uint64_t(run.fold))
                              .substream("n", uint64_t(n))
                              .seed();
      auto scores = predict_with_subsets(model, data, run.test_idx, n, draws_per_size,
                                         stats, run_seed);
      for (const auto& ps : scores) {
        if (!ps.has_both_classes()) continue;
        entries.push_back(auroc(ps.scores(), ps.labels()));
      }
    }
    if (entries.empty())
      throw Error(ErrorKind::degenerate, "ablation: no usable test patients");
    pt.entries = int(entries.size());
    pt.mean_auroc =
        std::accumulate(entries.begin(), entries.end(), 0.0) / double(entries.size());
    pt.ci = entries.size() >= 2 ? bootstrap_ci(entries, 0.95, 2000, seed ^ uint64_t(n))
                                : BootstrapCi{pt.mean_auroc, pt.mean_auroc};
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace spes
