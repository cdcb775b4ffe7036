#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spes/types.hpp"

namespace spes {

// On-disk cohort directory:
//   manifest.json                 index: format/version/kind + per-patient entries
//   <PATIENT>/signal.bin          little-endian float32, channel-major   (kind = raw)
//   <PATIENT>/events.tsv          stim_id <TAB> onset_sample <TAB> current_ma
//   <PATIENT>/electrodes.tsv      id x y z soz lobe outcome  (outcome on first data row)
//   <PATIENT>/epochs.bin          little-endian float32 epoch tensors    (kind = epoched)
//   <PATIENT>/epochs.tsv          per-stim-site index into epochs.bin
// Column orders are exactly as written by write_cohort / save_epoched_cohort.

std::vector<PatientRecord> load_cohort(const std::filesystem::path& dir);
void write_cohort(const std::vector<PatientRecord>& cohort, const std::filesystem::path& dir);

// Epoched variant of the same directory layout (preprocess output).
void save_epoched_cohort(const std::vector<PatientRecord>& cohort,
                         const std::filesystem::path& dir);

struct CohortSummary {
  int n_patients = 0;
  long n_electrodes = 0;
  long n_soz_electrodes = 0;
  long n_stim_sites = 0;
  long n_trials = 0;
  double soz_fraction = 0.0;
};

CohortSummary describe_cohort(const std::vector<PatientRecord>& cohort);

struct LobeDistribution {
  // fraction of all electrodes / of SOZ electrodes per lobe; each series sums to 1
  std::map<Lobe, double> all_fraction;
  std::map<Lobe, double> soz_fraction;
  double overall_soz_fraction = 0.0;
  bool no_soz_electrodes = false;  // SOZ series reported all-zero
};

LobeDistribution lobe_distribution(const std::vector<PatientRecord>& cohort);

// FNV-1a over manifest plus every referenced file, in manifest order.
uint64_t cohort_hash(const std::filesystem::path& dir);

}  // namespace spes
