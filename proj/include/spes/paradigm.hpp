#pragma once

#include <string>
#include <vector>

#include "spes/rng.hpp"
#include "spes/types.hpp"

namespace spes {

enum class Paradigm { divergent, convergent };

const char* to_string(Paradigm p);

// Model-ready input: channel-budgeted averaged responses for one target
// electrode, rows sorted ascending by distance to the target.
struct ParadigmSample {
  std::string target_electrode_id;
  Paradigm paradigm = Paradigm::convergent;
  int n_channels = 0;
  int n_samples = 0;
  std::vector<float> values;             // C' x T
  std::vector<std::string> channel_ids;  // divergent: recording sites; convergent: stim sites
  std::vector<double> distances_mm;      // target <-> channel
  bool label = false;                    // SOZ status of the target electrode

  float* channel(int c) { return values.data() + size_t(c) * n_samples; }
  const float* channel(int c) const { return values.data() + size_t(c) * n_samples; }
};

AveragedResponse average_trials(const ResponseTensor& x);

// Trial averages for every stimulation site of one patient, precomputed once
// so per-pass assembly is a row gather.
struct SiteAverage {
  std::string stim_id;
  std::vector<std::string> channel_ids;
  AveragedResponse avg;

  int row_of(const std::string& channel_id) const;  // -1 when excluded
};

struct AveragedPatient {
  std::string patient_id;
  std::vector<Electrode> electrodes;
  Outcome outcome = Outcome::unknown;
  std::vector<SiteAverage> sites;

  const SiteAverage* site(const std::string& stim_id) const;
  const Electrode& electrode(const std::string& id) const;
};

AveragedPatient average_patient(const PatientRecord& record);

// budget semantics: 0 = all available channels (Transformer path); otherwise
// a random subset of exactly `budget` rows — without replacement when enough
// channels exist, with replacement to fill the fixed CNN input shape when not.
ParadigmSample assemble_divergent(const AveragedPatient& patient, const std::string& stim_id,
                                  int budget, Rng& rng);
ParadigmSample assemble_convergent(const AveragedPatient& patient,
                                   const std::string& record_id, int budget, Rng& rng);

// Only electrodes that were themselves stimulated are classification targets,
// for both paradigms.
std::vector<std::string> enumerate_targets(const PatientRecord& record);
std::vector<std::string> enumerate_targets(const AveragedPatient& patient);

// Transformer training augmentation: remove floor(p*C) random channels,
// p ~ U[drop_lo, drop_hi]. No-op for single-channel samples.
void drop_channels(ParadigmSample& sample, double drop_lo, double drop_hi, Rng& rng);

}  // namespace spes
