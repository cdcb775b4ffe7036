#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spes/rng.hpp"
#include "spes/types.hpp"

namespace spes {

// Synthetic SPES cohort generator. Every SOZ-dependent effect is scaled by
// `separation`, so separation = 0 produces a cohort with no learnable signal.
struct SynthConfig {
  int n_patients = 12;
  int electrodes_per_patient = 59;
  double soz_fraction = 0.144;
  int trials_per_stim = 10;
  double sampling_rate = 2048.0;  // Hz
  double separation = 1.0;
  double delayed_response_rate = 0.0;  // per trial, SOZ recording sites only
  double noise_sd = 10.0;              // microvolts
  uint64_t seed = 0;
  bool cluster_soz = true;  // contiguous SOZ cluster; false = uniform random

  void validate() const;
};

// Fixed waveform constants (documented defaults; the acceptance tests only
// compare SOZ against non-SOZ within the same geometry, so the absolute
// scale is arbitrary).
constexpr double kCcepBaseAmplitude = 40.0;    // microvolts at zero distance
constexpr double kDistanceSpaceConstant = 20.0;  // mm, exponential decay
constexpr double kDelayedAmplitudeScale = 0.6;   // x separation x base amplitude
constexpr double kGridPitchMm = 10.0;

// Biphasic CCEP template (sharp negative then slow positive), normalised so
// max |shape| = 1; t in seconds since stimulation.
double ccep_shape(double t);

// Brief spike-like transient, normalised to peak magnitude 1.
double delayed_spike_shape(double t);

// Closed-form expected peak magnitude of the planted CCEP for one
// (stim, record) pair; the Monte-Carlo generator tests check against this.
double expected_ccep_peak(const SynthConfig& cfg, double distance_mm, bool rec_is_soz);

// Grid montage with a contiguous (or uniform) SOZ assignment of `n_soz` sites.
std::vector<Electrode> synth_montage(int n_electrodes, int n_soz, bool cluster,
                                     Rng& rng);

// One patient's record for an explicit montage; exposed so tests can plant
// controlled geometries. patient_seed must already be a derived substream.
PatientRecord synth_patient(const SynthConfig& cfg, const std::string& patient_id,
                            std::vector<Electrode> montage, uint64_t patient_seed);

// Full cohort; deterministic function of the config (including seed).
std::vector<PatientRecord> generate_cohort(const SynthConfig& cfg);

// Number of SOZ electrodes for patient p under the cumulative allocation rule
// (keeps the cohort-wide fraction within one electrode of the target).
int soz_count_for_patient(const SynthConfig& cfg, int patient_index);

}  // namespace spes
