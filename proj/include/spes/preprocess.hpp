#pragma once

#include <vector>

#include "spes/rng.hpp"
#include "spes/types.hpp"

namespace spes {

struct PreprocessConfig {
  double band_low = 1.0;     // Hz
  double band_high = 150.0;  // Hz
  int filter_order = 4;      // Butterworth prototype order, forward-backward
  double baseline_lo = -1.0;  // s relative to stimulation onset
  double baseline_hi = -0.1;
  double epoch_start = 0.009;  // s post-stimulation
  double epoch_end = 1.0;
  double exclusion_radius_mm = 13.0;
  double noise_sd = 0.1;  // training-time additive noise
  double channel_drop_lo = 0.0;
  double channel_drop_hi = 0.5;

  void validate(double sampling_rate) const;
};

// Epoch window in sample indices relative to onset: the closed interval
// [ceil(epoch_start*fs), floor(epoch_end*fs)].
long epoch_start_index(const PreprocessConfig& cfg, double fs);
long epoch_end_index(const PreprocessConfig& cfg, double fs);
int epoch_length(const PreprocessConfig& cfg, double fs);

// Zero-phase Butterworth bandpass applied in place, channel by channel.
void bandpass(Signal& signal, double fs, const PreprocessConfig& cfg);

// Baseline-corrected epochs per stimulation site, with the stimulated channel
// and every channel within exclusion_radius_mm removed. Trials whose window
// leaves the recording are dropped and counted.
std::vector<Epochs> epoch_record(const PatientRecord& record, const PreprocessConfig& cfg);

// bandpass + epoch; returns a record holding epochs and no continuous signal
PatientRecord preprocess_record(const PatientRecord& record, const PreprocessConfig& cfg);

struct StandardizationStats {
  double mean = 0.0;
  double sd = 1.0;
};

// streaming accumulator so per-patient moments can be combined per run
struct StandardizationAccumulator {
  long count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(const Epochs& ep);
  void add_value(double v);
  void combine(const StandardizationAccumulator& o);
  StandardizationStats finalize() const;  // population sd; throws on zero variance
};

StandardizationStats fit_standardization(const std::vector<Epochs>& train_epochs);
void apply_standardization(Epochs& epochs, const StandardizationStats& stats);
void apply_standardization(std::vector<float>& values, const StandardizationStats& stats);

// training-time augmentation
void augment_noise(std::vector<float>& values, double sd, Rng& rng);

}  // namespace spes
