#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "spes/error.hpp"

namespace spes {

enum class Lobe { frontal, temporal, parietal, occipital, central, other };
enum class Outcome { seizure_free, not_seizure_free, unknown };

const char* to_string(Lobe l);
const char* to_string(Outcome o);
Lobe lobe_from_string(const std::string& s);
Outcome outcome_from_string(const std::string& s);

struct Electrode {
  std::string id;
  std::array<double, 3> position_mm{0.0, 0.0, 0.0};
  bool soz = false;
  Lobe lobe = Lobe::other;
};

// Euclidean distance in millimetres.
inline double electrode_distance(const Electrode& a, const Electrode& b) {
  double dx = a.position_mm[0] - b.position_mm[0];
  double dy = a.position_mm[1] - b.position_mm[1];
  double dz = a.position_mm[2] - b.position_mm[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct StimEvent {
  std::string stim_electrode_id;
  std::vector<long> trial_onsets;  // sample indices into the continuous signal
  double current_ma = 0.0;
};

// Continuous multichannel recording, channel-major.
struct Signal {
  int n_channels = 0;
  long n_samples = 0;
  std::vector<float> data;  // microvolts

  float* channel(int c) { return data.data() + size_t(c) * n_samples; }
  const float* channel(int c) const { return data.data() + size_t(c) * n_samples; }
};

// N trials x C channels x T samples.
struct ResponseTensor {
  int n_trials = 0;
  int n_channels = 0;
  int n_samples = 0;
  std::vector<float> values;

  long numel() const { return long(n_trials) * n_channels * n_samples; }
  float* trial_channel(int n, int c) {
    return values.data() + (size_t(n) * n_channels + c) * n_samples;
  }
  const float* trial_channel(int n, int c) const {
    return values.data() + (size_t(n) * n_channels + c) * n_samples;
  }
};

// Trial mean of a ResponseTensor: C x T.
struct AveragedResponse {
  int n_channels = 0;
  int n_samples = 0;
  std::vector<float> values;

  float* channel(int c) { return values.data() + size_t(c) * n_samples; }
  const float* channel(int c) const { return values.data() + size_t(c) * n_samples; }
};

// Epoched responses to stimulation at one electrode.
struct Epochs {
  std::string stim_electrode_id;
  ResponseTensor data;
  std::vector<std::string> channel_ids;           // length C, row order of data
  std::vector<std::string> excluded_channel_ids;  // stim channel + distance exclusions
  int dropped_trials = 0;                         // trials too close to a recording edge
};

struct PatientRecord {
  std::string patient_id;
  std::vector<Electrode> electrodes;
  double sampling_rate = 0.0;  // Hz
  std::vector<StimEvent> stim_events;
  Signal signal;               // empty when the cohort is pre-epoched
  std::vector<Epochs> epochs;  // filled when the cohort is pre-epoched
  Outcome outcome = Outcome::unknown;

  const Electrode& electrode(const std::string& id) const;
  int electrode_index(const std::string& id) const;  // -1 when absent
};

void validate(const PatientRecord& rec);

}  // namespace spes
