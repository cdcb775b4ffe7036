#include "spes/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "spes/kernels.hpp"

namespace spes {

namespace {

// difference-of-exponentials lobe, peak normalised to 1
double dexp_lobe(double t, double tau_rise, double tau_decay) {
  if (t <= 0.0) return 0.0;
  double t_peak = std::log(tau_decay / tau_rise) * tau_rise * tau_decay /
                  (tau_decay - tau_rise);
  double peak = std::exp(-t_peak / tau_decay) - std::exp(-t_peak / tau_rise);
  return (std::exp(-t / tau_decay) - std::exp(-t / tau_rise)) / peak;
}

// N1 sharp negative lobe: rise 6 ms, decay 25 ms (peak near 11 ms)
// P2 slow positive lobe: rise 25 ms, decay 80 ms (peak near 42 ms)
double ccep_shape_raw(double t) {
  return -dexp_lobe(t, 0.006, 0.025) + 0.5 * dexp_lobe(t, 0.025, 0.080);
}

double ccep_shape_norm() {
  static const double norm = [] {
    double peak = 0.0;
    for (double t = 0.0; t <= 0.5; t += 5e-5)
      peak = std::max(peak, std::abs(ccep_shape_raw(t)));
    return peak;
  }();
  return norm;
}

constexpr double kSpikeOnsetLo = 0.100;  // s post-stimulation
constexpr double kSpikeOnsetHi = 0.960;
constexpr double kCcepSupport = 0.5;   // s, waveform negligible beyond this
constexpr double kSpikeSupport = 0.05;

}  // namespace

double ccep_shape(double t) { return ccep_shape_raw(t) / ccep_shape_norm(); }

double delayed_spike_shape(double t) {
  return -dexp_lobe(t, 0.002, 0.008);
}

double expected_ccep_peak(const SynthConfig& cfg, double distance_mm, bool rec_is_soz) {
  double boost = rec_is_soz ? 1.0 + cfg.separation : 1.0;
  return kCcepBaseAmplitude * boost * std::exp(-distance_mm / kDistanceSpaceConstant);
}

void SynthConfig::validate() const {
  if (n_patients < 1) throw Error(ErrorKind::config, "synth: n_patients must be >= 1");
  if (electrodes_per_patient < 1)
    throw Error(ErrorKind::config, "synth: electrodes_per_patient must be >= 1");
  if (trials_per_stim < 1)
    throw Error(ErrorKind::config, "synth: trials_per_stim must be >= 1");
  if (!(sampling_rate > 0.0))
    throw Error(ErrorKind::config, "synth: sampling_rate must be positive");
  if (soz_fraction < 0.0 || soz_fraction > 1.0)
    throw Error(ErrorKind::config, "synth: soz_fraction must be in [0,1]");
  if (delayed_response_rate < 0.0 || delayed_response_rate > 1.0)
    throw Error(ErrorKind::config, "synth: delayed_response_rate must be in [0,1]");
  if (separation < 0.0) throw Error(ErrorKind::config, "synth: separation must be >= 0");
  if (noise_sd < 0.0) throw Error(ErrorKind::config, "synth: noise_sd must be >= 0");
}

int soz_count_for_patient(const SynthConfig& cfg, int patient_index) {
  double q = cfg.electrodes_per_patient * cfg.soz_fraction;
  long before = std::llround(q * patient_index);
  long after = std::llround(q * (patient_index + 1));
  return int(after - before);
}

std::vector<Electrode> synth_montage(int n_electrodes, int n_soz, bool cluster, Rng& rng) {
  int cols = int(std::ceil(std::sqrt(double(n_electrodes))));
  std::vector<Electrode> montage;
  montage.reserve(size_t(n_electrodes));
  static const Lobe lobes[] = {Lobe::frontal, Lobe::temporal, Lobe::parietal,
                               Lobe::occipital, Lobe::central};
  for (int i = 0; i < n_electrodes; ++i) {
    Electrode e;
    char buf[16];
    std::snprintf(buf, sizeof buf, "E%02d", i);
    e.id = buf;
    e.position_mm = {double(i % cols) * kGridPitchMm, double(i / cols) * kGridPitchMm, 0.0};
    e.lobe = lobes[(i / 8) % 5];  // crude strips of 8 contacts per lobe
    montage.push_back(std::move(e));
  }
  n_soz = std::min(n_soz, n_electrodes);
  if (n_soz > 0) {
    if (cluster) {
      int centre = int(rng.uniform_index(uint64_t(n_electrodes)));
      std::vector<int> order(static_cast<size_t>(n_electrodes));
      for (int i = 0; i < n_electrodes; ++i) order[size_t(i)] = i;
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return electrode_distance(montage[size_t(a)], montage[size_t(centre)]) <
               electrode_distance(montage[size_t(b)], montage[size_t(centre)]);
      });
      for (int i = 0; i < n_soz; ++i) montage[size_t(order[size_t(i)])].soz = true;
    } else {
      for (int idx : rng.sample_without_replacement(n_electrodes, n_soz))
        montage[size_t(idx)].soz = true;
    }
  }
  return montage;
}

PatientRecord synth_patient(const SynthConfig& cfg, const std::string& patient_id,
                            std::vector<Electrode> montage, uint64_t patient_seed) {
  cfg.validate();
  Rng prng(patient_seed);
  const double fs = cfg.sampling_rate;
  const int n_ch = int(montage.size());
  const int n_sites = n_ch;  // every electrode is stimulated
  const long total_trials = long(n_sites) * cfg.trials_per_stim;

  // trial spacing keeps the full [-1 s, +1 s] epoch of every trial clear of
  // its neighbours
  const long spacing = long(std::ceil(2.1 * fs));
  const long lead = long(std::ceil(1.5 * fs));
  const long n_samples = lead + (total_trials - 1) * spacing + long(std::ceil(1.5 * fs)) +
                         long(std::ceil(1.0 * fs));

  PatientRecord rec;
  rec.patient_id = patient_id;
  rec.sampling_rate = fs;
  rec.electrodes = std::move(montage);
  rec.outcome = prng.substream("outcome").bernoulli(1.0 / 3.0)
                    ? Outcome::seizure_free
                    : Outcome::not_seizure_free;

  rec.signal.n_channels = n_ch;
  rec.signal.n_samples = n_samples;
  rec.signal.data.assign(size_t(n_ch) * size_t(n_samples), 0.0f);

  // stimulation plan: sequential blocks of trials per site
  for (int s = 0; s < n_sites; ++s) {
    StimEvent ev;
    ev.stim_electrode_id = rec.electrodes[size_t(s)].id;
    ev.current_ma = 4.0;
    for (int t = 0; t < cfg.trials_per_stim; ++t)
      ev.trial_onsets.push_back(lead + (long(s) * cfg.trials_per_stim + t) * spacing);
    rec.stim_events.push_back(std::move(ev));
  }

  // background noise, one independent substream per channel so channel-level
  // parallelism cannot change the output
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (kernels::parallel_allowed())
#endif
  for (int c = 0; c < n_ch; ++c) {
    Rng ch_rng = prng.substream("noise", uint64_t(c));
    float* sig = rec.signal.channel(c);
    for (long i = 0; i < n_samples; ++i)
      sig[i] = float(ch_rng.normal(0.0, cfg.noise_sd));
  }

  // planted responses
  const long ccep_len = long(kCcepSupport * fs);
  const long spike_len = long(kSpikeSupport * fs);
  for (int s = 0; s < n_sites; ++s) {
    const Electrode& stim = rec.electrodes[size_t(s)];
    for (int t = 0; t < cfg.trials_per_stim; ++t) {
      long trial_index = long(s) * cfg.trials_per_stim + t;
      long onset = rec.stim_events[size_t(s)].trial_onsets[size_t(t)];
      Rng trial_rng = prng.substream("trial", uint64_t(trial_index));
      for (int c = 0; c < n_ch; ++c) {
        if (c == s) continue;  // stim channel carries no modelled response
        const Electrode& site = rec.electrodes[size_t(c)];
        double amp = expected_ccep_peak(cfg, electrode_distance(stim, site), site.soz);
        float* sig = rec.signal.channel(c);
        for (long i = 0; i < ccep_len && onset + i < n_samples; ++i)
          sig[onset + i] += float(amp * ccep_shape(double(i) / fs));
        // delayed epileptiform transient: SOZ recording sites only, scaled by
        // separation so it vanishes when the planted signal is switched off
        if (site.soz && cfg.separation > 0.0 && cfg.delayed_response_rate > 0.0 &&
            trial_rng.bernoulli(cfg.delayed_response_rate)) {
          double latency = trial_rng.uniform(kSpikeOnsetLo, kSpikeOnsetHi);
          double amp_spike = cfg.separation * kDelayedAmplitudeScale * kCcepBaseAmplitude;
          long start = onset + long(latency * fs);
          for (long i = 0; i < spike_len && start + i < n_samples; ++i)
            sig[start + i] += float(amp_spike * delayed_spike_shape(double(i) / fs));
        }
      }
    }
  }
  return rec;
}

std::vector<PatientRecord> generate_cohort(const SynthConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  std::vector<PatientRecord> cohort(size_t(cfg.n_patients));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (kernels::parallel_allowed())
#endif
  for (int p = 0; p < cfg.n_patients; ++p) {
    kernels::SerialScope scope;  // patient-level parallelism only
    Rng prng = root.substream("patient", uint64_t(p));
    char buf[16];
    std::snprintf(buf, sizeof buf, "P%03d", p);
    Rng layout_rng = prng.substream("layout");
    auto montage = synth_montage(cfg.electrodes_per_patient, soz_count_for_patient(cfg, p),
                                 cfg.cluster_soz, layout_rng);
    cohort[size_t(p)] = synth_patient(cfg, buf, std::move(montage), prng.seed());
  }
  return cohort;
}

}  // namespace spes
