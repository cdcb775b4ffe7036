#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spes/cohort.hpp"
#include "spes/preprocess.hpp"
#include "spes/synth.hpp"
#include "support.hpp"

using namespace spes;
using namespace spes::testing;

namespace {

// stim site at the origin plus a ring of electrodes at equal distance,
// alternating SOZ / non-SOZ so both groups see the same geometry
std::vector<Electrode> ring_montage(int ring_size, double radius_mm) {
  std::vector<Electrode> m;
  m.push_back(make_electrode("C0", 0, 0, 0, false));
  for (int i = 0; i < ring_size; ++i) {
    double phi = 2.0 * M_PI * double(i) / double(ring_size);
    m.push_back(make_electrode("R" + std::to_string(i), radius_mm * std::cos(phi),
                               radius_mm * std::sin(phi), 0.0, i % 2 == 0));
  }
  return m;
}

// peak |amplitude| in the CCEP window (9-100 ms) for every (trial, channel)
// of every stimulation site, grouped by the recording electrode's SOZ flag
struct PeakGroups {
  std::vector<double> soz, non_soz;
};

PeakGroups measure_ccep_peaks(const PatientRecord& rec) {
  PeakGroups g;
  const double fs = rec.sampling_rate;
  const long w0 = long(std::ceil(0.009 * fs));
  const long w1 = long(std::floor(0.100 * fs));
  for (const auto& ev : rec.stim_events) {
    int stim_idx = rec.electrode_index(ev.stim_electrode_id);
    for (long onset : ev.trial_onsets) {
      for (int c = 0; c < int(rec.electrodes.size()); ++c) {
        if (c == stim_idx) continue;
        const float* sig = rec.signal.channel(c);
        double peak = 0.0;
        for (long i = w0; i <= w1; ++i) peak = std::max(peak, std::abs(double(sig[onset + i])));
        (rec.electrodes[size_t(c)].soz ? g.soz : g.non_soz).push_back(peak);
      }
    }
  }
  return g;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

}  // namespace

TEST_CASE("same seed gives a byte-identical cohort") {
  SynthConfig cfg;
  cfg.n_patients = 2;
  cfg.electrodes_per_patient = 9;
  cfg.trials_per_stim = 2;
  cfg.sampling_rate = 512.0;
  cfg.seed = 1234;
  auto a = generate_cohort(cfg);
  auto b = generate_cohort(cfg);
  REQUIRE(a.size() == b.size());
  for (size_t p = 0; p < a.size(); ++p) {
    CHECK(a[p].signal.data == b[p].signal.data);
    CHECK(a[p].patient_id == b[p].patient_id);
  }

  TempDir d1("synth_a"), d2("synth_b");
  write_cohort(a, d1.path());
  write_cohort(b, d2.path());
  CHECK(cohort_hash(d1.path()) == cohort_hash(d2.path()));
}

TEST_CASE("signal switched off: SOZ and non-SOZ amplitudes are indistinguishable") {
  SynthConfig cfg;
  cfg.sampling_rate = 512.0;
  cfg.separation = 0.0;
  cfg.delayed_response_rate = 0.0;
  cfg.noise_sd = 2.0;
  cfg.trials_per_stim = 15;
  auto rec = synth_patient(cfg, "P0", ring_montage(8, 20.0), /*patient_seed=*/99);

  auto peaks = measure_ccep_peaks(rec);
  REQUIRE(peaks.soz.size() + peaks.non_soz.size() >= 1000);
  double p = ks_two_sample_p(peaks.soz, peaks.non_soz);
  CHECK(p > 0.01);
}

TEST_CASE("separation=2 triples the mean SOZ peak amplitude (within 10%)") {
  SynthConfig cfg;
  cfg.sampling_rate = 512.0;
  cfg.separation = 2.0;
  cfg.delayed_response_rate = 0.0;  // isolate the CCEP boost
  cfg.noise_sd = 0.3;
  cfg.trials_per_stim = 15;
  auto rec = synth_patient(cfg, "P0", ring_montage(8, 20.0), 42);

  auto peaks = measure_ccep_peaks(rec);
  REQUIRE(peaks.soz.size() >= 500);
  REQUIRE(peaks.non_soz.size() >= 500);
  double ratio = mean_of(peaks.soz) / mean_of(peaks.non_soz);
  CHECK(ratio == doctest::Approx(3.0).epsilon(0.10));

  // Monte-Carlo means against the generator's closed form at ring distance;
  // only centre-stimulation trials have all recording sites at 20 mm
  double expected_non = expected_ccep_peak(cfg, 20.0, false);
  double expected_soz = expected_ccep_peak(cfg, 20.0, true);
  CHECK(expected_soz / expected_non == doctest::Approx(3.0).epsilon(1e-12));
  PatientRecord centre_only = rec;
  centre_only.stim_events.clear();
  centre_only.stim_events.push_back(rec.stim_events.front());
  auto centre_peaks = measure_ccep_peaks(centre_only);
  CHECK(mean_of(centre_peaks.soz) == doctest::Approx(expected_soz).epsilon(0.10));
  CHECK(mean_of(centre_peaks.non_soz) == doctest::Approx(expected_non).epsilon(0.10));
}

TEST_CASE("planted asymmetry is convergent-only") {
  // stimulating an SOZ site must not boost responses at non-SOZ recording
  // sites: group non-SOZ recording peaks by the stimulation site's SOZ flag
  SynthConfig cfg;
  cfg.sampling_rate = 512.0;
  cfg.separation = 2.0;
  cfg.delayed_response_rate = 0.0;
  cfg.noise_sd = 0.3;
  cfg.trials_per_stim = 20;
  auto rec = synth_patient(cfg, "P0", ring_montage(8, 20.0), 7);

  const double fs = rec.sampling_rate;
  const long w0 = long(std::ceil(0.009 * fs));
  const long w1 = long(std::floor(0.100 * fs));
  std::vector<double> from_soz, from_non;
  for (const auto& ev : rec.stim_events) {
    int stim_idx = rec.electrode_index(ev.stim_electrode_id);
    if (rec.electrodes[size_t(stim_idx)].id == "C0") continue;  // ring only: matched distances
    bool stim_soz = rec.electrodes[size_t(stim_idx)].soz;
    for (long onset : ev.trial_onsets)
      for (int c = 1; c < int(rec.electrodes.size()); ++c) {
        if (c == stim_idx || rec.electrodes[size_t(c)].soz) continue;
        const float* sig = rec.signal.channel(c);
        double peak = 0.0;
        for (long i = w0; i <= w1; ++i)
          peak = std::max(peak, std::abs(double(sig[onset + i])));
        (stim_soz ? from_soz : from_non).push_back(peak);
      }
  }
  CHECK(mean_of(from_soz) == doctest::Approx(mean_of(from_non)).epsilon(0.05));
}

TEST_CASE("delayed transients: SOZ recording sites only, late window only") {
  SynthConfig cfg;
  cfg.sampling_rate = 512.0;
  cfg.separation = 2.0;
  cfg.delayed_response_rate = 1.0;
  cfg.noise_sd = 0.0;  // anything outside the planted waveforms is exactly zero
  cfg.trials_per_stim = 5;
  auto rec = synth_patient(cfg, "P0", ring_montage(6, 20.0), 11);

  const double fs = rec.sampling_rate;
  const long late0 = long(0.55 * fs);  // past the CCEP support
  const long late1 = long(1.05 * fs);
  double non_soz_late = 0.0, soz_late = 0.0, pre_stim = 0.0;
  for (const auto& ev : rec.stim_events) {
    int stim_idx = rec.electrode_index(ev.stim_electrode_id);
    for (long onset : ev.trial_onsets)
      for (int c = 0; c < int(rec.electrodes.size()); ++c) {
        if (c == stim_idx) continue;
        const float* sig = rec.signal.channel(c);
        double late = 0.0;
        for (long i = late0; i <= late1; ++i)
          late = std::max(late, std::abs(double(sig[onset + i])));
        if (rec.electrodes[size_t(c)].soz) {
          soz_late = std::max(soz_late, late);
          for (long i = -long(0.05 * fs); i < 0; ++i)
            pre_stim = std::max(pre_stim, std::abs(double(sig[onset + i])));
        } else {
          non_soz_late = std::max(non_soz_late, late);
        }
      }
  }
  CHECK(non_soz_late == 0.0);  // delayed transients never hit non-SOZ channels
  CHECK(soz_late > 1.0);       // and do hit SOZ channels at rate 1
  CHECK(pre_stim == 0.0);
}

TEST_CASE("separation=0 turns the delayed transients off as well") {
  SynthConfig cfg;
  cfg.sampling_rate = 512.0;
  cfg.separation = 0.0;
  cfg.delayed_response_rate = 1.0;
  cfg.noise_sd = 0.0;
  cfg.trials_per_stim = 3;
  auto rec = synth_patient(cfg, "P0", ring_montage(6, 20.0), 13);
  const double fs = rec.sampling_rate;
  double late_max = 0.0;
  for (const auto& ev : rec.stim_events)
    for (long onset : ev.trial_onsets)
      for (int c = 0; c < int(rec.electrodes.size()); ++c) {
        const float* sig = rec.signal.channel(c);
        for (long i = long(0.55 * fs); i <= long(1.0 * fs); ++i)
          late_max = std::max(late_max, std::abs(double(sig[onset + i])));
      }
  CHECK(late_max == 0.0);
}

TEST_CASE("SOZ allocation stays within one electrode of the target fraction") {
  SynthConfig cfg;  // defaults: 59 electrodes, fraction 0.144
  for (int p = 0; p < 12; ++p) {
    int n = soz_count_for_patient(cfg, p);
    CHECK(std::abs(double(n) - 59 * 0.144) <= 1.0);
  }
  // 12 patients x 30 electrodes x 0.15 must allocate 54 in total
  SynthConfig small;
  small.electrodes_per_patient = 30;
  small.soz_fraction = 0.15;
  int total = 0;
  for (int p = 0; p < 12; ++p) total += soz_count_for_patient(small, p);
  CHECK(total == 54);
}

TEST_CASE("clustered SOZ assignment is spatially contiguous") {
  Rng rng(3);
  auto montage = synth_montage(30, 6, /*cluster=*/true, rng);
  for (const auto& e : montage) {
    if (!e.soz) continue;
    double nearest = 1e9;
    for (const auto& o : montage) {
      if (!o.soz || o.id == e.id) continue;
      nearest = std::min(nearest, electrode_distance(e, o));
    }
    CHECK(nearest <= kGridPitchMm * std::sqrt(2.0) + 1e-9);
  }
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.n_patients = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SynthConfig{};
  cfg.trials_per_stim = 0;
  CHECK_THROWS_AS(generate_cohort(cfg), Error);
  cfg = SynthConfig{};
  cfg.soz_fraction = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SynthConfig{};
  cfg.separation = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
