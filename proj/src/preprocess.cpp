#include "spes/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "spes/filter.hpp"
#include "spes/kernels.hpp"

namespace spes {

void PreprocessConfig::validate(double fs) const {
  if (!(band_low > 0.0 && band_low < band_high))
    throw Error(ErrorKind::config, "preprocess: need 0 < band_low < band_high");
  if (!(fs > 2.0 * band_high))
    throw Error(ErrorKind::config,
                "preprocess: sampling rate too low for band_high (need fs > 2*band_high)");
  if (!(baseline_lo < baseline_hi && baseline_hi < 0.0))
    throw Error(ErrorKind::config, "preprocess: baseline window must precede the stimulus");
  if (!(epoch_start < epoch_end))
    throw Error(ErrorKind::config, "preprocess: epoch_start must precede epoch_end");
  if (!(channel_drop_lo <= channel_drop_hi && channel_drop_lo >= 0.0 && channel_drop_hi <= 1.0))
    throw Error(ErrorKind::config, "preprocess: channel drop range must be within [0,1]");
  if (noise_sd < 0.0) throw Error(ErrorKind::config, "preprocess: noise_sd must be >= 0");
}

long epoch_start_index(const PreprocessConfig& cfg, double fs) {
  return long(std::ceil(cfg.epoch_start * fs));
}
long epoch_end_index(const PreprocessConfig& cfg, double fs) {
  return long(std::floor(cfg.epoch_end * fs));
}
int epoch_length(const PreprocessConfig& cfg, double fs) {
  return int(epoch_end_index(cfg, fs) - epoch_start_index(cfg, fs) + 1);
}

void bandpass(Signal& signal, double fs, const PreprocessConfig& cfg) {
  cfg.validate(fs);
  auto sos = butterworth_bandpass(cfg.filter_order, cfg.band_low, cfg.band_high, fs);
  // pad with a full period of the lowest passband frequency so the 1 Hz edge
  // settles before real samples start
  int pad = int(std::min<double>(double(signal.n_samples - 1),
                                 std::max(3.0 * (2.0 * double(sos.size()) + 1.0),
                                          std::ceil(fs / cfg.band_low))));
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (kernels::parallel_allowed())
#endif
  for (int c = 0; c < signal.n_channels; ++c) {
    float* ch = signal.channel(c);
    std::vector<double> buf(ch, ch + signal.n_samples);
    sosfiltfilt(sos, buf, pad);
    for (long i = 0; i < signal.n_samples; ++i) ch[i] = float(buf[size_t(i)]);
  }
}

std::vector<Epochs> epoch_record(const PatientRecord& record, const PreprocessConfig& cfg) {
  const double fs = record.sampling_rate;
  cfg.validate(fs);
  const long es = epoch_start_index(cfg, fs);
  const long ee = epoch_end_index(cfg, fs);
  const int t_len = int(ee - es + 1);
  const long bs = long(std::ceil(cfg.baseline_lo * fs));
  const long be = long(std::floor(cfg.baseline_hi * fs));
  const long n_baseline = be - bs + 1;

  // pool trials by stimulated electrode (currents merged)
  std::vector<std::pair<std::string, std::vector<long>>> by_site;
  for (const auto& ev : record.stim_events) {
    auto it = std::find_if(by_site.begin(), by_site.end(),
                           [&](const auto& p) { return p.first == ev.stim_electrode_id; });
    if (it == by_site.end())
      by_site.push_back({ev.stim_electrode_id, ev.trial_onsets});
    else
      it->second.insert(it->second.end(), ev.trial_onsets.begin(), ev.trial_onsets.end());
  }

  std::vector<Epochs> out;
  for (auto& [stim_id, onsets] : by_site) {
    const Electrode& stim = record.electrode(stim_id);

    Epochs ep;
    ep.stim_electrode_id = stim_id;
    std::vector<int> kept_idx;
    for (int c = 0; c < int(record.electrodes.size()); ++c) {
      const Electrode& e = record.electrodes[size_t(c)];
      if (e.id == stim_id || electrode_distance(e, stim) <= cfg.exclusion_radius_mm) {
        ep.excluded_channel_ids.push_back(e.id);
      } else {
        kept_idx.push_back(c);
        ep.channel_ids.push_back(e.id);
      }
    }
    if (kept_idx.empty())
      throw Error(ErrorKind::missing_data,
                  record.patient_id + ": all channels excluded for stimulation at " + stim_id);

    std::vector<long> usable;
    for (long onset : onsets) {
      if (onset + bs < 0 || onset + ee >= record.signal.n_samples)
        ++ep.dropped_trials;
      else
        usable.push_back(onset);
    }

    ep.data.n_trials = int(usable.size());
    ep.data.n_channels = int(kept_idx.size());
    ep.data.n_samples = t_len;
    ep.data.values.resize(ep.data.numel());
    for (int n = 0; n < ep.data.n_trials; ++n) {
      long onset = usable[size_t(n)];
      for (int c = 0; c < ep.data.n_channels; ++c) {
        const float* src = record.signal.channel(kept_idx[size_t(c)]);
        double baseline = 0.0;
        for (long i = onset + bs; i <= onset + be; ++i) baseline += double(src[i]);
        baseline /= double(n_baseline);
        float* dst = ep.data.trial_channel(n, c);
        for (int i = 0; i < t_len; ++i)
          dst[i] = float(double(src[onset + es + i]) - baseline);
      }
    }
    out.push_back(std::move(ep));
  }
  return out;
}

PatientRecord preprocess_record(const PatientRecord& record, const PreprocessConfig& cfg) {
  PatientRecord out = record;
  bandpass(out.signal, out.sampling_rate, cfg);
  out.epochs = epoch_record(out, cfg);
  out.signal = Signal{};
  out.stim_events.clear();
  return out;
}

void StandardizationAccumulator::add_value(double v) {
  ++count;
  sum += v;
  sum_sq += v * v;
}

void StandardizationAccumulator::add(const Epochs& ep) {
  for (float v : ep.data.values) add_value(double(v));
}

void StandardizationAccumulator::combine(const StandardizationAccumulator& o) {
  count += o.count;
  sum += o.sum;
  sum_sq += o.sum_sq;
}

StandardizationStats StandardizationAccumulator::finalize() const {
  if (count == 0)
    throw Error(ErrorKind::degenerate, "standardization: no training data");
  double mean = sum / double(count);
  double var = sum_sq / double(count) - mean * mean;
  if (!(var > 0.0))
    throw Error(ErrorKind::degenerate, "standardization: zero-variance training data");
  return {mean, std::sqrt(var)};
}

StandardizationStats fit_standardization(const std::vector<Epochs>& train_epochs) {
  StandardizationAccumulator acc;
  for (const auto& ep : train_epochs) acc.add(ep);
  return acc.finalize();
}

void apply_standardization(std::vector<float>& values, const StandardizationStats& stats) {
  float mean = float(stats.mean);
  float inv = float(1.0 / stats.sd);
  for (float& v : values) v = (v - mean) * inv;
}

void apply_standardization(Epochs& epochs, const StandardizationStats& stats) {
  apply_standardization(epochs.data.values, stats);
}

void augment_noise(std::vector<float>& values, double sd, Rng& rng) {
  if (sd == 0.0) return;
  for (float& v : values) v += float(rng.normal(0.0, sd));
}

}  // namespace spes
