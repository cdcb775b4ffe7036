#include "spes/paradigm.hpp"

#include <algorithm>
#include <numeric>

namespace spes {

const char* to_string(Paradigm p) {
  return p == Paradigm::divergent ? "divergent" : "convergent";
}

AveragedResponse average_trials(const ResponseTensor& x) {
  if (x.n_trials < 1) throw Error(ErrorKind::input, "average_trials: no trials");
  AveragedResponse out;
  out.n_channels = x.n_channels;
  out.n_samples = x.n_samples;
  out.values.assign(size_t(x.n_channels) * size_t(x.n_samples), 0.0f);
  for (int c = 0; c < x.n_channels; ++c) {
    float* dst = out.channel(c);
    for (int t = 0; t < x.n_samples; ++t) {
      double acc = 0.0;
      for (int n = 0; n < x.n_trials; ++n) acc += double(x.trial_channel(n, c)[t]);
      dst[t] = float(acc / double(x.n_trials));
    }
  }
  return out;
}

int SiteAverage::row_of(const std::string& channel_id) const {
  for (size_t i = 0; i < channel_ids.size(); ++i)
    if (channel_ids[i] == channel_id) return int(i);
  return -1;
}

const SiteAverage* AveragedPatient::site(const std::string& stim_id) const {
  for (const auto& s : sites)
    if (s.stim_id == stim_id) return &s;
  return nullptr;
}

const Electrode& AveragedPatient::electrode(const std::string& id) const {
  for (const auto& e : electrodes)
    if (e.id == id) return e;
  throw Error(ErrorKind::integrity, patient_id + ": no electrode '" + id + "'");
}

AveragedPatient average_patient(const PatientRecord& record) {
  if (record.epochs.empty())
    throw Error(ErrorKind::missing_data,
                record.patient_id + ": record has no epochs (preprocess first)");
  AveragedPatient out;
  out.patient_id = record.patient_id;
  out.electrodes = record.electrodes;
  out.outcome = record.outcome;
  for (const auto& ep : record.epochs) {
    SiteAverage s;
    s.stim_id = ep.stim_electrode_id;
    s.channel_ids = ep.channel_ids;
    s.avg = average_trials(ep.data);
    out.sites.push_back(std::move(s));
  }
  return out;
}

namespace {

// Subset of `budget` row indices out of n (0 = keep all). The result depends
// only on the drawn set, never on draw order, so a full-budget draw matches
// the canonical all-channels assembly exactly.
std::vector<int> budget_rows(int n, int budget, Rng& rng) {
  std::vector<int> rows;
  if (budget <= 0 || budget >= n) {
    rows.resize(size_t(n));
    std::iota(rows.begin(), rows.end(), 0);
    if (budget > n) {  // fill the fixed CNN input shape with replacement
      for (int i = n; i < budget; ++i) rows.push_back(int(rng.uniform_index(uint64_t(n))));
      std::sort(rows.begin(), rows.end());
    }
    return rows;
  }
  rows = rng.sample_without_replacement(n, budget);
  std::sort(rows.begin(), rows.end());
  return rows;
}

ParadigmSample gather(const AveragedPatient& patient, const Electrode& target,
                      Paradigm paradigm, const std::vector<std::string>& ids,
                      const std::vector<const float*>& row_ptrs, int t_len, int budget,
                      Rng& rng) {
  std::vector<int> rows = budget_rows(int(ids.size()), budget, rng);

  // ascending by distance to the target; stable so equal distances keep
  // montage order
  std::vector<double> dist(rows.size());
  for (size_t i = 0; i < rows.size(); ++i)
    dist[i] = electrode_distance(target, patient.electrode(ids[size_t(rows[i])]));
  std::vector<int> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist[size_t(a)] < dist[size_t(b)]; });

  ParadigmSample s;
  s.target_electrode_id = target.id;
  s.paradigm = paradigm;
  s.n_channels = int(rows.size());
  s.n_samples = t_len;
  s.label = target.soz;
  s.values.resize(size_t(s.n_channels) * size_t(t_len));
  for (size_t i = 0; i < order.size(); ++i) {
    int r = rows[size_t(order[i])];
    s.channel_ids.push_back(ids[size_t(r)]);
    s.distances_mm.push_back(dist[size_t(order[i])]);
    std::copy_n(row_ptrs[size_t(r)], t_len, s.channel(int(i)));
  }
  return s;
}

}  // namespace

ParadigmSample assemble_divergent(const AveragedPatient& patient, const std::string& stim_id,
                                  int budget, Rng& rng) {
  const SiteAverage* site = patient.site(stim_id);
  if (!site)
    throw Error(ErrorKind::missing_data,
                patient.patient_id + ": no epochs for stimulation at " + stim_id);
  std::vector<const float*> rows;
  for (int c = 0; c < site->avg.n_channels; ++c) rows.push_back(site->avg.channel(c));
  return gather(patient, patient.electrode(stim_id), Paradigm::divergent, site->channel_ids,
                rows, site->avg.n_samples, budget, rng);
}

ParadigmSample assemble_convergent(const AveragedPatient& patient,
                                   const std::string& record_id, int budget, Rng& rng) {
  std::vector<std::string> stim_ids;
  std::vector<const float*> rows;
  int t_len = 0;
  for (const auto& site : patient.sites) {
    if (site.stim_id == record_id) continue;
    int r = site.row_of(record_id);
    if (r < 0) continue;  // record electrode was distance-excluded for this site
    stim_ids.push_back(site.stim_id);
    rows.push_back(site.avg.channel(r));
    t_len = site.avg.n_samples;
  }
  if (rows.empty())
    throw Error(ErrorKind::missing_data,
                patient.patient_id + ": electrode " + record_id +
                    " was excluded from every stimulation epoch");
  return gather(patient, patient.electrode(record_id), Paradigm::convergent, stim_ids, rows,
                t_len, budget, rng);
}

std::vector<std::string> enumerate_targets(const PatientRecord& record) {
  std::vector<std::string> stimulated;
  if (!record.epochs.empty()) {
    for (const auto& ep : record.epochs) stimulated.push_back(ep.stim_electrode_id);
  } else {
    for (const auto& ev : record.stim_events) stimulated.push_back(ev.stim_electrode_id);
  }
  std::vector<std::string> out;  // montage order, stimulated only
  for (const auto& e : record.electrodes)
    if (std::find(stimulated.begin(), stimulated.end(), e.id) != stimulated.end())
      out.push_back(e.id);
  return out;
}

std::vector<std::string> enumerate_targets(const AveragedPatient& patient) {
  std::vector<std::string> out;
  for (const auto& e : patient.electrodes)
    if (patient.site(e.id) != nullptr) out.push_back(e.id);
  return out;
}

void drop_channels(ParadigmSample& sample, double drop_lo, double drop_hi, Rng& rng) {
  if (sample.n_channels <= 1) return;
  double p = rng.uniform(drop_lo, drop_hi);
  int n_drop = int(p * sample.n_channels);
  if (n_drop <= 0) return;
  std::vector<int> drop = rng.sample_without_replacement(sample.n_channels, n_drop);
  std::vector<bool> dead(size_t(sample.n_channels), false);
  for (int d : drop) dead[size_t(d)] = true;

  ParadigmSample kept;
  kept.target_electrode_id = sample.target_electrode_id;
  kept.paradigm = sample.paradigm;
  kept.n_samples = sample.n_samples;
  kept.label = sample.label;
  for (int c = 0; c < sample.n_channels; ++c) {
    if (dead[size_t(c)]) continue;
    kept.channel_ids.push_back(sample.channel_ids[size_t(c)]);
    kept.distances_mm.push_back(sample.distances_mm[size_t(c)]);
    kept.values.insert(kept.values.end(), sample.channel(c), sample.channel(c) + sample.n_samples);
    ++kept.n_channels;
  }
  sample = std::move(kept);
}

}  // namespace spes
