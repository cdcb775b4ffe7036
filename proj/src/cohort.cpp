#include "spes/cohort.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spes/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spes {

namespace {

constexpr int kFormatVersion = 1;

std::string read_text_file(const fs::path& p, ErrorKind kind) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(kind, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string join_commas(const std::vector<std::string>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    out += v[i];
  }
  return out;
}

// enough digits to round-trip a double exactly
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_floats(std::ofstream& out, const float* data, size_t n) {
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(data), std::streamsize(n * 4));
}

std::vector<float> read_floats(const fs::path& p, size_t expected) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::format, "cannot open " + p.string());
  std::vector<float> out(expected);
  in.read(reinterpret_cast<char*>(out.data()), std::streamsize(expected * 4));
  if (size_t(in.gcount()) != expected * 4)
    throw Error(ErrorKind::format, p.string() + ": short read (file truncated?)");
  return out;
}

void write_electrodes_tsv(const PatientRecord& rec, const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
  out << "id\tx\ty\tz\tsoz\tlobe\toutcome\n";
  for (size_t i = 0; i < rec.electrodes.size(); ++i) {
    const auto& e = rec.electrodes[i];
    out << e.id << '\t' << fmt_double(e.position_mm[0]) << '\t'
        << fmt_double(e.position_mm[1]) << '\t' << fmt_double(e.position_mm[2]) << '\t'
        << (e.soz ? 1 : 0) << '\t' << to_string(e.lobe) << '\t'
        << (i == 0 ? to_string(rec.outcome) : "") << '\n';
  }
}

void read_electrodes_tsv(PatientRecord& rec, const fs::path& p) {
  std::istringstream in(read_text_file(p, ErrorKind::format));
  std::string line;
  if (!std::getline(in, line) || split_tabs(line).size() != 7)
    throw Error(ErrorKind::format, p.string() + ": bad header");
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 7)
      throw Error(ErrorKind::format, p.string() + ": expected 7 columns, got " +
                                         std::to_string(f.size()));
    Electrode e;
    e.id = f[0];
    try {
      e.position_mm = {std::stod(f[1]), std::stod(f[2]), std::stod(f[3])};
    } catch (const std::exception&) {
      throw Error(ErrorKind::format, p.string() + ": bad position for '" + e.id + "'");
    }
    if (f[4] == "1")
      e.soz = true;
    else if (f[4] == "0")
      e.soz = false;
    else
      throw Error(ErrorKind::label,
                  p.string() + ": electrode '" + e.id + "' has no SOZ label");
    e.lobe = lobe_from_string(f[5]);
    if (first) {
      rec.outcome = outcome_from_string(f[6]);
      first = false;
    }
    rec.electrodes.push_back(std::move(e));
  }
}

void write_events_tsv(const PatientRecord& rec, const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
  out << "stim_id\tonset_sample\tcurrent_ma\n";
  for (const auto& ev : rec.stim_events)
    for (long onset : ev.trial_onsets)
      out << ev.stim_electrode_id << '\t' << onset << '\t' << fmt_double(ev.current_ma)
          << '\n';
}

void read_events_tsv(PatientRecord& rec, const fs::path& p) {
  std::istringstream in(read_text_file(p, ErrorKind::format));
  std::string line;
  if (!std::getline(in, line) || split_tabs(line).size() != 3)
    throw Error(ErrorKind::format, p.string() + ": bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 3)
      throw Error(ErrorKind::format, p.string() + ": expected 3 columns");
    std::string id = f[0];
    long onset;
    double current;
    try {
      onset = std::stol(f[1]);
      current = std::stod(f[2]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::format, p.string() + ": bad event row");
    }
    // consecutive rows with equal (stim_id, current) form one event group
    if (!rec.stim_events.empty() && rec.stim_events.back().stim_electrode_id == id &&
        rec.stim_events.back().current_ma == current) {
      rec.stim_events.back().trial_onsets.push_back(onset);
    } else {
      rec.stim_events.push_back({id, {onset}, current});
    }
  }
}

void write_epochs_files(const PatientRecord& rec, const fs::path& bin_path,
                        const fs::path& idx_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  std::ofstream idx(idx_path, std::ios::binary);
  if (!bin || !idx) throw Error(ErrorKind::io, "cannot write epochs for " + rec.patient_id);
  idx << "stim_id\toffset_floats\tn_trials\tn_channels\tn_samples\tchannel_ids\t"
         "excluded_channel_ids\tdropped_trials\n";
  size_t offset = 0;
  for (const auto& ep : rec.epochs) {
    write_floats(bin, ep.data.values.data(), ep.data.values.size());
    idx << ep.stim_electrode_id << '\t' << offset << '\t' << ep.data.n_trials << '\t'
        << ep.data.n_channels << '\t' << ep.data.n_samples << '\t'
        << join_commas(ep.channel_ids) << '\t' << join_commas(ep.excluded_channel_ids)
        << '\t' << ep.dropped_trials << '\n';
    offset += ep.data.values.size();
  }
}

void read_epochs_files(PatientRecord& rec, const fs::path& bin_path,
                       const fs::path& idx_path) {
  std::istringstream in(read_text_file(idx_path, ErrorKind::format));
  std::string line;
  if (!std::getline(in, line) || split_tabs(line).size() != 8)
    throw Error(ErrorKind::format, idx_path.string() + ": bad header");
  struct Entry {
    Epochs ep;
    size_t offset;
  };
  std::vector<Entry> entries;
  size_t total = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 8)
      throw Error(ErrorKind::format, idx_path.string() + ": expected 8 columns");
    Entry ent;
    ent.ep.stim_electrode_id = f[0];
    ent.offset = size_t(std::stoull(f[1]));
    ent.ep.data.n_trials = std::stoi(f[2]);
    ent.ep.data.n_channels = std::stoi(f[3]);
    ent.ep.data.n_samples = std::stoi(f[4]);
    ent.ep.channel_ids = split_commas(f[5]);
    ent.ep.excluded_channel_ids = split_commas(f[6]);
    ent.ep.dropped_trials = std::stoi(f[7]);
    if (int(ent.ep.channel_ids.size()) != ent.ep.data.n_channels)
      throw Error(ErrorKind::format, idx_path.string() + ": channel id count mismatch");
    total = std::max(total, ent.offset + size_t(ent.ep.data.numel()));
    entries.push_back(std::move(ent));
  }
  std::vector<float> all = read_floats(bin_path, total);
  for (auto& ent : entries) {
    ent.ep.data.values.assign(all.begin() + long(ent.offset),
                              all.begin() + long(ent.offset) + ent.ep.data.numel());
    rec.epochs.push_back(std::move(ent.ep));
  }
}

}  // namespace

void write_cohort(const std::vector<PatientRecord>& cohort, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "spes-cohort";
  manifest["version"] = kFormatVersion;
  bool epoched = !cohort.empty() && !cohort.front().epochs.empty();
  manifest["kind"] = epoched ? "epoched" : "raw";
  json patients = json::array();

  for (const auto& rec : cohort) {
    validate(rec);
    fs::create_directories(dir / rec.patient_id);
    json p;
    p["id"] = rec.patient_id;
    p["sampling_rate"] = rec.sampling_rate;
    p["electrodes"] = rec.patient_id + "/electrodes.tsv";
    write_electrodes_tsv(rec, dir / rec.patient_id / "electrodes.tsv");
    if (epoched) {
      p["epochs"] = rec.patient_id + "/epochs.bin";
      p["epoch_index"] = rec.patient_id + "/epochs.tsv";
      write_epochs_files(rec, dir / rec.patient_id / "epochs.bin",
                         dir / rec.patient_id / "epochs.tsv");
    } else {
      p["n_channels"] = rec.signal.n_channels;
      p["n_samples"] = rec.signal.n_samples;
      p["signal"] = rec.patient_id + "/signal.bin";
      p["events"] = rec.patient_id + "/events.tsv";
      std::ofstream bin(dir / rec.patient_id / "signal.bin", std::ios::binary);
      if (!bin) throw Error(ErrorKind::io, "cannot write signal for " + rec.patient_id);
      write_floats(bin, rec.signal.data.data(), rec.signal.data.size());
      write_events_tsv(rec, dir / rec.patient_id / "events.tsv");
    }
    patients.push_back(std::move(p));
  }
  manifest["patients"] = std::move(patients);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

void save_epoched_cohort(const std::vector<PatientRecord>& cohort, const fs::path& dir) {
  std::vector<PatientRecord> stripped;
  stripped.reserve(cohort.size());
  for (const auto& rec : cohort) {
    PatientRecord r = rec;
    r.signal = Signal{};
    r.stim_events.clear();
    if (r.epochs.empty())
      throw Error(ErrorKind::config,
                  "patient " + r.patient_id + " has no epochs to save");
    stripped.push_back(std::move(r));
  }
  write_cohort(stripped, dir);
}

std::vector<PatientRecord> load_cohort(const fs::path& dir) {
  fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath))
    throw Error(ErrorKind::format, "no manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(read_text_file(mpath, ErrorKind::format));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, mpath.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "spes-cohort")
    throw Error(ErrorKind::format, mpath.string() + ": not a spes-cohort manifest");
  if (manifest.value("version", -1) != kFormatVersion)
    throw Error(ErrorKind::format, mpath.string() + ": unsupported version");
  std::string kind = manifest.value("kind", "raw");

  std::vector<PatientRecord> cohort;
  for (const auto& p : manifest.at("patients")) {
    PatientRecord rec;
    rec.patient_id = p.at("id").get<std::string>();
    rec.sampling_rate = p.at("sampling_rate").get<double>();
    fs::path epath = dir / p.at("electrodes").get<std::string>();
    if (!fs::exists(epath))
      throw Error(ErrorKind::format, "manifest references missing file " + epath.string());
    read_electrodes_tsv(rec, epath);

    if (kind == "epoched") {
      fs::path bin = dir / p.at("epochs").get<std::string>();
      fs::path idx = dir / p.at("epoch_index").get<std::string>();
      if (!fs::exists(bin) || !fs::exists(idx))
        throw Error(ErrorKind::format, "manifest references missing epoch files for " +
                                           rec.patient_id);
      read_epochs_files(rec, bin, idx);
      for (const auto& ep : rec.epochs) {
        if (rec.electrode_index(ep.stim_electrode_id) < 0)
          throw Error(ErrorKind::integrity,
                      rec.patient_id + ": epochs reference unknown stim electrode '" +
                          ep.stim_electrode_id + "'");
        for (const auto& cid : ep.channel_ids)
          if (rec.electrode_index(cid) < 0)
            throw Error(ErrorKind::integrity,
                        rec.patient_id + ": epochs reference unknown channel '" + cid + "'");
      }
    } else {
      rec.signal.n_channels = p.at("n_channels").get<int>();
      rec.signal.n_samples = p.at("n_samples").get<long>();
      fs::path spath = dir / p.at("signal").get<std::string>();
      if (!fs::exists(spath))
        throw Error(ErrorKind::format, "manifest references missing file " + spath.string());
      rec.signal.data =
          read_floats(spath, size_t(rec.signal.n_channels) * size_t(rec.signal.n_samples));
      if (rec.signal.n_channels != int(rec.electrodes.size()))
        throw Error(ErrorKind::format,
                    rec.patient_id + ": signal channel count does not match electrodes");
      read_events_tsv(rec, dir / p.at("events").get<std::string>());
    }
    validate(rec);
    cohort.push_back(std::move(rec));
  }
  std::sort(cohort.begin(), cohort.end(),
            [](const PatientRecord& a, const PatientRecord& b) {
              return a.patient_id < b.patient_id;
            });
  return cohort;
}

CohortSummary describe_cohort(const std::vector<PatientRecord>& cohort) {
  CohortSummary s;
  s.n_patients = int(cohort.size());
  for (const auto& rec : cohort) {
    s.n_electrodes += long(rec.electrodes.size());
    for (const auto& e : rec.electrodes)
      if (e.soz) ++s.n_soz_electrodes;
    if (!rec.epochs.empty()) {
      s.n_stim_sites += long(rec.epochs.size());
      for (const auto& ep : rec.epochs) s.n_trials += ep.data.n_trials;
    } else {
      s.n_stim_sites += long(rec.stim_events.size());
      for (const auto& ev : rec.stim_events) s.n_trials += long(ev.trial_onsets.size());
    }
  }
  s.soz_fraction =
      s.n_electrodes > 0 ? double(s.n_soz_electrodes) / double(s.n_electrodes) : 0.0;
  return s;
}

LobeDistribution lobe_distribution(const std::vector<PatientRecord>& cohort) {
  if (cohort.empty()) throw Error(ErrorKind::input, "lobe_distribution: empty cohort");
  LobeDistribution d;
  long total = 0, soz_total = 0;
  std::map<Lobe, long> all_counts, soz_counts;
  for (Lobe l : {Lobe::frontal, Lobe::temporal, Lobe::parietal, Lobe::occipital,
                 Lobe::central, Lobe::other}) {
    all_counts[l] = 0;
    soz_counts[l] = 0;
  }
  for (const auto& rec : cohort)
    for (const auto& e : rec.electrodes) {
      ++all_counts[e.lobe];
      ++total;
      if (e.soz) {
        ++soz_counts[e.lobe];
        ++soz_total;
      }
    }
  for (auto& [lobe, n] : all_counts) d.all_fraction[lobe] = double(n) / double(total);
  d.no_soz_electrodes = soz_total == 0;
  for (auto& [lobe, n] : soz_counts)
    d.soz_fraction[lobe] = d.no_soz_electrodes ? 0.0 : double(n) / double(soz_total);
  d.overall_soz_fraction = double(soz_total) / double(total);
  return d;
}

uint64_t cohort_hash(const fs::path& dir) {
  fs::path mpath = dir / "manifest.json";
  std::string manifest_text = read_text_file(mpath, ErrorKind::format);
  uint64_t h = fnv1a64(manifest_text);
  json manifest = json::parse(manifest_text);
  auto mix_file = [&](const fs::path& p) {
    std::string bytes = read_text_file(p, ErrorKind::format);
    h ^= fnv1a64(bytes);
    h *= 0x100000001B3ULL;
  };
  for (const auto& p : manifest.at("patients")) {
    for (const char* key : {"electrodes", "signal", "events", "epochs", "epoch_index"})
      if (p.contains(key)) mix_file(dir / p.at(key).get<std::string>());
  }
  return h;
}

}  // namespace spes
