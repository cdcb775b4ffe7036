#include "spes/types.hpp"

#include <algorithm>
#include <set>

namespace spes {

const char* to_string(Lobe l) {
  switch (l) {
    case Lobe::frontal: return "frontal";
    case Lobe::temporal: return "temporal";
    case Lobe::parietal: return "parietal";
    case Lobe::occipital: return "occipital";
    case Lobe::central: return "central";
    case Lobe::other: return "other";
  }
  return "other";
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::seizure_free: return "seizure_free";
    case Outcome::not_seizure_free: return "not_seizure_free";
    case Outcome::unknown: return "unknown";
  }
  return "unknown";
}

Lobe lobe_from_string(const std::string& s) {
  if (s == "frontal") return Lobe::frontal;
  if (s == "temporal") return Lobe::temporal;
  if (s == "parietal") return Lobe::parietal;
  if (s == "occipital") return Lobe::occipital;
  if (s == "central") return Lobe::central;
  if (s == "other") return Lobe::other;
  throw Error(ErrorKind::format, "unknown lobe: '" + s + "'");
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "seizure_free") return Outcome::seizure_free;
  if (s == "not_seizure_free") return Outcome::not_seizure_free;
  if (s == "unknown" || s.empty()) return Outcome::unknown;
  throw Error(ErrorKind::format, "unknown outcome: '" + s + "'");
}

const Electrode& PatientRecord::electrode(const std::string& id) const {
  int i = electrode_index(id);
  if (i < 0)
    throw Error(ErrorKind::integrity,
                "patient " + patient_id + ": no electrode '" + id + "'");
  return electrodes[size_t(i)];
}

int PatientRecord::electrode_index(const std::string& id) const {
  for (size_t i = 0; i < electrodes.size(); ++i)
    if (electrodes[i].id == id) return int(i);
  return -1;
}

void validate(const PatientRecord& rec) {
  if (rec.electrodes.empty())
    throw Error(ErrorKind::format, "patient " + rec.patient_id + ": no electrodes");
  if (!(rec.sampling_rate > 0.0))
    throw Error(ErrorKind::format,
                "patient " + rec.patient_id + ": sampling_rate must be positive");
  std::set<std::string> seen;
  for (const auto& e : rec.electrodes) {
    if (!seen.insert(e.id).second)
      throw Error(ErrorKind::format,
                  "patient " + rec.patient_id + ": duplicate electrode '" + e.id + "'");
    for (double v : e.position_mm)
      if (!std::isfinite(v))
        throw Error(ErrorKind::format,
                    "patient " + rec.patient_id + ": non-finite position for '" + e.id + "'");
  }
  for (const auto& ev : rec.stim_events)
    if (rec.electrode_index(ev.stim_electrode_id) < 0)
      throw Error(ErrorKind::integrity,
                  "patient " + rec.patient_id + ": stim event references unknown electrode '" +
                      ev.stim_electrode_id + "'");
}

}  // namespace spes
