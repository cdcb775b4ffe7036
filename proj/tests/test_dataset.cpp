#include <doctest.h>

#include <fstream>

#include "spes/cohort.hpp"
#include "spes/rng.hpp"
#include "spes/synth.hpp"
#include "support.hpp"

using namespace spes;
using namespace spes::testing;

namespace {

PatientRecord tiny_record(const std::string& id, bool with_soz = true) {
  PatientRecord rec;
  rec.patient_id = id;
  rec.sampling_rate = 512.0;
  rec.electrodes.push_back(make_electrode("A", 0, 0, 0, with_soz, Lobe::temporal));
  rec.electrodes.push_back(make_electrode("B", 10, 0, 0, false, Lobe::frontal));
  rec.outcome = Outcome::seizure_free;
  rec.signal.n_channels = 2;
  rec.signal.n_samples = 4096;
  rec.signal.data.assign(2 * 4096, 0.0f);
  Rng rng(fnv1a64(id));
  for (auto& v : rec.signal.data) v = float(rng.normal(0.0, 1.0));
  rec.stim_events.push_back({"A", {1200, 2400}, 4.0});
  rec.stim_events.push_back({"B", {1800, 3000}, 8.0});
  return rec;
}

}  // namespace

TEST_CASE("electrode_distance basics") {
  Electrode a = make_electrode("a", 0, 0, 0, false);
  Electrode b = make_electrode("b", 3, 4, 0, false);
  CHECK(electrode_distance(a, a) == 0.0);
  CHECK(electrode_distance(a, b) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("electrode_distance metric axioms on random pairs") {
  Rng rng(11);
  auto rand_e = [&](const std::string& id) {
    return make_electrode(id, rng.uniform(-50, 50), rng.uniform(-50, 50),
                          rng.uniform(-50, 50), false);
  };
  for (int i = 0; i < 100; ++i) {
    Electrode a = rand_e("a"), b = rand_e("b"), c = rand_e("c");
    double ab = electrode_distance(a, b);
    double ba = electrode_distance(b, a);
    double ac = electrode_distance(a, c);
    double cb = electrode_distance(c, b);
    CHECK(ab == ba);  // symmetry
    CHECK(ab >= 0.0);
    CHECK(ab <= ac + cb + 1e-9);  // triangle inequality

    // against the component-wise sum-of-squares oracle
    double oracle = 0.0;
    for (int d = 0; d < 3; ++d) {
      double diff = a.position_mm[size_t(d)] - b.position_mm[size_t(d)];
      oracle += diff * diff;
    }
    oracle = std::sqrt(oracle);
    CHECK(ab == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("cohort writer/loader round-trip") {
  TempDir dir("roundtrip");
  std::vector<PatientRecord> cohort = {tiny_record("P002"), tiny_record("P001")};
  write_cohort(cohort, dir.path());
  auto loaded = load_cohort(dir.path());

  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].patient_id == "P001");  // deterministic ordering by id
  CHECK(loaded[1].patient_id == "P002");
  const PatientRecord& in = cohort[1];  // P001
  const PatientRecord& out = loaded[0];
  CHECK(out.sampling_rate == in.sampling_rate);
  CHECK(out.outcome == in.outcome);
  REQUIRE(out.electrodes.size() == in.electrodes.size());
  for (size_t i = 0; i < in.electrodes.size(); ++i) {
    CHECK(out.electrodes[i].id == in.electrodes[i].id);
    CHECK(out.electrodes[i].position_mm == in.electrodes[i].position_mm);
    CHECK(out.electrodes[i].soz == in.electrodes[i].soz);
    CHECK(out.electrodes[i].lobe == in.electrodes[i].lobe);
  }
  REQUIRE(out.stim_events.size() == in.stim_events.size());
  for (size_t i = 0; i < in.stim_events.size(); ++i) {
    CHECK(out.stim_events[i].stim_electrode_id == in.stim_events[i].stim_electrode_id);
    CHECK(out.stim_events[i].trial_onsets == in.stim_events[i].trial_onsets);
    CHECK(out.stim_events[i].current_ma == in.stim_events[i].current_ma);
  }
  CHECK(out.signal.data == in.signal.data);  // bit-identical float payload
}

TEST_CASE("synth cohort round-trips bit-identically") {
  SynthConfig cfg;
  cfg.n_patients = 3;
  cfg.electrodes_per_patient = 9;
  cfg.trials_per_stim = 2;
  cfg.sampling_rate = 512.0;
  cfg.seed = 77;
  auto cohort = generate_cohort(cfg);
  TempDir dir("synthrt");
  write_cohort(cohort, dir.path());
  auto loaded = load_cohort(dir.path());
  REQUIRE(loaded.size() == cohort.size());
  for (size_t p = 0; p < cohort.size(); ++p) {
    CHECK(loaded[p].patient_id == cohort[p].patient_id);
    CHECK(loaded[p].signal.data == cohort[p].signal.data);
    CHECK(loaded[p].stim_events.size() == cohort[p].stim_events.size());
  }
}

TEST_CASE("loader error paths") {
  SUBCASE("missing manifest is a format error") {
    TempDir dir("nomanifest");
    CHECK_THROWS_AS(load_cohort(dir.path()), Error);
    try {
      load_cohort(dir.path());
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::format);
    }
  }

  SUBCASE("manifest referencing a missing signal file is a format error") {
    TempDir dir("missing_signal");
    write_cohort({tiny_record("P001")}, dir.path());
    std::filesystem::remove(dir.path() / "P001" / "signal.bin");
    try {
      load_cohort(dir.path());
      FAIL("expected a format error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::format);
    }
  }

  SUBCASE("unresolvable stim electrode is an integrity error") {
    TempDir dir("badstim");
    PatientRecord rec = tiny_record("P001");
    write_cohort({rec}, dir.path());
    std::ofstream ev(dir.path() / "P001" / "events.tsv", std::ios::binary);
    ev << "stim_id\tonset_sample\tcurrent_ma\nZZ\t1200\t4\n";
    ev.close();
    try {
      load_cohort(dir.path());
      FAIL("expected an integrity error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::integrity);
    }
  }

  SUBCASE("electrode without a SOZ label is a label error") {
    TempDir dir("badlabel");
    write_cohort({tiny_record("P001")}, dir.path());
    std::ofstream el(dir.path() / "P001" / "electrodes.tsv", std::ios::binary);
    el << "id\tx\ty\tz\tsoz\tlobe\toutcome\n";
    el << "A\t0\t0\t0\t\ttemporal\tseizure_free\n";
    el << "B\t10\t0\t0\t0\tfrontal\t\n";
    el.close();
    try {
      load_cohort(dir.path());
      FAIL("expected a label error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::label);
    }
  }

  SUBCASE("duplicate electrode ids are rejected") {
    PatientRecord rec = tiny_record("P001");
    rec.electrodes.push_back(rec.electrodes[0]);
    CHECK_THROWS_AS(validate(rec), Error);
  }
}

TEST_CASE("lobe_distribution fractions") {
  SUBCASE("all electrodes in one lobe") {
    PatientRecord rec = tiny_record("P001");
    for (auto& e : rec.electrodes) e.lobe = Lobe::temporal;
    auto d = lobe_distribution({rec});
    CHECK(d.all_fraction.at(Lobe::temporal) == 1.0);
    CHECK(d.soz_fraction.at(Lobe::temporal) == 1.0);
  }

  SUBCASE("fractions sum to one and match hand counts") {
    SynthConfig cfg;
    cfg.n_patients = 4;
    cfg.electrodes_per_patient = 13;
    cfg.seed = 5;
    cfg.trials_per_stim = 1;
    cfg.sampling_rate = 512.0;
    auto cohort = generate_cohort(cfg);
    auto d = lobe_distribution(cohort);
    double sum_all = 0.0, sum_soz = 0.0;
    for (auto& [lobe, f] : d.all_fraction) sum_all += f;
    for (auto& [lobe, f] : d.soz_fraction) sum_soz += f;
    CHECK(sum_all == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sum_soz == doctest::Approx(1.0).epsilon(1e-9));

    long soz = 0, total = 0;
    for (const auto& rec : cohort)
      for (const auto& e : rec.electrodes) {
        ++total;
        if (e.soz) ++soz;
      }
    CHECK(d.overall_soz_fraction == doctest::Approx(double(soz) / double(total)));
  }

  SUBCASE("paper's cohort-level fraction: 298 of 2066 is 14.4%") {
    // 2066 electrodes of which 298 SOZ, split over two synthetic patients
    std::vector<PatientRecord> cohort;
    PatientRecord rec;
    rec.patient_id = "P001";
    rec.sampling_rate = 2048.0;
    for (int i = 0; i < 2066; ++i) {
      bool soz = i < 298;
      rec.electrodes.push_back(
          make_electrode("E" + std::to_string(i), double(i), 0, 0, soz, Lobe::temporal));
    }
    cohort.push_back(std::move(rec));
    auto d = lobe_distribution(cohort);
    CHECK(d.overall_soz_fraction == doctest::Approx(0.144).epsilon(2e-3));
  }

  SUBCASE("zero SOZ electrodes -> flagged all-zero series") {
    PatientRecord rec = tiny_record("P001", /*with_soz=*/false);
    auto d = lobe_distribution({rec});
    CHECK(d.no_soz_electrodes);
    for (auto& [lobe, f] : d.soz_fraction) CHECK(f == 0.0);
  }
}

TEST_CASE("describe_cohort counts") {
  SynthConfig cfg;
  cfg.n_patients = 12;
  cfg.electrodes_per_patient = 30;
  cfg.soz_fraction = 0.15;
  cfg.trials_per_stim = 1;
  cfg.sampling_rate = 512.0;
  cfg.seed = 3;
  auto cohort = generate_cohort(cfg);
  auto s = describe_cohort(cohort);
  CHECK(s.n_patients == 12);
  CHECK(s.n_electrodes == 360);
  CHECK(s.n_soz_electrodes == 54);  // 12 * 30 * 0.15
}
