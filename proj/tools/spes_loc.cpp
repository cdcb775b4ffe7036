// spes-loc: synthetic-cohort generation, preprocessing, training and
// evaluation for SPES-based seizure-onset-zone localisation.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spes/ablation.hpp"
#include "spes/cohort.hpp"
#include "spes/experiment.hpp"
#include "spes/report.hpp"
#include "spes/rng.hpp"
#include "spes/synth.hpp"
#include "spes/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spes;

namespace {

std::string timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

uint64_t text_hash(const std::string& s) { return fnv1a64(s); }

std::string hex64(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

// every command records what produced its outputs
void write_run_manifest(const fs::path& dir, const std::string& command,
                        const json& inputs, const json& outputs, uint64_t seed) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = seed;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["timestamp"] = timestamp();
  fs::create_directories(dir);
  std::ofstream out(dir / ("manifest_" + command + ".json"), std::ios::binary);
  out << j.dump(2) << '\n';
}

std::map<std::string, std::string> parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open config file " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = line;
    if (auto pos = s.find('#'); pos != std::string::npos) s.erase(pos);
    auto trim = [](std::string& t) {
      t.erase(0, t.find_first_not_of(" \t\r"));
      t.erase(t.find_last_not_of(" \t\r") + 1);
    };
    trim(s);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::config, path.string() + ":" + std::to_string(lineno) +
                                         ": expected key = value");
    std::string key = s.substr(0, eq), value = s.substr(eq + 1);
    trim(key);
    trim(value);
    kv[key] = value;
  }
  return kv;
}

std::string default_out(const std::string& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv("SPES_LOC_OUT")) return env;
  throw Error(ErrorKind::config, "--out not given and SPES_LOC_OUT is not set");
}

std::vector<Family> parse_families(const std::string& spec) {
  std::vector<Family> out;
  if (spec == "all") {
    out = {Family::cnn_divergent, Family::cnn_convergent, Family::cnn_transformer};
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(family_from_string(item));
  if (out.empty()) throw Error(ErrorKind::config, "no model family given");
  return out;
}

FoldPlan load_plan(const fs::path& results_dir) {
  std::ifstream in(results_dir / "plan.json");
  if (!in) throw Error(ErrorKind::config, "no plan.json in " + results_dir.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FoldPlan::from_json(ss.str());
}

int cmd_synth(const SynthConfig& cfg, const std::string& out_arg, bool force) {
  fs::path out = default_out(out_arg);
  if (fs::exists(out / "manifest.json") && !force) {
    std::cout << "cohort " << out.string() << " is up to date (use --force to regenerate)\n";
    std::cout << "cohort_hash " << hex64(cohort_hash(out)) << "\n";
    return 0;
  }
  auto cohort = generate_cohort(cfg);
  write_cohort(cohort, out);
  auto summary = describe_cohort(cohort);
  uint64_t h = cohort_hash(out);
  std::cout << "wrote " << summary.n_patients << " patients, " << summary.n_electrodes
            << " electrodes (" << summary.n_soz_electrodes << " SOZ), " << summary.n_trials
            << " trials to " << out.string() << "\n";
  std::cout << "cohort_hash " << hex64(h) << "\n";
  write_run_manifest(out, "synth", {{"seed", cfg.seed}},
                     {{"cohort", out.string()}, {"cohort_hash", hex64(h)}}, cfg.seed);
  return 0;
}

int cmd_preprocess(const std::string& in_arg, const std::string& out_arg, bool force) {
  fs::path in = in_arg, out = default_out(out_arg);
  uint64_t in_hash = cohort_hash(in);
  fs::path stamp = out / "manifest_preprocess.json";
  if (fs::exists(stamp) && !force) {
    json j = json::parse(std::ifstream(stamp));
    if (j["inputs"].value("cohort_hash", "") == hex64(in_hash)) {
      std::cout << "epochs in " << out.string() << " are up to date\n";
      return 0;
    }
  }
  auto cohort = load_cohort(in);
  PreprocessConfig pcfg;
  std::vector<PatientRecord> epoched;
  long dropped = 0;
  for (const auto& rec : cohort) {
    epoched.push_back(preprocess_record(rec, pcfg));
    for (const auto& ep : epoched.back().epochs) dropped += ep.dropped_trials;
  }
  save_epoched_cohort(epoched, out);
  if (dropped > 0)
    std::cerr << "warning: dropped " << dropped << " trials too close to recording edges\n";
  std::cout << "wrote epochs for " << epoched.size() << " patients to " << out.string()
            << "\n";
  write_run_manifest(out, "preprocess",
                     {{"cohort", in.string()}, {"cohort_hash", hex64(in_hash)}},
                     {{"epochs", out.string()}, {"epochs_hash", hex64(cohort_hash(out))}},
                     0);
  return 0;
}

struct TrainArgs {
  std::string cohort, out, family = "cnn_transformer", config;
  uint64_t seed = 0;
  int k = 5, repeats = 5, jobs = 1;
  bool force = false;
};

int cmd_train(const TrainArgs& args) {
  fs::path cohort_dir = args.cohort;
  fs::path out = default_out(args.out);
  auto epoched = load_cohort(cohort_dir);
  CohortData data = prepare_cohort(epoched);

  std::vector<std::string> ids;
  for (const auto& p : data.patients) ids.push_back(p.patient_id);
  FoldPlan plan = plan_folds(ids, args.k, args.repeats, args.seed);

  SuiteOptions opt;
  opt.out_dir = out;
  opt.families = parse_families(args.family);
  opt.seed = args.seed;
  opt.k = args.k;
  opt.repeats = args.repeats;
  opt.jobs = args.jobs;
  opt.force = args.force;
  std::string config_text;
  if (!args.config.empty()) {
    auto kv = parse_config_file(args.config);
    TrainConfig cfg = TrainConfig::from_kv(kv);
    for (Family f : opt.families) {
      TrainConfig c = cfg;
      c.family = f;
      opt.configs[f] = c;
    }
    std::ifstream in(args.config);
    std::stringstream ss;
    ss << in.rdbuf();
    config_text = ss.str();
  }

  auto statuses = run_suite(data, plan, opt);
  for (const auto& st : statuses) {
    std::printf("%-16s r%d f%d  mean test AUROC %.4f\n", to_string(st.family), st.repeat,
                st.fold, st.mean_test_auroc);
  }
  write_run_manifest(out, "train",
                     {{"cohort", cohort_dir.string()},
                      {"cohort_hash", hex64(cohort_hash(cohort_dir))},
                      {"config_hash", hex64(text_hash(config_text))},
                      {"family", args.family}},
                     {{"results", out.string()}}, args.seed);
  return 0;
}

int cmd_tune(const TrainArgs& args, int trials, int tuning_epochs) {
  fs::path out = default_out(args.out);
  auto epoched = load_cohort(args.cohort);
  CohortData data = prepare_cohort(epoched);
  std::vector<std::string> ids;
  for (const auto& p : data.patients) ids.push_back(p.patient_id);
  FoldPlan plan = plan_folds(ids, args.k, args.repeats, args.seed);

  SearchSpace space;
  space.trials = trials;
  space.tuning_epochs = tuning_epochs;
  Family family = family_from_string(args.family);
  TrainConfig base = paper_config(family);
  base.seed = args.seed;
  if (!args.config.empty()) base = TrainConfig::from_kv(parse_config_file(args.config));
  // the search stream is separate from the run streams
  uint64_t tune_seed = Rng(args.seed).substream("tune").seed();
  TuneResult result = tune(data, plan, family, space, base, tune_seed);

  fs::create_directories(out);
  fs::path best_path = out / ("tuned_" + std::string(to_string(family)) + ".cfg");
  {
    std::ofstream cfg_out(best_path, std::ios::binary);
    cfg_out << "# best of " << result.trials.size() << " trials, " << tuning_epochs
            << " epochs each\n";
    for (const auto& [key, value] : result.best.to_kv())
      cfg_out << key << " = " << value << "\n";
  }
  std::cout << "trials:\n";
  for (const auto& t : result.trials) {
    if (t.failed)
      std::printf("  lr %.2e dropout %.3f -> failed (%s)\n", t.config.learning_rate,
                  t.config.dropout, t.error.c_str());
    else
      std::printf("  lr %.2e dropout %.3f budget %d emb %d layers %d -> val AUROC %.4f\n",
                  t.config.learning_rate, t.config.dropout, t.config.channel_budget,
                  t.config.embedding_dim, t.config.num_layers, t.val_auroc);
  }
  std::cout << "wrote " << best_path.string() << "\n";
  write_run_manifest(out, "tune", {{"cohort", args.cohort}, {"family", args.family}},
                     {{"config", best_path.string()}}, args.seed);
  return 0;
}

int cmd_evaluate(const std::string& results_arg, const std::string& family_spec) {
  fs::path results = results_arg;
  FoldPlan plan = load_plan(results);
  SuiteReport report = evaluate_suite(results, plan, parse_families(family_spec));
  write_summary(report, results / "report");
  std::cout << render_summary_text(report);
  std::cout << "wrote " << (results / "report" / "summary.txt").string() << "\n";
  return 0;
}

int cmd_ablate(const std::string& results_arg, const std::string& cohort_arg,
               const std::string& sizes_arg, int draws, uint64_t seed) {
  fs::path results = results_arg;
  auto epoched = load_cohort(cohort_arg);
  CohortData data = prepare_cohort(epoched);
  FoldPlan plan = load_plan(results);
  std::vector<int> sizes;
  std::stringstream ss(sizes_arg);
  std::string item;
  while (std::getline(ss, item, ',')) sizes.push_back(std::stoi(item));
  if (sizes.empty()) throw Error(ErrorKind::config, "ablate: no subset sizes given");
  auto curve = channel_sensitivity(results, data, plan, sizes, draws, seed);
  fs::create_directories(results / "report");
  write_ablation_series(curve, results / "report" / "ablation.tsv");
  for (const auto& pt : curve)
    std::printf("n=%-4d mean AUROC %.4f  [%.4f, %.4f]%s\n", pt.n, pt.mean_auroc, pt.ci.lo,
                pt.ci.hi, pt.clamped ? "  (clamped)" : "");
  write_run_manifest(results, "ablate", {{"cohort", cohort_arg}, {"sizes", sizes_arg}},
                     {{"series", (results / "report" / "ablation.tsv").string()}}, seed);
  return 0;
}

int cmd_report(const std::string& results_arg, const std::string& family_spec) {
  fs::path results = results_arg;
  FoldPlan plan = load_plan(results);
  SuiteReport report = evaluate_suite(results, plan, parse_families(family_spec));
  write_summary(report, results / "report");
  write_series(report, results, results / "report");
  std::cout << render_summary_text(report);
  if (fs::exists(results / "report" / "ablation.tsv")) {
    std::cout << "channel sensitivity:\n";
    for (const auto& pt : read_ablation_series(results / "report" / "ablation.tsv"))
      std::printf("  n=%-4d AUROC %.4f [%.4f, %.4f]\n", pt.n, pt.mean_auroc, pt.ci.lo,
                  pt.ci.hi);
  }
  std::cout << "report written to " << (results / "report").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPES seizure-onset-zone localisation pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic SPES cohort");
  SynthConfig scfg;
  scfg.sampling_rate = 512.0;  // desk-scale default; clinical recordings use 2048
  std::string synth_out;
  bool synth_force = false;
  synth->add_option("--out", synth_out, "cohort directory");
  synth->add_option("--seed", scfg.seed, "master seed");
  synth->add_option("--patients", scfg.n_patients, "number of patients");
  synth->add_option("--electrodes", scfg.electrodes_per_patient, "electrodes per patient");
  synth->add_option("--trials", scfg.trials_per_stim, "trials per stimulation site");
  synth->add_option("--soz-fraction", scfg.soz_fraction, "fraction of SOZ electrodes");
  synth->add_option("--separation", scfg.separation, "planted SOZ effect size (0 = none)");
  synth->add_option("--delayed-rate", scfg.delayed_response_rate,
                    "per-trial delayed-response probability at SOZ sites");
  synth->add_option("--noise-sd", scfg.noise_sd, "background noise sd (microvolts)");
  synth->add_option("--fs", scfg.sampling_rate, "sampling rate in Hz");
  synth->add_flag("--force", synth_force, "regenerate even if up to date");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "bandpass, epoch and exclude channels");
  std::string prep_in, prep_out;
  bool prep_force = false;
  prep->add_option("--in", prep_in, "raw cohort directory")->required();
  prep->add_option("--out", prep_out, "epoched cohort directory");
  prep->add_flag("--force", prep_force, "re-run even if up to date");

  // train
  auto* train = app.add_subcommand("train", "train one or more model families");
  TrainArgs targs;
  train->add_option("--cohort", targs.cohort, "epoched cohort directory")->required();
  train->add_option("--out", targs.out, "results directory");
  train->add_option("--family", targs.family,
                    "cnn_divergent | cnn_convergent | cnn_transformer | all or a comma list");
  train->add_option("--config", targs.config, "key = value training config file");
  train->add_option("--seed", targs.seed, "master seed");
  train->add_option("--k", targs.k, "folds");
  train->add_option("--repeats", targs.repeats, "repeats");
  train->add_option("--jobs", targs.jobs, "parallel runs");
  train->add_flag("--force", targs.force, "retrain completed runs");

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "random hyperparameter search");
  TrainArgs uargs;
  int tune_trials = 10, tune_epochs = 10;
  tune_cmd->add_option("--cohort", uargs.cohort, "epoched cohort directory")->required();
  tune_cmd->add_option("--out", uargs.out, "output directory");
  tune_cmd->add_option("--family", uargs.family, "model family")->required();
  tune_cmd->add_option("--config", uargs.config, "base config file");
  tune_cmd->add_option("--seed", uargs.seed, "master seed");
  tune_cmd->add_option("--k", uargs.k, "folds");
  tune_cmd->add_option("--repeats", uargs.repeats, "repeats");
  tune_cmd->add_option("--trials", tune_trials, "search trials");
  tune_cmd->add_option("--tuning-epochs", tune_epochs, "epochs per trial");

  // evaluate / ablate / report
  auto* eval = app.add_subcommand("evaluate", "compute metrics from completed runs");
  std::string eval_results, eval_family = "all";
  eval->add_option("--results", eval_results, "results directory")->required();
  eval->add_option("--family", eval_family, "families to evaluate");

  auto* ablate = app.add_subcommand("ablate", "channel-sensitivity analysis");
  std::string ab_results, ab_cohort, ab_sizes = "4,8,16,30";
  int ab_draws = 8;
  uint64_t ab_seed = 0;
  ablate->add_option("--results", ab_results, "results directory")->required();
  ablate->add_option("--cohort", ab_cohort, "epoched cohort directory")->required();
  ablate->add_option("--sizes", ab_sizes, "comma-separated channel counts");
  ablate->add_option("--draws", ab_draws, "random subsets per target");
  ablate->add_option("--seed", ab_seed, "seed");

  auto* rep = app.add_subcommand("report", "emit summary tables and plot series");
  std::string rep_results, rep_family = "all";
  rep->add_option("--results", rep_results, "results directory")->required();
  rep->add_option("--family", rep_family, "families to include");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  try {
    if (synth->parsed()) return cmd_synth(scfg, synth_out, synth_force);
    if (prep->parsed()) return cmd_preprocess(prep_in, prep_out, prep_force);
    if (train->parsed()) return cmd_train(targs);
    if (tune_cmd->parsed()) return cmd_tune(uargs, tune_trials, tune_epochs);
    if (eval->parsed()) return cmd_evaluate(eval_results, eval_family);
    if (ablate->parsed()) return cmd_ablate(ab_results, ab_cohort, ab_sizes, ab_draws, ab_seed);
    if (rep->parsed()) return cmd_report(rep_results, rep_family);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
