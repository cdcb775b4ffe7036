#include "spes/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "spes/graph.hpp"
#include "spes/kernels.hpp"
#include "spes/optim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spes {

// ------------------------------------------------------------------- folds

std::vector<FoldPlan::Run> FoldPlan::runs() const {
  std::vector<Run> out;
  for (int r = 0; r < repeats; ++r)
    for (int f = 0; f < k; ++f) out.push_back({r, f});
  return out;
}

int FoldPlan::fold_of(int repeat, const std::string& patient_id) const {
  auto it = std::find(patient_ids.begin(), patient_ids.end(), patient_id);
  if (it == patient_ids.end())
    throw Error(ErrorKind::input, "fold plan does not cover patient " + patient_id);
  return assignments[size_t(repeat)][size_t(it - patient_ids.begin())];
}

std::vector<std::string> FoldPlan::patients_in_role(int repeat, int test_fold,
                                                    Role role) const {
  const int val_fold = (test_fold + 1) % k;
  std::vector<std::string> out;
  for (size_t p = 0; p < patient_ids.size(); ++p) {
    int f = assignments[size_t(repeat)][p];
    bool matches = role == Role::test         ? f == test_fold
                   : role == Role::validation ? f == val_fold
                                              : (f != test_fold && f != val_fold);
    if (matches) out.push_back(patient_ids[p]);
  }
  return out;
}

FoldPlan plan_folds(std::vector<std::string> patient_ids, int k, int repeats,
                    uint64_t seed) {
  if (k < 3) throw Error(ErrorKind::config, "plan_folds: k must be >= 3");
  if (int(patient_ids.size()) < k)
    throw Error(ErrorKind::config, "plan_folds: fewer patients than folds");
  if (repeats < 1) throw Error(ErrorKind::config, "plan_folds: repeats must be >= 1");
  std::sort(patient_ids.begin(), patient_ids.end());
  if (std::adjacent_find(patient_ids.begin(), patient_ids.end()) != patient_ids.end())
    throw Error(ErrorKind::config, "plan_folds: duplicate patient id");

  FoldPlan plan;
  plan.k = k;
  plan.repeats = repeats;
  plan.seed = seed;
  plan.patient_ids = std::move(patient_ids);
  Rng root(seed);
  for (int r = 0; r < repeats; ++r) {
    std::vector<int> order(plan.patient_ids.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rep_rng = root.substream("fold-shuffle", uint64_t(r));
    rep_rng.shuffle(order);
    std::vector<int> folds(plan.patient_ids.size());
    for (size_t i = 0; i < order.size(); ++i)
      folds[size_t(order[i])] = int(i) % k;  // round-robin deal, sizes differ <= 1
    plan.assignments.push_back(std::move(folds));
  }
  return plan;
}

std::string FoldPlan::to_json() const {
  json j;
  j["k"] = k;
  j["repeats"] = repeats;
  j["seed"] = seed;
  j["patient_ids"] = patient_ids;
  j["assignments"] = assignments;
  return j.dump(2);
}

FoldPlan FoldPlan::from_json(const std::string& text) {
  json j = json::parse(text);
  FoldPlan plan;
  plan.k = j.at("k").get<int>();
  plan.repeats = j.at("repeats").get<int>();
  plan.seed = j.at("seed").get<uint64_t>();
  plan.patient_ids = j.at("patient_ids").get<std::vector<std::string>>();
  plan.assignments = j.at("assignments").get<std::vector<std::vector<int>>>();
  return plan;
}

// ------------------------------------------------------------- train config

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorKind::config, "train: epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::config, "train: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw Error(ErrorKind::config, "train: bad learning rate");
  if (family != Family::cnn_transformer && channel_budget < 1)
    throw Error(ErrorKind::config, "train: channel_budget must be >= 1 for CNN families");
  if (dropout < 0.0 || dropout >= 1.0)
    throw Error(ErrorKind::config, "train: dropout must be in [0,1)");
  if (eval_draws < 1) throw Error(ErrorKind::config, "train: eval_draws must be >= 1");
  if (pos_weight < 0.0) throw Error(ErrorKind::config, "train: pos_weight must be >= 0");
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig mc;
  mc.family = family;
  mc.head_dropout = dropout;
  mc.resnet.base_width = base_width;
  mc.resnet.fc_dropout = dropout;
  mc.resnet.embedding_dim = embedding_dim;
  if (family == Family::cnn_transformer) {
    mc.resnet.in_channels = 1;
    mc.transformer.embedding_dim = embedding_dim;
    mc.transformer.num_layers = num_layers;
    mc.transformer.dropout = dropout;
  } else {
    mc.resnet.in_channels = channel_budget;
  }
  return mc;
}

TrainConfig paper_config(Family family) {
  TrainConfig c;
  c.family = family;
  switch (family) {
    case Family::cnn_divergent:
      c.learning_rate = 4.0e-3;
      c.dropout = 0.22;
      c.channel_budget = 49;
      break;
    case Family::cnn_convergent:
      c.learning_rate = 1.3e-3;
      c.dropout = 0.44;
      c.channel_budget = 37;
      break;
    case Family::cnn_transformer:
      c.learning_rate = 1.5e-4;
      c.dropout = 0.46;
      c.embedding_dim = 16;
      c.num_layers = 2;
      break;
  }
  return c;
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  kv["family"] = to_string(family);
  kv["learning_rate"] = num(learning_rate);
  kv["channel_budget"] = std::to_string(channel_budget);
  kv["dropout"] = num(dropout);
  kv["epochs"] = std::to_string(epochs);
  kv["batch_size"] = std::to_string(batch_size);
  kv["pos_weight"] = num(pos_weight);
  kv["seed"] = std::to_string(seed);
  kv["base_width"] = std::to_string(base_width);
  kv["embedding_dim"] = std::to_string(embedding_dim);
  kv["num_layers"] = std::to_string(num_layers);
  kv["eval_draws"] = std::to_string(eval_draws);
  kv["weight_decay"] = num(weight_decay);
  return kv;
}

TrainConfig TrainConfig::from_kv(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  auto get = [&](const char* key, auto parse, auto& out) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    try {
      out = parse(it->second);
    } catch (const std::exception&) {
      throw Error(ErrorKind::config, std::string("config: bad value for '") + key + "'");
    }
  };
  auto it = kv.find("family");
  if (it != kv.end()) c.family = family_from_string(it->second);
  auto to_d = [](const std::string& s) { return std::stod(s); };
  auto to_i = [](const std::string& s) { return std::stoi(s); };
  auto to_u = [](const std::string& s) { return uint64_t(std::stoull(s)); };
  get("learning_rate", to_d, c.learning_rate);
  get("channel_budget", to_i, c.channel_budget);
  get("dropout", to_d, c.dropout);
  get("epochs", to_i, c.epochs);
  get("batch_size", to_i, c.batch_size);
  get("pos_weight", to_d, c.pos_weight);
  get("seed", to_u, c.seed);
  get("base_width", to_i, c.base_width);
  get("embedding_dim", to_i, c.embedding_dim);
  get("num_layers", to_i, c.num_layers);
  get("eval_draws", to_i, c.eval_draws);
  get("weight_decay", to_d, c.weight_decay);
  for (const auto& [key, value] : kv) {
    static const std::set<std::string> known = {
        "family",     "learning_rate", "channel_budget", "dropout",
        "epochs",     "batch_size",    "pos_weight",     "seed",
        "base_width", "embedding_dim", "num_layers",     "eval_draws",
        "weight_decay"};
    if (!known.count(key))
      throw Error(ErrorKind::config, "config: unknown key '" + key + "'");
    (void)value;
  }
  c.validate();
  return c;
}

// ------------------------------------------------------------- cohort data

int CohortData::patient_index(const std::string& id) const {
  for (size_t i = 0; i < patients.size(); ++i)
    if (patients[i].patient_id == id) return int(i);
  return -1;
}

CohortData prepare_cohort(const std::vector<PatientRecord>& epoched) {
  if (epoched.empty()) throw Error(ErrorKind::input, "prepare_cohort: empty cohort");
  CohortData data;
  for (const auto& rec : epoched) {
    if (rec.epochs.empty())
      throw Error(ErrorKind::missing_data,
                  rec.patient_id + ": cohort is not epoched (run preprocess first)");
    StandardizationAccumulator acc;
    for (const auto& ep : rec.epochs) acc.add(ep);
    data.moments.push_back(acc);
    data.targets.push_back(enumerate_targets(rec));
    data.patients.push_back(average_patient(rec));
    data.t_len = rec.epochs.front().data.n_samples;
  }
  return data;
}

// ---------------------------------------------------------------- training

namespace {

Tensor<float> sample_tensor(const ParadigmSample& s) {
  Tensor<float> t({s.n_channels, s.n_samples});
  t.data = s.values;
  return t;
}

ParadigmSample assemble_for_family(const AveragedPatient& patient, const std::string& target,
                                   Family family, int budget, Rng& rng) {
  if (family == Family::cnn_divergent)
    return assemble_divergent(patient, target, budget, rng);
  return assemble_convergent(patient, target, budget, rng);
}

struct TargetRef {
  int patient = 0;
  int target = 0;  // index into data.targets[patient]
};

double predict_target(ModelF& model, const CohortData& data, const TargetRef& ref,
                      const TrainConfig& cfg, const StandardizationStats& stats,
                      uint64_t run_seed) {
  const AveragedPatient& patient = data.patients[size_t(ref.patient)];
  const std::string& target = data.targets[size_t(ref.patient)][size_t(ref.target)];
  const bool is_cnn = cfg.family != Family::cnn_transformer;
  Rng eval_rng =
      Rng(run_seed).substream("eval", uint64_t(ref.patient), uint64_t(ref.target));
  const int draws = is_cnn ? cfg.eval_draws : 1;
  double prob = 0.0;
  for (int d = 0; d < draws; ++d) {
    ParadigmSample s = assemble_for_family(patient, target, cfg.family,
                                           is_cnn ? cfg.channel_budget : 0, eval_rng);
    apply_standardization(s.values, stats);
    prob += model.predict(sample_tensor(s));
  }
  return prob / double(draws);
}

}  // namespace

std::vector<PatientScores> predict_patient_scores(ModelF& model, const CohortData& data,
                                                  const std::vector<int>& patient_idx,
                                                  const TrainConfig& cfg,
                                                  const StandardizationStats& stats,
                                                  uint64_t run_seed) {
  std::vector<PatientScores> out;
  for (int p : patient_idx) {
    const AveragedPatient& patient = data.patients[size_t(p)];
    PatientScores ps;
    ps.patient_id = patient.patient_id;
    ps.outcome = patient.outcome;
    for (size_t t = 0; t < data.targets[size_t(p)].size(); ++t) {
      const std::string& target = data.targets[size_t(p)][t];
      ElectrodeScore es;
      es.electrode_id = target;
      es.soz = patient.electrode(target).soz;
      es.score = predict_target(model, data, {p, int(t)}, cfg, stats, run_seed);
      ps.electrodes.push_back(std::move(es));
    }
    out.push_back(std::move(ps));
  }
  return out;
}

double mean_patient_auroc(const std::vector<PatientScores>& scores) {
  double acc = 0.0;
  int n = 0;
  for (const auto& ps : scores) {
    if (!ps.has_both_classes()) continue;  // skipped with flag upstream
    acc += auroc(ps.scores(), ps.labels());
    ++n;
  }
  if (n == 0) return std::nan("");
  return acc / double(n);
}

RunResult train_run(const CohortData& data, const FoldPlan& plan, int repeat, int test_fold,
                    const TrainConfig& cfg) {
  cfg.validate();
  const uint64_t run_seed =
      Rng(cfg.seed).substream("run", uint64_t(repeat), uint64_t(test_fold)).seed();
  Rng run_rng(run_seed);

  auto resolve = [&](Role role) {
    std::vector<int> idx;
    for (const auto& id : plan.patients_in_role(repeat, test_fold, role)) {
      int p = data.patient_index(id);
      if (p < 0) throw Error(ErrorKind::input, "cohort is missing planned patient " + id);
      idx.push_back(p);
    }
    return idx;
  };
  const std::vector<int> train_idx = resolve(Role::train);
  const std::vector<int> val_idx = resolve(Role::validation);
  const std::vector<int> test_idx = resolve(Role::test);
  if (train_idx.empty()) throw Error(ErrorKind::config, "train_run: empty training partition");

  {  // no patient may appear in two roles
    std::set<int> seen;
    for (const auto* v : {&train_idx, &val_idx, &test_idx})
      for (int p : *v)
        if (!seen.insert(p).second)
          throw Error(ErrorKind::integrity, "train_run: patient leaked across roles");
  }

  // standardization from the training partition only
  StandardizationAccumulator acc;
  for (int p : train_idx) acc.combine(data.moments[size_t(p)]);
  const StandardizationStats stats = acc.finalize();

  // training target pool and class balance
  std::vector<TargetRef> pool;
  long n_pos = 0, n_neg = 0;
  for (int p : train_idx)
    for (size_t t = 0; t < data.targets[size_t(p)].size(); ++t) {
      pool.push_back({p, int(t)});
      bool soz =
          data.patients[size_t(p)].electrode(data.targets[size_t(p)][t]).soz;
      (soz ? n_pos : n_neg) += 1;
    }
  if (n_pos == 0 || n_neg == 0)
    throw Error(ErrorKind::degenerate, "train_run: single-class training partition");
  const double pos_weight =
      cfg.pos_weight > 0.0 ? cfg.pos_weight : double(n_neg) / double(n_pos);

  ModelF model(cfg.model_config(), run_rng.substream("init").seed());
  const size_t n_params = model.param_count();
  AdamW<float> opt(n_params, cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay);
  std::vector<float> flat = model.params().flatten_values();

  RunResult result;
  result.stats = stats;
  double best_val = -1.0;
  std::vector<float> best_params = flat;
  int best_epoch = -1;

  const bool is_cnn = cfg.family != Family::cnn_transformer;
  uint64_t sample_counter = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng = run_rng.substream("order", uint64_t(epoch));
    std::vector<TargetRef> order = pool;
    order_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
      const size_t count = std::min(size_t(cfg.batch_size), order.size() - start);
      std::vector<std::vector<float>> grads(count);
      std::vector<double> losses(count, 0.0);
      std::vector<uint64_t> seeds(count);
      for (size_t i = 0; i < count; ++i)
        seeds[i] = run_rng.substream("sample", sample_counter + i).seed();

      std::exception_ptr failure = nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (kernels::parallel_allowed())
#endif
      for (long i = 0; i < long(count); ++i) {
        try {
          const TargetRef& ref = order[start + size_t(i)];
          const AveragedPatient& patient = data.patients[size_t(ref.patient)];
          const std::string& target = data.targets[size_t(ref.patient)][size_t(ref.target)];
          Rng srng(seeds[size_t(i)]);
          ParadigmSample s = assemble_for_family(patient, target, cfg.family,
                                                 is_cnn ? cfg.channel_budget : 0, srng);
          if (!is_cnn) drop_channels(s, 0.0, 0.5, srng);
          apply_standardization(s.values, stats);
          augment_noise(s.values, 0.1, srng);

          Graph<float> g;
          int logit = model.forward_logit(g, sample_tensor(s), /*train=*/true, srng);
          int loss = g.bce_with_logits(logit, s.label ? 1.0 : 0.0, pos_weight);
          losses[size_t(i)] = double(g.value(loss).data[0]);
          model.params().zero_grad();
          g.backward(loss);
          grads[size_t(i)] = model.params().flatten_grads();
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
          if (!failure) failure = std::current_exception();
        }
      }
      if (failure) std::rethrow_exception(failure);
      sample_counter += count;

      // deterministic reduction in sample order
      std::vector<float> mean_grad(n_params, 0.0f);
      for (size_t i = 0; i < count; ++i) {
        for (size_t j = 0; j < n_params; ++j) mean_grad[j] += grads[i][j];
        epoch_loss += losses[i];
      }
      const float inv = 1.0f / float(count);
      for (float& gv : mean_grad) gv *= inv;
      opt.step(flat, mean_grad);
      model.params().load_flat(flat);
    }
    epoch_loss /= double(pool.size());

    auto val_scores =
        predict_patient_scores(model, data, val_idx, cfg, stats, run_seed);
    double val_auroc = mean_patient_auroc(val_scores);
    char line[160];
    std::snprintf(line, sizeof line, "epoch %d loss %.6f val_auroc %.6f", epoch,
                  epoch_loss, val_auroc);
    result.log_lines.push_back(line);
    if (!std::isnan(val_auroc) && val_auroc > best_val) {
      best_val = val_auroc;
      best_params = flat;
      best_epoch = epoch;
    }
  }

  if (best_epoch < 0) {  // no usable validation patient; keep final weights
    best_params = flat;
    best_epoch = cfg.epochs - 1;
    best_val = std::nan("");
  }
  model.params().load_flat(best_params);

  result.checkpoint = snapshot(model);
  result.checkpoint.adam_m = opt.moment1();
  result.checkpoint.adam_v = opt.moment2();
  result.checkpoint.adam_step = opt.step_count();
  result.checkpoint.repeat = repeat;
  result.checkpoint.fold = test_fold;
  result.checkpoint.best_epoch = best_epoch;
  result.checkpoint.best_val_auroc = best_val;
  result.checkpoint.seed = cfg.seed;
  result.checkpoint.stats_mean = stats.mean;
  result.checkpoint.stats_sd = stats.sd;
  result.val_scores = predict_patient_scores(model, data, val_idx, cfg, stats, run_seed);
  result.test_scores = predict_patient_scores(model, data, test_idx, cfg, stats, run_seed);
  return result;
}

// ------------------------------------------------------------------ tuning

TrainConfig sample_search_point(const SearchSpace& space, const TrainConfig& base, Rng& rng) {
  TrainConfig c = base;
  c.learning_rate = rng.log_uniform(space.lr_lo, space.lr_hi);
  c.dropout = rng.uniform(space.dropout_lo, space.dropout_hi);
  if (base.family == Family::cnn_transformer) {
    c.embedding_dim =
        space.embedding_choices[rng.uniform_index(space.embedding_choices.size())];
    c.num_layers = space.layer_choices[rng.uniform_index(space.layer_choices.size())];
  } else {
    c.channel_budget = rng.uniform_int(space.budget_lo, space.budget_hi);
  }
  return c;
}

TuneResult tune(const CohortData& data, const FoldPlan& plan, Family family,
                const SearchSpace& space, const TrainConfig& base, uint64_t tune_seed) {
  if (space.trials < 1) throw Error(ErrorKind::config, "tune: trials must be >= 1");
  Rng rng(Rng(tune_seed).substream("search").seed());

  TuneResult result;
  double best = -1.0;
  for (int trial = 0; trial < space.trials; ++trial) {
    TuneTrial t;
    if (!space.fixed_candidates.empty()) {
      if (trial >= int(space.fixed_candidates.size())) break;
      t.config = space.fixed_candidates[size_t(trial)];
    } else {
      TrainConfig b = base;
      b.family = family;
      t.config = sample_search_point(space, b, rng);
    }
    t.config.family = family;
    t.config.epochs = space.tuning_epochs;
    try {
      RunResult run = train_run(data, plan, /*repeat=*/0, /*test_fold=*/0, t.config);
      t.val_auroc = run.checkpoint.best_val_auroc;
      if (std::isnan(t.val_auroc)) {
        t.failed = true;
        t.error = "no usable validation patient";
      }
    } catch (const std::exception& e) {
      t.failed = true;
      t.error = e.what();
    }
    if (!t.failed && t.val_auroc > best) {
      best = t.val_auroc;
      result.best = t.config;
      result.best.epochs = base.epochs;  // tuning epochs apply to the search only
    }
    result.trials.push_back(std::move(t));
  }
  if (best < 0.0) {
    std::string msg = "tune: every trial failed:";
    for (const auto& t : result.trials) msg += "\n  " + t.error;
    throw Error(ErrorKind::degenerate, msg);
  }
  return result;
}

// ------------------------------------------------------------------- suite

fs::path run_dir(const fs::path& out_dir, Family family, int repeat, int fold) {
  return out_dir / "runs" / to_string(family) /
         ("r" + std::to_string(repeat) + "_f" + std::to_string(fold));
}

void write_patient_scores(const std::vector<PatientScores>& scores, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "patient_id\telectrode_id\tscore\tsoz\toutcome\n";
  char buf[40];
  for (const auto& ps : scores)
    for (const auto& es : ps.electrodes) {
      std::snprintf(buf, sizeof buf, "%.17g", es.score);
      out << ps.patient_id << '\t' << es.electrode_id << '\t' << buf << '\t'
          << (es.soz ? 1 : 0) << '\t' << to_string(ps.outcome) << '\n';
    }
}

std::vector<PatientScores> read_patient_scores(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, path.string() + ": empty");
  std::vector<PatientScores> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string pid, eid, score, soz, outcome;
    if (!std::getline(ss, pid, '\t') || !std::getline(ss, eid, '\t') ||
        !std::getline(ss, score, '\t') || !std::getline(ss, soz, '\t') ||
        !std::getline(ss, outcome))
      throw Error(ErrorKind::format, path.string() + ": bad row");
    if (out.empty() || out.back().patient_id != pid) {
      PatientScores ps;
      ps.patient_id = pid;
      ps.outcome = outcome_from_string(outcome);
      out.push_back(std::move(ps));
    }
    out.back().electrodes.push_back({eid, std::stod(score), soz == "1"});
  }
  return out;
}

namespace {

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

}  // namespace

std::vector<RunStatus> run_suite(const CohortData& data, const FoldPlan& plan,
                                 const SuiteOptions& opt) {
  fs::create_directories(opt.out_dir);
  write_text_atomic(opt.out_dir / "plan.json", plan.to_json());

  struct Job {
    Family family;
    FoldPlan::Run run;
  };
  std::vector<Job> jobs;
  for (Family family : opt.families)
    for (const auto& run : plan.runs()) jobs.push_back({family, run});

  std::vector<RunStatus> statuses(jobs.size());
  std::mutex ledger_mutex;
  std::ofstream ledger(opt.out_dir / "ledger.jsonl", std::ios::app);

  auto process = [&](size_t ji) {
    const Job& job = jobs[ji];
    fs::path dir = run_dir(opt.out_dir, job.family, job.run.repeat, job.run.test_fold);
    RunStatus st;
    st.family = job.family;
    st.repeat = job.run.repeat;
    st.fold = job.run.test_fold;
    st.dir = dir.string();

    fs::path status_path = dir / "status.json";
    if (!opt.force && fs::exists(status_path)) {
      json j = json::parse(std::ifstream(status_path));
      if (j.value("done", false)) {
        st.done = true;
        st.mean_test_auroc = j.value("mean_test_auroc", 0.0);
        statuses[ji] = st;
        return;
      }
    }
    fs::create_directories(dir);

    auto cfg_it = opt.configs.find(job.family);
    TrainConfig cfg = cfg_it != opt.configs.end() ? cfg_it->second : paper_config(job.family);
    cfg.family = job.family;
    cfg.seed = opt.seed;

    RunResult result = train_run(data, plan, job.run.repeat, job.run.test_fold, cfg);
    save_checkpoint(result.checkpoint, dir / "checkpoint.bin");
    write_patient_scores(result.val_scores, dir / "scores_val.tsv");
    write_patient_scores(result.test_scores, dir / "scores_test.tsv");
    {
      std::ofstream log(dir / "train_log.txt", std::ios::binary);
      for (const auto& l : result.log_lines) log << l << '\n';
    }
    st.mean_test_auroc = mean_patient_auroc(result.test_scores);
    st.done = true;

    json status;
    status["done"] = true;
    status["family"] = to_string(job.family);
    status["repeat"] = job.run.repeat;
    status["fold"] = job.run.test_fold;
    status["mean_test_auroc"] = st.mean_test_auroc;
    status["best_epoch"] = result.checkpoint.best_epoch;
    status["best_val_auroc"] = result.checkpoint.best_val_auroc;
    write_text_atomic(status_path, status.dump(2));
    {
      std::lock_guard<std::mutex> lock(ledger_mutex);
      ledger << status.dump() << '\n' << std::flush;
    }
    statuses[ji] = st;
  };

  if (opt.jobs <= 1) {
    for (size_t ji = 0; ji < jobs.size(); ++ji) process(ji);
  } else {
    // bounded worker pool over independent runs; kernel-level threading is
    // suppressed inside workers
    std::atomic<size_t> next{0};
    std::exception_ptr failure = nullptr;
    std::mutex failure_mutex;
    auto worker = [&] {
      kernels::SerialScope scope;
      for (;;) {
        size_t ji = next.fetch_add(1);
        if (ji >= jobs.size()) return;
        try {
          process(ji);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> threads;
    for (int i = 0; i < opt.jobs; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  return statuses;
}

}  // namespace spes
