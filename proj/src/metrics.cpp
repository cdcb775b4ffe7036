#include "spes/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spes/rng.hpp"

namespace spes {

std::vector<double> PatientScores::scores() const {
  std::vector<double> out;
  out.reserve(electrodes.size());
  for (const auto& e : electrodes) out.push_back(e.score);
  return out;
}

std::vector<int> PatientScores::labels() const {
  std::vector<int> out;
  out.reserve(electrodes.size());
  for (const auto& e : electrodes) out.push_back(e.soz ? 1 : 0);
  return out;
}

bool PatientScores::has_both_classes() const {
  bool pos = false, neg = false;
  for (const auto& e : electrodes) (e.soz ? pos : neg) = true;
  return pos && neg;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw Error(ErrorKind::input, "auroc: scores/labels size mismatch");
  long n_pos = std::count(labels.begin(), labels.end(), 1);
  long n_neg = long(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error(ErrorKind::input, "auroc: undefined for a single-class patient");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // walk tie groups in ascending score order
  double wins = 0.0, tie_pairs = 0.0;
  long neg_below = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    long gp = 0, gn = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? gp : gn) += 1;
      ++j;
    }
    wins += double(gp) * double(neg_below);
    tie_pairs += double(gp) * double(gn);
    neg_below += gn;
    i = j;
  }
  return (wins + 0.5 * tie_pairs) / (double(n_pos) * double(n_neg));
}

YoudenResult youden(const std::vector<double>& scores, const std::vector<int>& labels,
                    double thresh) {
  if (scores.size() != labels.size() || scores.empty())
    throw Error(ErrorKind::input, "youden: scores/labels size mismatch");
  long tp = 0, fp = 0, tn = 0, fn = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    bool predicted = scores[i] >= thresh;
    if (labels[i] == 1)
      (predicted ? tp : fn) += 1;
    else
      (predicted ? fp : tn) += 1;
  }
  if (tp + fn == 0 || fp + tn == 0)
    throw Error(ErrorKind::input, "youden: undefined for a single-class patient");
  YoudenResult r;
  r.sensitivity = double(tp) / double(tp + fn);
  r.specificity = double(tn) / double(tn + fp);
  r.youden = r.sensitivity + r.specificity - 1.0;
  return r;
}

double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorKind::input, "median: empty input");
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mad(const std::vector<double>& v) {
  double med = median(std::vector<double>(v));
  std::vector<double> dev;
  dev.reserve(v.size());
  for (double x : v) dev.push_back(std::abs(x - med));
  return median(std::move(dev));
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error(ErrorKind::input, "quantile: empty input");
  if (q < 0.0 || q > 1.0) throw Error(ErrorKind::input, "quantile: q outside [0,1]");
  std::sort(v.begin(), v.end());
  double pos = q * double(v.size() - 1);
  size_t lo = size_t(std::floor(pos));
  size_t hi = size_t(std::ceil(pos));
  double frac = pos - double(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double best_youden_threshold(const std::vector<double>& scores,
                             const std::vector<int>& labels) {
  std::vector<double> uniq = scores;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (size_t i = 0; i + 1 < uniq.size(); ++i)
    candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
  candidates.push_back(std::numeric_limits<double>::infinity());

  double best_thresh = candidates.front();
  double best_j = -2.0;
  for (double c : candidates) {  // ascending; strict > keeps the lowest on ties
    double j = youden(scores, labels, c).youden;
    if (j > best_j) {
      best_j = j;
      best_thresh = c;
    }
  }
  return best_thresh;
}

ThresholdRuleFit fit_threshold_rule(const std::vector<PatientScores>& validation) {
  ThresholdRuleFit fit;
  std::vector<double> ns;
  for (const auto& p : validation) {
    if (!p.has_both_classes()) {
      ++fit.skipped_patients;
      continue;
    }
    std::vector<double> x = p.scores();
    double spread = mad(x);
    if (spread == 0.0) {
      ++fit.skipped_patients;
      continue;
    }
    double thresh = best_youden_threshold(x, p.labels());
    ns.push_back((thresh - median(x)) / spread);
  }
  if (ns.empty())
    throw Error(ErrorKind::degenerate,
                "fit_threshold_rule: every validation patient was degenerate");
  fit.rule.n = median(std::move(ns));
  return fit;
}

double apply_threshold_rule(const ThresholdRule& rule, const std::vector<double>& scores) {
  return median(std::vector<double>(scores)) + rule.n * mad(scores);
}

TTestResult corrected_ttest(const std::vector<double>& a, const std::vector<double>& b,
                            double n_train_patients, double n_test_patients) {
  if (a.size() != b.size() || a.size() < 2)
    throw Error(ErrorKind::input, "corrected_ttest: need equal-length runs (>= 2)");
  if (n_train_patients <= 0.0 && n_test_patients != 0.0)
    throw Error(ErrorKind::input, "corrected_ttest: n_train must be positive");
  const size_t j = a.size();
  std::vector<double> d(j);
  for (size_t i = 0; i < j; ++i) d[i] = a[i] - b[i];
  double mean = std::accumulate(d.begin(), d.end(), 0.0) / double(j);
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  var /= double(j - 1);  // sample variance

  TTestResult r;
  r.mean_diff = mean;
  double ratio = n_test_patients == 0.0 ? 0.0 : n_test_patients / n_train_patients;
  double factor = 1.0 / double(j) + ratio;
  if (var == 0.0) {
    if (mean == 0.0) {
      r.t = 0.0;
      r.p = 1.0;  // convention: no variance, no difference
    } else {
      r.t = mean > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
      r.p = mean > 0 ? 0.0 : 1.0;
    }
    return r;
  }
  r.t = mean / std::sqrt(factor * var);
  r.p = student_t_sf(r.t, double(j - 1));
  return r;
}

double mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a)
    for (double y : b) {
      if (x > y)
        u += 1.0;
      else if (x == y)
        u += 0.5;
    }
  return u;
}

namespace {

double mw_exact_p(const std::vector<double>& a, const std::vector<double>& b, double u_obs) {
  // enumerate every assignment of |a| of the pooled values to group A and
  // count those at least as extreme as the observed U
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  std::sort(pool.begin(), pool.end());
  const int n = int(pool.size());
  const int na = int(a.size());

  std::vector<int> idx(static_cast<size_t>(na));
  std::iota(idx.begin(), idx.end(), 0);
  long total = 0, extreme = 0;
  const double tol = 1e-9;
  for (;;) {
    double u = 0.0;
    // membership mask for this combination
    std::vector<char> in_a(size_t(n), 0);
    for (int i : idx) in_a[size_t(i)] = 1;
    for (int i = 0; i < n; ++i) {
      if (!in_a[size_t(i)]) continue;
      for (int j = 0; j < n; ++j) {
        if (in_a[size_t(j)]) continue;
        if (pool[size_t(i)] > pool[size_t(j)])
          u += 1.0;
        else if (pool[size_t(i)] == pool[size_t(j)])
          u += 0.5;
      }
    }
    ++total;
    if (u >= u_obs - tol) ++extreme;

    // next combination of indices
    int k = na - 1;
    while (k >= 0 && idx[size_t(k)] == n - na + k) --k;
    if (k < 0) break;
    ++idx[size_t(k)];
    for (int i = k + 1; i < na; ++i) idx[size_t(i)] = idx[size_t(i - 1)] + 1;
  }
  return double(extreme) / double(total);
}

}  // namespace

double mann_whitney_one_tailed(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw Error(ErrorKind::input, "mann_whitney: empty group");
  const double u = mann_whitney_u(a, b);
  const size_t na = a.size(), nb = b.size();

  if (std::min(na, nb) <= 8 && na + nb <= 25) return mw_exact_p(a, b, u);

  // normal approximation with tie correction and continuity correction
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  std::sort(pool.begin(), pool.end());
  const double n = double(na + nb);
  double tie_term = 0.0;
  size_t i = 0;
  while (i < pool.size()) {
    size_t j = i;
    while (j < pool.size() && pool[j] == pool[i]) ++j;
    double t = double(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  double mu = double(na) * double(nb) / 2.0;
  double sigma_sq =
      double(na) * double(nb) / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (sigma_sq <= 0.0) return 1.0;  // all values tied
  double z = (u - mu - 0.5) / std::sqrt(sigma_sq);
  return normal_sf(z);
}

BootstrapCi bootstrap_ci(const std::vector<double>& values, double level, int resamples,
                         uint64_t seed) {
  if (values.size() < 2)
    throw Error(ErrorKind::input, "bootstrap_ci: need at least 2 values");
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorKind::input, "bootstrap_ci: level outside (0,1)");
  Rng rng(Rng(seed).substream("bootstrap").seed());
  std::vector<double> means(static_cast<size_t>(resamples));
  const size_t n = values.size();
  for (int r = 0; r < resamples; ++r) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += values[rng.uniform_index(n)];
    means[size_t(r)] = acc / double(n);
  }
  double alpha = 1.0 - level;
  BootstrapCi ci;
  ci.lo = quantile(means, alpha / 2.0);
  ci.hi = quantile(std::move(means), 1.0 - alpha / 2.0);
  return ci;
}

BoxStats box_stats(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorKind::input, "box_stats: empty input");
  BoxStats s;
  s.n = int(values.size());
  s.median = median(std::vector<double>(values));
  s.q1 = quantile(std::vector<double>(values), 0.25);
  s.q3 = quantile(std::vector<double>(values), 0.75);
  double iqr = s.q3 - s.q1;
  double lo_fence = s.q1 - 1.5 * iqr;
  double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_lo = std::numeric_limits<double>::infinity();
  s.whisker_hi = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (v >= lo_fence) s.whisker_lo = std::min(s.whisker_lo, v);
    if (v <= hi_fence) s.whisker_hi = std::max(s.whisker_hi, v);
  }
  return s;
}

OutcomeReport outcome_stratified_report(const std::vector<double>& patient_aurocs,
                                        const std::vector<Outcome>& outcomes) {
  if (patient_aurocs.size() != outcomes.size())
    throw Error(ErrorKind::input, "outcome report: size mismatch");
  std::vector<double> sf, nsf;
  for (size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i] == Outcome::seizure_free)
      sf.push_back(patient_aurocs[i]);
    else if (outcomes[i] == Outcome::not_seizure_free)
      nsf.push_back(patient_aurocs[i]);
    // unknown outcomes are skipped
  }
  OutcomeReport r;
  if (sf.empty() || nsf.empty()) {
    r.applicable = false;
    return r;
  }
  r.applicable = true;
  r.seizure_free = box_stats(sf);
  r.not_seizure_free = box_stats(nsf);
  r.p_one_tailed = mann_whitney_one_tailed(sf, nsf);
  return r;
}

namespace {

// regularized incomplete beta via the Lentz continued fraction
double betacf(double a, double b, double x) {
  const int max_iter = 300;
  const double eps = 3e-14, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_sf(double t, double df) {
  if (df <= 0.0) throw Error(ErrorKind::input, "student_t_sf: df must be positive");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  double x = df / (df + t * t);
  double tail = 0.5 * reg_inc_beta(df / 2.0, 0.5, x);
  return t >= 0.0 ? tail : 1.0 - tail;
}

double normal_sf(double z) { return 0.5 * std::erfc(z * M_SQRT1_2); }

}  // namespace spes
