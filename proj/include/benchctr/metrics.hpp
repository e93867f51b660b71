#pragma once

// Binary-classification metric suite: confusion-matrix metrics, ranking
// metrics (AUC-ROC as the Mann-Whitney statistic, AUC-PR as average
// precision), probability metrics, KL divergence, field-level calibration
// and baseline-relative measures. All functions are pure and safe to call
// concurrently on shared PredictionSets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "benchctr/data.hpp"

namespace benchctr {

inline constexpr double kLoglossClamp = 1e-7;
inline constexpr double kKldFloor = 1e-12;
inline constexpr double kFieldRceEpsilon = 1e-6;

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double threshold = 0.5;

  std::int64_t total() const { return tp + fp + tn + fn; }
};

// Binarize at `threshold` and count. Tie rule: predicted positive iff
// p > threshold, strictly; p == threshold counts negative.
inline ConfusionCounts confusion_counts(const PredictionSet& preds, double threshold = 0.5) {
  if (preds.size() == 0) throw DataError("confusion_counts: empty predictions");
  ConfusionCounts c;
  c.threshold = threshold;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool pred_pos = preds.p[i] > threshold;
    if (pred_pos) {
      preds.y[i] == 1 ? ++c.tp : ++c.fp;
    } else {
      preds.y[i] == 1 ? ++c.fn : ++c.tn;
    }
  }
  return c;
}

struct ConfusionMetrics {
  double precision = 0, recall = 0, accuracy = 0, mcc = 0, f1 = 0, fpr = 0;
};

// Degenerate denominators: ratios with an empty denominator report 0, and
// MCC with any zero factor under the root reports 0.
inline ConfusionMetrics confusion_metrics(const ConfusionCounts& c) {
  ConfusionMetrics m;
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  if (tp + fp > 0) m.precision = tp / (tp + fp);
  if (tp + fn > 0) m.recall = tp / (tp + fn);
  const double total = tp + fp + tn + fn;
  if (total > 0) m.accuracy = (tp + tn) / total;
  const double den2 = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den2 > 0) m.mcc = (tp * tn - fp * fn) / std::sqrt(den2);
  if (m.precision + m.recall > 0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  if (fp + tn > 0) m.fpr = fp / (fp + tn);
  return m;
}

// AUC-ROC as the Mann-Whitney statistic: the fraction of
// (positive, negative) pairs ranked correctly, ties counted 1/2. Computed
// via average ranks, which equals the trapezoidal area under the ROC curve.
inline double auc_roc(const PredictionSet& preds) {
  const std::size_t n = preds.size();
  std::size_t n_pos = 0;
  for (std::int32_t y : preds.y) n_pos += static_cast<std::size_t>(y);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("AUC undefined: single-class predictions");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds.p[a] < preds.p[b]; });

  // Average ranks within tie blocks, then sum ranks of positives.
  double rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && preds.p[order[j + 1]] == preds.p[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (preds.y[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// AUC-PR as average precision over the descending-score sweep,
// sum of (R_n - R_{n-1}) * P_n. Tied scores are processed as one block.
inline double auc_pr(const PredictionSet& preds) {
  const std::size_t n = preds.size();
  std::size_t n_pos = 0;
  for (std::int32_t y : preds.y) n_pos += static_cast<std::size_t>(y);
  if (n_pos == 0) throw DataError("AUC-PR undefined: no positive labels");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds.p[a] > preds.p[b]; });

  double ap = 0;
  std::size_t tp = 0, taken = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && preds.p[order[j + 1]] == preds.p[order[i]]) ++j;
    std::size_t block_pos = 0;
    for (std::size_t k = i; k <= j; ++k) block_pos += static_cast<std::size_t>(preds.y[order[k]]);
    const double r_prev = static_cast<double>(tp) / static_cast<double>(n_pos);
    tp += block_pos;
    taken = j + 1;
    const double r_cur = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(taken);
    ap += (r_cur - r_prev) * precision;
    i = j + 1;
  }
  return ap;
}

struct ProbabilityMetrics {
  double logloss = 0, mse = 0, rmse = 0;
  double copc = 0;
  bool copc_defined = false;
};

// Logloss (probabilities clamped to [1e-7, 1-1e-7]), MSE, RMSE and COPC.
// COPC is undefined when sum(p) == 0; the other metrics are still returned.
inline ProbabilityMetrics probability_metrics(const PredictionSet& preds) {
  const std::size_t n = preds.size();
  if (n == 0) throw DataError("probability_metrics: empty predictions");
  double ll = 0, se = 0, sum_y = 0, sum_p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = static_cast<double>(preds.y[i]);
    const double p = std::clamp(preds.p[i], kLoglossClamp, 1.0 - kLoglossClamp);
    ll -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    const double d = y - preds.p[i];
    se += d * d;
    sum_y += y;
    sum_p += preds.p[i];
  }
  ProbabilityMetrics m;
  m.logloss = ll / static_cast<double>(n);
  m.mse = se / static_cast<double>(n);
  m.rmse = std::sqrt(m.mse);
  if (sum_p > 0) {
    m.copc = sum_y / sum_p;
    m.copc_defined = true;
  }
  return m;
}

// KL divergence between the dataset-normalized label vector y' and
// prediction vector p', with 0*ln(0) := 0 and p' floored at 1e-12.
inline double kld(const PredictionSet& preds) {
  double sum_y = 0, sum_p = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum_y += static_cast<double>(preds.y[i]);
    sum_p += preds.p[i];
  }
  if (sum_y <= 0) throw DataError("KLD undefined: sum(y) == 0");
  if (sum_p <= 0) throw DataError("KLD undefined: sum(p) == 0");
  double v = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds.y[i] == 0) continue;  // 0*ln(0) := 0
    const double yn = static_cast<double>(preds.y[i]) / sum_y;
    const double pn = std::max(preds.p[i] / sum_p, kKldFloor);
    v += yn * std::log(yn / pn);
  }
  return v;
}

struct FieldCalibration {
  double field_ece = 0;
  double field_rce = 0;
};

// Field-ECE and Field-RCE over the segments in preds.z.
inline FieldCalibration field_calibration(const PredictionSet& preds, double epsilon = kFieldRceEpsilon) {
  if (!preds.has_segments()) throw DataError("field_calibration: missing segment ids");
  const double n = static_cast<double>(preds.size());
  struct Seg { double err = 0, denom = 0; std::int64_t count = 0; };
  std::map<std::int32_t, Seg> segs;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    Seg& s = segs[preds.z[i]];
    s.err += static_cast<double>(preds.y[i]) - preds.p[i];
    s.denom += static_cast<double>(preds.y[i]) + epsilon;
    s.count += 1;
  }
  FieldCalibration out;
  for (const auto& [id, s] : segs) {
    out.field_ece += std::abs(s.err);
    out.field_rce += static_cast<double>(s.count) * std::abs(s.err) / s.denom;
  }
  out.field_ece /= n;
  out.field_rce /= n;
  return out;
}

// ---------------------------------------------------------------------------
// MetricReport and baseline-relative measures

// Flat name -> value record for one (model, dataset, split, seed) cell.
// Keys follow the published metric names exactly.
struct MetricReport {
  std::map<std::string, double> values;
  std::string model, dataset, split;
  std::int64_t seed = -1;

  bool has(const std::string& name) const { return values.count(name) != 0; }
  double at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw DataError("metric missing from report: " + name);
    return it->second;
  }
};

struct RelativeMetrics {
  double rig = 0;
  double rela_impr = 0;
};

// RIG = 1 - LL_model/LL_baseline; RelaImpr = (AUC_m - 0.5)/(AUC_b - 0.5) - 1.
inline RelativeMetrics relative_metrics(const MetricReport& model, const MetricReport& baseline) {
  const double ll_m = model.at("Logloss"), ll_b = baseline.at("Logloss");
  const double auc_m = model.at("AUC-ROC"), auc_b = baseline.at("AUC-ROC");
  if (ll_b <= 0) throw DataError("RIG undefined: baseline Logloss == 0");
  if (auc_b == 0.5) throw DataError("RelaImpr undefined: baseline AUC-ROC == 0.5");
  RelativeMetrics r;
  r.rig = 1.0 - ll_m / ll_b;
  r.rela_impr = (auc_m - 0.5) / (auc_b - 0.5) - 1.0;
  return r;
}

// Whether larger values of `metric` indicate better performance.
// "1-COPC" is stored as |1 - COPC|, so smaller is better there too.
inline bool higher_is_better(const std::string& metric) {
  static const std::set<std::string> higher = {
      "AUC-ROC", "AUC-PR", "Precision", "Recall", "Accuracy",
      "MCC", "F1", "RIG", "RelaImpr"};
  return higher.count(metric) != 0;
}

// Everything computable from one PredictionSet, keyed by published names.
// KLD and COPC are skipped (not failed) when undefined for the given data;
// field calibration requires segment ids.
inline MetricReport compute_report(const PredictionSet& preds, double threshold = 0.5) {
  MetricReport rep;
  const ConfusionCounts counts = confusion_counts(preds, threshold);
  const ConfusionMetrics cm = confusion_metrics(counts);
  rep.values["Precision"] = cm.precision;
  rep.values["Recall"] = cm.recall;
  rep.values["Accuracy"] = cm.accuracy;
  rep.values["MCC"] = cm.mcc;
  rep.values["F1"] = cm.f1;

  std::size_t n_pos = 0;
  for (std::int32_t y : preds.y) n_pos += static_cast<std::size_t>(y);
  if (n_pos > 0 && n_pos < preds.size()) {
    rep.values["AUC-ROC"] = auc_roc(preds);
    rep.values["AUC-PR"] = auc_pr(preds);
  }

  const ProbabilityMetrics pm = probability_metrics(preds);
  rep.values["Logloss"] = pm.logloss;
  rep.values["MSE"] = pm.mse;
  rep.values["RMSE"] = pm.rmse;
  if (pm.copc_defined) {
    rep.values["COPC"] = pm.copc;
    rep.values["1-COPC"] = std::abs(1.0 - pm.copc);
  }
  if (n_pos > 0) {
    rep.values["KLD"] = kld(preds);
  }
  if (preds.has_segments()) {
    const FieldCalibration fc = field_calibration(preds);
    rep.values["Field-ECE"] = fc.field_ece;
    rep.values["Field-RCE"] = fc.field_rce;
  }
  return rep;
}

}  // namespace benchctr
