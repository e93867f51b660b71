#pragma once

// Evaluation orchestration: hyper-parameter search (grid and random),
// multi-seed comparison runs, train-on-synthetic-test-on-real, and report
// emission (JSON / CSV / markdown / radar SVGs). Independent trials run
// concurrently up to a worker limit; every result is stored by trial index
// so output is identical for any worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "benchctr/data.hpp"
#include "benchctr/ingest.hpp"
#include "benchctr/metrics.hpp"
#include "benchctr/models.hpp"

namespace benchctr {

namespace detail {

template <typename Fn>
void parallel_for_indexed(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> futs;
  const int count = std::min<int>(workers, static_cast<int>(n));
  for (int w = 0; w < count; ++w) {
    futs.push_back(std::async(std::launch::async, [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    }));
  }
  for (auto& f : futs) f.get();
}

// Rank transform per metric: smaller is better after this mapping.
// COPC is judged by its distance from 1 (the paper's tables bold the
// value closest to 1).
inline double rank_value(const std::string& metric, double v) {
  if (metric == "COPC") return std::abs(1.0 - v);
  return higher_is_better(metric) ? -v : v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Hyper-parameter search

// One searchable parameter: either an explicit candidate list (grid and
// random "choice") or a sampling distribution for random search.
struct SearchParam {
  std::string name;
  std::vector<nlohmann::json> values;              // grid candidates / choices
  std::string dist;                                // "", "uniform", "log_uniform", "int_uniform"
  double lo = 0, hi = 0;
};

struct SearchSpace {
  std::vector<SearchParam> params;  // declaration order is enumeration order

  static SearchSpace from_json(const nlohmann::json& j) {
    SearchSpace sp;
    for (const auto& [name, val] : j.items()) {
      SearchParam p;
      p.name = name;
      if (val.is_array()) {
        for (const auto& v : val) p.values.push_back(v);
        if (p.values.empty()) throw DataError("search space: empty candidate list for " + name);
      } else if (val.is_object()) {
        for (const char* kind : {"uniform", "log_uniform", "int_uniform"}) {
          if (val.contains(kind)) {
            p.dist = kind;
            p.lo = val[kind].at(0).get<double>();
            p.hi = val[kind].at(1).get<double>();
          }
        }
        if (val.contains("choice"))
          for (const auto& v : val["choice"]) p.values.push_back(v);
        if (p.dist.empty() && p.values.empty())
          throw DataError("search space: no distribution for " + name);
      } else {
        p.values.push_back(val);  // single fixed value
      }
      sp.params.push_back(std::move(p));
    }
    if (sp.params.empty()) throw DataError("search space: empty");
    return sp;
  }
};

// Apply one named hyper-parameter to the model spec / train config pair.
// Names match the corresponding struct fields.
inline void apply_hyper_param(ModelSpec& spec, TrainConfig& cfg, const std::string& name,
                              const nlohmann::json& v) {
  if (name == "learning_rate") cfg.learning_rate = v.get<double>();
  else if (name == "batch_size") cfg.batch_size = v.get<int>();
  else if (name == "max_epochs") cfg.max_epochs = v.get<int>();
  else if (name == "early_stop_patience") cfg.early_stop_patience = v.get<int>();
  else if (name == "embedding_dim") spec.embedding_dim = v.get<int>();
  else if (name == "dropout") spec.dropout = v.get<double>();
  else if (name == "pair_hash_buckets") spec.pair_hash_buckets = v.get<int>();
  else if (name == "l2_embedding") spec.l2_embedding = v.get<double>();
  else if (name == "hidden_layers") spec.hidden_layers = v.get<std::vector<int>>();
  else throw DataError("unknown hyper-parameter: " + name);
}

struct Trial {
  int index = 0;
  std::map<std::string, nlohmann::json> params;
  double validation_auc = 0;
  double validation_logloss = 0;
};

struct SearchResult {
  std::vector<Trial> trials;  // ordered by trial index
  int best_index = 0;
  ModelSpec best_spec;
  TrainConfig best_config;
};

namespace detail {

inline SearchResult run_trials(const std::vector<std::map<std::string, nlohmann::json>>& settings,
                               const ModelSpec& base_spec, const TrainConfig& base_cfg,
                               const Dataset& ds, const SplitSpec& split, std::uint64_t seed,
                               int workers) {
  SearchResult out;
  out.trials.resize(settings.size());
  std::vector<std::exception_ptr> errors(settings.size());

  parallel_for_indexed(settings.size(), workers, [&](std::size_t i) {
    Trial& tr = out.trials[i];
    tr.index = static_cast<int>(i);
    tr.params = settings[i];
    try {
      ModelSpec spec = base_spec;
      TrainConfig cfg = base_cfg;
      for (const auto& [name, v] : settings[i]) apply_hyper_param(spec, cfg, name, v);
      const TrainedModel tm = train_model(spec, ds, split, cfg, seed);
      const PredictionSet preds = predict(tm.model, ds, split.validation);
      tr.validation_auc = auc_roc(preds);
      tr.validation_logloss = probability_metrics(preds).logloss;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw Error("trial " + std::to_string(i) + " failed: " + e.what());
    }
  }

  // best: highest validation AUC, ties by lower Logloss, then first
  // enumerated.
  int best = 0;
  for (int i = 1; i < static_cast<int>(out.trials.size()); ++i) {
    const Trial& a = out.trials[static_cast<std::size_t>(i)];
    const Trial& b = out.trials[static_cast<std::size_t>(best)];
    if (a.validation_auc > b.validation_auc ||
        (a.validation_auc == b.validation_auc && a.validation_logloss < b.validation_logloss))
      best = i;
  }
  out.best_index = best;
  out.best_spec = base_spec;
  out.best_config = base_cfg;
  for (const auto& [name, v] : out.trials[static_cast<std::size_t>(best)].params)
    apply_hyper_param(out.best_spec, out.best_config, name, v);
  return out;
}

}  // namespace detail

// Exhaustive cartesian product over the space's candidate lists, enumerated
// with the last declared parameter varying fastest.
inline SearchResult grid_search(const SearchSpace& space, const ModelSpec& base_spec,
                                const TrainConfig& base_cfg, const Dataset& ds, const SplitSpec& split,
                                std::uint64_t seed, int workers = 1) {
  std::size_t total = 1;
  for (const SearchParam& p : space.params) {
    if (p.values.empty()) throw DataError("grid_search: parameter " + p.name + " has no candidate list");
    total *= p.values.size();
  }
  std::vector<std::map<std::string, nlohmann::json>> settings(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    for (std::size_t pi = space.params.size(); pi-- > 0;) {
      const SearchParam& p = space.params[pi];
      settings[i][p.name] = p.values[rest % p.values.size()];
      rest /= p.values.size();
    }
  }
  return detail::run_trials(settings, base_spec, base_cfg, ds, split, seed, workers);
}

// n seeded draws from the space's distributions (candidate lists are
// sampled uniformly).
inline SearchResult random_search(const SearchSpace& space, int n, const ModelSpec& base_spec,
                                  const TrainConfig& base_cfg, const Dataset& ds,
                                  const SplitSpec& split, std::uint64_t seed, int workers = 1) {
  if (n < 1) throw DataError("random_search: need n >= 1");
  std::vector<std::map<std::string, nlohmann::json>> settings(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(child_seed(seed, static_cast<std::uint64_t>(i)));
    for (const SearchParam& p : space.params) {
      nlohmann::json v;
      if (!p.values.empty()) {
        v = p.values[bounded_uniform(rng, p.values.size())];
      } else if (p.dist == "uniform") {
        v = p.lo + (p.hi - p.lo) * uniform_double(rng);
      } else if (p.dist == "log_uniform") {
        v = std::exp(std::log(p.lo) + (std::log(p.hi) - std::log(p.lo)) * uniform_double(rng));
      } else if (p.dist == "int_uniform") {
        v = static_cast<int>(p.lo + static_cast<double>(bounded_uniform(
                                        rng, static_cast<std::uint64_t>(p.hi - p.lo + 1))));
      }
      settings[static_cast<std::size_t>(i)][p.name] = v;
    }
  }
  return detail::run_trials(settings, base_spec, base_cfg, ds, split, seed, workers);
}

// ---------------------------------------------------------------------------
// Comparison runs

struct NamedModelSpec {
  std::string name;
  ModelSpec spec;
};

struct ComparisonCell {
  std::string model;
  std::int64_t seed = 0;
  MetricReport report;
  std::vector<EpochRecord> history;  // per-epoch training record
  std::string error;                 // nonempty if this cell failed
};

struct ComparisonResult {
  std::string label = "comparison";  // or "tstr"
  std::string dataset;
  std::vector<std::int64_t> seeds;
  std::vector<std::string> models;                   // enumeration order
  std::vector<ComparisonCell> cells;                 // model-major, then seed
  std::vector<MetricReport> averaged;                // one per model
  std::map<std::string, std::string> best_model;     // metric -> model name
  std::map<std::string, std::string> second_model;
};

namespace detail {

// Seed-average the per-cell reports and flag best / second best per metric.
inline void finalize_comparison(ComparisonResult& res, const std::string& baseline_model) {
  const std::size_t n_models = res.models.size();
  const std::size_t n_seeds = res.seeds.size();
  res.averaged.assign(n_models, MetricReport{});

  for (std::size_t mi = 0; mi < n_models; ++mi) {
    MetricReport& avg = res.averaged[mi];
    avg.model = res.models[mi];
    avg.dataset = res.dataset;
    avg.split = "test";
    std::map<std::string, std::pair<double, std::size_t>> acc;
    std::size_t ok_cells = 0;
    for (std::size_t si = 0; si < n_seeds; ++si) {
      const ComparisonCell& cell = res.cells[mi * n_seeds + si];
      if (!cell.error.empty()) continue;
      ++ok_cells;
      for (const auto& [k, v] : cell.report.values) {
        acc[k].first += v;
        acc[k].second += 1;
      }
    }
    for (const auto& [k, pr] : acc)
      if (pr.second == ok_cells && ok_cells > 0)  // only metrics present in every good cell
        avg.values[k] = pr.first / static_cast<double>(ok_cells);
  }

  // Baseline-relative metrics on the averaged reports.
  const auto baseline_it = std::find(res.models.begin(), res.models.end(), baseline_model);
  if (baseline_it != res.models.end()) {
    const MetricReport& base = res.averaged[static_cast<std::size_t>(baseline_it - res.models.begin())];
    if (base.has("Logloss") && base.has("AUC-ROC")) {
      for (MetricReport& avg : res.averaged) {
        if (!avg.has("Logloss") || !avg.has("AUC-ROC")) continue;
        try {
          const RelativeMetrics rel = relative_metrics(avg, base);
          avg.values["RIG"] = rel.rig;
          avg.values["RelaImpr"] = rel.rela_impr;
        } catch (const DataError&) {
          // degenerate baseline; leave the relative fields out
        }
      }
    }
  }

  // Flags per metric over models that report it; ties go to the first
  // enumerated model.
  std::set<std::string> metric_names;
  for (const MetricReport& avg : res.averaged)
    for (const auto& [k, v] : avg.values) metric_names.insert(k);
  for (const std::string& metric : metric_names) {
    int best = -1, second = -1;
    for (std::size_t mi = 0; mi < n_models; ++mi) {
      if (!res.averaged[mi].has(metric)) continue;
      const double rv = rank_value(metric, res.averaged[mi].at(metric));
      if (best < 0 || rv < rank_value(metric, res.averaged[static_cast<std::size_t>(best)].at(metric))) {
        second = best;
        best = static_cast<int>(mi);
      } else if (second < 0 ||
                 rv < rank_value(metric, res.averaged[static_cast<std::size_t>(second)].at(metric))) {
        second = static_cast<int>(mi);
      }
    }
    if (best >= 0) res.best_model[metric] = res.models[static_cast<std::size_t>(best)];
    if (second >= 0) res.second_model[metric] = res.models[static_cast<std::size_t>(second)];
  }
}

}  // namespace detail

// Train every (model, seed) pair on the split, evaluate on the test rows,
// and average per model across seeds. Failures are recorded per cell; the
// remaining cells still complete.
inline ComparisonResult run_comparison(const std::vector<NamedModelSpec>& specs, const Dataset& ds,
                                       const SplitSpec& split, const TrainConfig& cfg,
                                       int workers = 1, const std::string& segment_field = "",
                                       std::string baseline_model = "") {
  if (specs.empty()) throw DataError("run_comparison: need at least one model spec");
  cfg.validate();
  if (baseline_model.empty()) baseline_model = specs.front().name;

  ComparisonResult res;
  res.dataset = ds.provenance;
  res.seeds = cfg.seeds;
  for (const auto& s : specs) res.models.push_back(s.name);
  const std::size_t n_cells = specs.size() * cfg.seeds.size();
  res.cells.resize(n_cells);

  detail::parallel_for_indexed(n_cells, workers, [&](std::size_t i) {
    const std::size_t mi = i / cfg.seeds.size();
    const std::size_t si = i % cfg.seeds.size();
    ComparisonCell& cell = res.cells[i];
    cell.model = specs[mi].name;
    cell.seed = cfg.seeds[si];
    try {
      const TrainedModel tm =
          train_model(specs[mi].spec, ds, split, cfg, static_cast<std::uint64_t>(cell.seed));
      cell.history = tm.history;
      PredictionSet preds = predict(tm.model, ds, split.test);
      if (!segment_field.empty()) attach_segments(preds, ds, split.test, segment_field);
      cell.report = compute_report(preds);
      cell.report.model = cell.model;
      cell.report.dataset = ds.provenance;
      cell.report.split = "test";
      cell.report.seed = cell.seed;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  detail::finalize_comparison(res, baseline_model);
  return res;
}

// Train on synthetic rows only (with a small held-out validation slice for
// early stopping), evaluate on the real test split. The real train and
// validation rows are never touched.
inline ComparisonResult run_tstr(const Dataset& synthetic, const Dataset& real,
                                 const SplitSpec& real_split, const std::vector<NamedModelSpec>& specs,
                                 const TrainConfig& cfg, int workers = 1,
                                 const std::string& segment_field = "",
                                 std::string baseline_model = "") {
  if (specs.empty()) throw DataError("run_tstr: need at least one model spec");
  cfg.validate();
  if (baseline_model.empty()) baseline_model = specs.front().name;

  // Schemas must agree field-by-field, including vocabulary sizes.
  if (synthetic.schema.size() != real.schema.size())
    throw DataError("run_tstr: schema field count mismatch");
  for (std::size_t f = 0; f < real.schema.size(); ++f) {
    const FieldSchema& a = synthetic.schema[f];
    const FieldSchema& bq = real.schema[f];
    if (a.name != bq.name || a.kind != bq.kind || a.cardinality != bq.cardinality)
      throw DataError("run_tstr: schema mismatch at field " + bq.name);
  }

  // Internal split of the synthetic data: last 10% (after a seeded
  // shuffle) becomes the early-stopping validation set.
  ComparisonResult res;
  res.label = "tstr";
  res.dataset = real.provenance + " (tstr from " + synthetic.provenance + ")";
  res.seeds = cfg.seeds;
  for (const auto& s : specs) res.models.push_back(s.name);
  const std::size_t n_cells = specs.size() * cfg.seeds.size();
  res.cells.resize(n_cells);

  detail::parallel_for_indexed(n_cells, workers, [&](std::size_t i) {
    const std::size_t mi = i / cfg.seeds.size();
    const std::size_t si = i % cfg.seeds.size();
    ComparisonCell& cell = res.cells[i];
    cell.model = specs[mi].name;
    cell.seed = cfg.seeds[si];
    try {
      Rng rng(child_seed(static_cast<std::uint64_t>(cell.seed), 0x7573));
      std::vector<std::size_t> idx = shuffled_indices(synthetic.rows(), rng);
      const std::size_t n_valid = std::max<std::size_t>(1, idx.size() / 10);
      SplitSpec synth_split;
      synth_split.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_valid));
      synth_split.validation.assign(idx.end() - static_cast<std::ptrdiff_t>(n_valid), idx.end());

      const TrainedModel tm = train_model(specs[mi].spec, synthetic, synth_split, cfg,
                                          static_cast<std::uint64_t>(cell.seed));
      cell.history = tm.history;
      PredictionSet preds = predict(tm.model, real, real_split.test);
      if (!segment_field.empty()) attach_segments(preds, real, real_split.test, segment_field);
      cell.report = compute_report(preds);
      cell.report.model = cell.model;
      cell.report.dataset = res.dataset;
      cell.report.split = "test";
      cell.report.seed = cell.seed;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  detail::finalize_comparison(res, baseline_model);
  return res;
}

// ---------------------------------------------------------------------------
// Report emission

enum class ReportFormat { json, csv, markdown, radar_svg };

inline ReportFormat report_format_from(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "radar_svg" || s == "svg") return ReportFormat::radar_svg;
  throw UsageError("unknown report format: " + s);
}

inline nlohmann::ordered_json comparison_to_json(const ComparisonResult& res) {
  nlohmann::ordered_json j;
  j["label"] = res.label;
  j["dataset"] = res.dataset;
  j["seeds"] = res.seeds;
  j["models"] = res.models;
  j["cells"] = nlohmann::ordered_json::array();
  for (const ComparisonCell& cell : res.cells) {
    nlohmann::ordered_json jc;
    jc["model"] = cell.model;
    jc["seed"] = cell.seed;
    if (!cell.error.empty()) jc["error"] = cell.error;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
    for (const auto& [k, v] : cell.report.values) metrics[k] = v;  // std::map order
    jc["metrics"] = std::move(metrics);
    j["cells"].push_back(std::move(jc));
  }
  j["averaged"] = nlohmann::ordered_json::array();
  for (const MetricReport& avg : res.averaged) {
    nlohmann::ordered_json ja;
    ja["model"] = avg.model;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
    for (const auto& [k, v] : avg.values) metrics[k] = v;
    ja["metrics"] = std::move(metrics);
    j["averaged"].push_back(std::move(ja));
  }
  j["best"] = res.best_model;
  j["second"] = res.second_model;
  return j;
}

inline ComparisonResult comparison_from_json(const nlohmann::json& j) {
  ComparisonResult res;
  res.label = j.at("label").get<std::string>();
  res.dataset = j.at("dataset").get<std::string>();
  res.seeds = j.at("seeds").get<std::vector<std::int64_t>>();
  res.models = j.at("models").get<std::vector<std::string>>();
  for (const auto& jc : j.at("cells")) {
    ComparisonCell cell;
    cell.model = jc.at("model").get<std::string>();
    cell.seed = jc.at("seed").get<std::int64_t>();
    if (jc.contains("error")) cell.error = jc["error"].get<std::string>();
    for (const auto& [k, v] : jc.at("metrics").items()) cell.report.values[k] = v.get<double>();
    cell.report.model = cell.model;
    cell.report.dataset = res.dataset;
    cell.report.split = "test";
    cell.report.seed = cell.seed;
    res.cells.push_back(std::move(cell));
  }
  for (const auto& ja : j.at("averaged")) {
    MetricReport avg;
    avg.model = ja.at("model").get<std::string>();
    avg.dataset = res.dataset;
    avg.split = "test";
    for (const auto& [k, v] : ja.at("metrics").items()) avg.values[k] = v.get<double>();
    res.averaged.push_back(std::move(avg));
  }
  for (const auto& [k, v] : j.at("best").items()) res.best_model[k] = v.get<std::string>();
  for (const auto& [k, v] : j.at("second").items()) res.second_model[k] = v.get<std::string>();
  return res;
}

namespace detail {

// Write-to-temp then rename; a failed run never leaves a partial artifact.
inline void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    out << content;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return std::string(buf);
}

inline const std::vector<std::string>& family_metrics(const std::string& family) {
  static const std::vector<std::string> confusion = {"AUC-ROC", "AUC-PR", "Precision", "Recall",
                                                     "Accuracy", "MCC", "F1"};
  static const std::vector<std::string> probability = {"Logloss", "MSE", "RMSE", "1-COPC",
                                                       "KLD", "Field-ECE", "Field-RCE"};
  return family == "confusion" ? confusion : probability;
}

inline std::string radar_svg_for(const ComparisonResult& res, const std::string& family) {
  // Axes: the family's metrics reported by every model; values are min-max
  // normalized per metric with the direction applied, so best -> 1.0 and
  // worst -> 0.0.
  std::vector<std::string> metrics;
  for (const std::string& m : family_metrics(family)) {
    bool everywhere = !res.averaged.empty();
    for (const MetricReport& avg : res.averaged)
      if (!avg.has(m)) everywhere = false;
    if (everywhere) metrics.push_back(m);
  }
  const double cx = 260, cy = 240, radius = 170;
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"660\" height=\"480\" viewBox=\"0 0 660 480\">\n";
  svg += "<text x=\"20\" y=\"28\" font-size=\"16\" font-family=\"sans-serif\">" + family +
         " metrics (normalized)</text>\n";
  if (metrics.size() < 3 || res.averaged.empty()) {
    svg += "<text x=\"20\" y=\"60\" font-size=\"12\" font-family=\"sans-serif\">not enough shared metrics for a radar chart</text>\n</svg>\n";
    return svg;
  }

  std::map<std::string, std::pair<double, double>> lohi;  // rank-value range per metric
  for (const std::string& m : metrics) {
    double lo = 1e300, hi = -1e300;
    for (const MetricReport& avg : res.averaged) {
      const double rv = rank_value(m, avg.at(m));
      lo = std::min(lo, rv);
      hi = std::max(hi, rv);
    }
    lohi[m] = {lo, hi};
  }
  auto normalized = [&](const std::string& m, double v) {
    const auto [lo, hi] = lohi[m];
    const double rv = rank_value(m, v);
    if (hi == lo) return 1.0;               // all models tie: everyone is best
    return (hi - rv) / (hi - lo);           // smaller rank value = better = closer to 1
  };

  const double pi = 3.14159265358979323846;
  auto point = [&](std::size_t axis, double frac) {
    const double ang = -pi / 2 + 2 * pi * static_cast<double>(axis) / static_cast<double>(metrics.size());
    return std::make_pair(cx + radius * frac * std::cos(ang), cy + radius * frac * std::sin(ang));
  };

  // grid rings and axes
  for (double ring : {0.25, 0.5, 0.75, 1.0}) {
    svg += "<polygon fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\" points=\"";
    for (std::size_t a = 0; a < metrics.size(); ++a) {
      const auto [x, y] = point(a, ring);
      svg += fixed4(x) + "," + fixed4(y) + " ";
    }
    svg += "\"/>\n";
  }
  for (std::size_t a = 0; a < metrics.size(); ++a) {
    const auto [x, y] = point(a, 1.0);
    svg += "<line x1=\"" + fixed4(cx) + "\" y1=\"" + fixed4(cy) + "\" x2=\"" + fixed4(x) +
           "\" y2=\"" + fixed4(y) + "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
    const auto [lx, ly] = point(a, 1.12);
    svg += "<text x=\"" + fixed4(lx) + "\" y=\"" + fixed4(ly) +
           "\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"middle\">" + metrics[a] +
           "</text>\n";
  }

  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  for (std::size_t mi = 0; mi < res.averaged.size(); ++mi) {
    const char* color = colors[mi % 8];
    svg += "<polygon fill=\"" + std::string(color) + "22\" stroke=\"" + color +
           "\" stroke-width=\"2\" points=\"";
    for (std::size_t a = 0; a < metrics.size(); ++a) {
      const auto [x, y] = point(a, normalized(metrics[a], res.averaged[mi].at(metrics[a])));
      svg += fixed4(x) + "," + fixed4(y) + " ";
    }
    svg += "\"/>\n";
    svg += "<rect x=\"500\" y=\"" + fixed4(60.0 + 22.0 * static_cast<double>(mi)) +
           "\" width=\"12\" height=\"12\" fill=\"" + color + "\"/>\n";
    svg += "<text x=\"518\" y=\"" + fixed4(71.0 + 22.0 * static_cast<double>(mi)) +
           "\" font-size=\"12\" font-family=\"sans-serif\">" + res.averaged[mi].model + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace detail

// Write the result in the requested format(s) under `out_dir`:
// report.json / report.csv / report.md / radar_confusion.svg +
// radar_probability.svg. JSON and CSV are lossless; markdown bolds the
// best value per metric and underlines the second best.
inline std::vector<std::string> emit_report(const ComparisonResult& res, ReportFormat format,
                                            const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> written;
  const fs::path dir(out_dir);

  switch (format) {
    case ReportFormat::json: {
      const std::string path = (dir / "report.json").string();
      detail::atomic_write(path, comparison_to_json(res).dump(2) + "\n");
      written.push_back(path);
      break;
    }
    case ReportFormat::csv: {
      std::string csv = "model,seed,metric,value\n";
      for (const ComparisonCell& cell : res.cells) {
        for (const auto& [k, v] : cell.report.values)
          csv += cell.model + "," + std::to_string(cell.seed) + "," + k + "," + format_double(v) + "\n";
        if (!cell.error.empty())
          csv += cell.model + "," + std::to_string(cell.seed) + ",error," + cell.error + "\n";
      }
      for (const MetricReport& avg : res.averaged)
        for (const auto& [k, v] : avg.values)
          csv += avg.model + ",avg," + k + "," + format_double(v) + "\n";
      const std::string path = (dir / "report.csv").string();
      detail::atomic_write(path, csv);
      written.push_back(path);
      break;
    }
    case ReportFormat::markdown: {
      std::set<std::string> metric_set;
      for (const MetricReport& avg : res.averaged)
        for (const auto& [k, v] : avg.values) metric_set.insert(k);
      std::vector<std::string> metrics(metric_set.begin(), metric_set.end());
      std::string md = "# " + res.label + " on " + res.dataset + "\n\n";
      md += "| model |";
      for (const auto& m : metrics) md += " " + m + " |";
      md += "\n|---|";
      for (std::size_t i = 0; i < metrics.size(); ++i) md += "---|";
      md += "\n";
      for (const MetricReport& avg : res.averaged) {
        md += "| " + avg.model + " |";
        for (const auto& m : metrics) {
          if (!avg.has(m)) {
            md += " - |";
            continue;
          }
          std::string cellv = detail::fixed4(avg.at(m));
          auto bit = res.best_model.find(m);
          auto sit = res.second_model.find(m);
          if (bit != res.best_model.end() && bit->second == avg.model) cellv = "**" + cellv + "**";
          else if (sit != res.second_model.end() && sit->second == avg.model) cellv = "<u>" + cellv + "</u>";
          md += " " + cellv + " |";
        }
        md += "\n";
      }
      const std::string path = (dir / "report.md").string();
      detail::atomic_write(path, md);
      written.push_back(path);
      break;
    }
    case ReportFormat::radar_svg: {
      for (const char* family : {"confusion", "probability"}) {
        const std::string path = (dir / (std::string("radar_") + family + ".svg")).string();
        detail::atomic_write(path, detail::radar_svg_for(res, family));
        written.push_back(path);
      }
      break;
    }
  }
  return written;
}

inline ComparisonResult load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("report " + path + ": " + e.what());
  }
  return comparison_from_json(j);
}

}  // namespace benchctr
