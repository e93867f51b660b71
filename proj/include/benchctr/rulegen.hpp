#pragma once

// Rule-based synthetic click-log generation: per-field sampling from
// configurable distributions, multi-order interaction scoring against
// target feature clusters, and Bernoulli click labels from
// p = clamp(base_rate + sum_k alpha_k * I_k, 0, 1).
//
// Generation is sharded; each shard's RNG stream is derived from
// (seed, shard index), so output is identical for any worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <future>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "benchctr/data.hpp"

namespace benchctr {

struct CategoricalFieldSpec {
  std::string name;
  std::vector<std::string> values;  // C_f
  std::vector<double> probs;        // P_f, sums to 1
};

struct TruncNormalSpec {
  double mean = 35, stddev = 14;
  double lo = 0, hi = 100;
};

struct LogNormalSpec {
  double mu_log = 4.5, sigma_log = 0.8;
  double lo = 1, hi = 30000;
};

struct ClusterFeature {
  std::string field;
  bool numeric = false;
  std::string token;   // categorical target
  double value = 0;    // numeric target
  double scale = 1.0;  // Gaussian-kernel width for numeric similarity
};

struct Cluster {
  double weight = 0;  // w_g
  std::vector<ClusterFeature> features;
};

struct RuleGenConfig {
  std::vector<CategoricalFieldSpec> categorical;
  TruncNormalSpec age;
  LogNormalSpec price;
  double base_rate = 0.01;                    // beta_0
  std::vector<double> order_weights;          // alpha_k, k = 1..K
  std::vector<std::vector<Cluster>> clusters; // clusters[k-1] holds order-k clusters

  int max_order() const { return static_cast<int>(order_weights.size()); }

  void validate() const {
    if (base_rate < 0 || base_rate > 1) throw DataError("rulegen: base_rate must be in [0,1]");
    if (clusters.size() != order_weights.size())
      throw DataError("rulegen: clusters and order_weights must cover the same orders");
    for (const auto& spec : categorical) {
      if (spec.values.empty() || spec.values.size() != spec.probs.size())
        throw DataError("rulegen: field " + spec.name + " needs matching values and probs");
      double sum = 0;
      for (double p : spec.probs) {
        if (p < 0) throw DataError("rulegen: negative probability in field " + spec.name);
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw DataError("rulegen: probabilities of field " + spec.name + " must sum to 1");
    }
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      for (const Cluster& g : clusters[k]) {
        if (g.features.size() != k + 1)
          throw DataError("rulegen: order-" + std::to_string(k + 1) + " cluster must reference exactly " +
                          std::to_string(k + 1) + " features");
        for (const ClusterFeature& cf : g.features) {
          if (cf.numeric) {
            if (cf.field != "age" && cf.field != "price")
              throw DataError("rulegen: unknown numeric field " + cf.field);
            if (cf.scale <= 0) throw DataError("rulegen: similarity scale must be positive");
          } else {
            bool found = false;
            for (const auto& spec : categorical)
              if (spec.name == cf.field) {
                found = std::find(spec.values.begin(), spec.values.end(), cf.token) != spec.values.end();
                break;
              }
            if (!found)
              throw DataError("rulegen: cluster target " + cf.field + "=" + cf.token + " not in value set");
          }
        }
      }
    }
  }

  static RuleGenConfig default_config();
};

// One generated row before it is stored columnar.
struct RuleRow {
  std::vector<std::int32_t> cat;  // id per categorical field, config order
  double age = 0;
  double price = 0;
};

// ---------------------------------------------------------------------------
// Feature sampling

inline std::int32_t sample_categorical(const CategoricalFieldSpec& spec, Rng& rng) {
  const double u = uniform_double(rng);
  double acc = 0;
  for (std::size_t i = 0; i < spec.probs.size(); ++i) {
    acc += spec.probs[i];
    if (u < acc) return static_cast<std::int32_t>(i);
  }
  return static_cast<std::int32_t>(spec.probs.size() - 1);  // u landed on accumulated rounding
}

// Truncation by rejection, preserving the distribution shape inside the
// bounds (clipping would pile mass on them).
inline double sample_trunc_normal(const TruncNormalSpec& spec, Rng& rng) {
  for (;;) {
    const double x = spec.mean + spec.stddev * normal_double(rng);
    if (x >= spec.lo && x <= spec.hi) return x;
  }
}

inline double sample_log_normal(const LogNormalSpec& spec, Rng& rng) {
  for (;;) {
    const double x = std::exp(spec.mu_log + spec.sigma_log * normal_double(rng));
    if (x >= spec.lo && x <= spec.hi) return x;
  }
}

// ---------------------------------------------------------------------------
// Similarity and interaction scores

inline double similarity_categorical(std::int32_t x, std::int32_t target) {
  return x == target ? 1.0 : 0.0;
}

// Gaussian kernel, 1 at the target and decaying with per-field scale.
inline double similarity_numeric(double x, double target, double scale) {
  const double d = x - target;
  return std::exp(-d * d / (2.0 * scale * scale));
}

// Value-kinded similarity; throws on kind mismatch.
inline double similarity(const Value& x, const Value& target, FieldKind kind, double scale = 1.0) {
  if (kind == FieldKind::categorical) {
    if (!std::holds_alternative<std::int32_t>(x) || !std::holds_alternative<std::int32_t>(target))
      throw DataError("similarity: categorical comparison needs ids on both sides");
    return similarity_categorical(std::get<std::int32_t>(x), std::get<std::int32_t>(target));
  }
  if (kind == FieldKind::numeric) {
    if (!std::holds_alternative<double>(x) || !std::holds_alternative<double>(target))
      throw DataError("similarity: numeric comparison needs numeric values on both sides");
    return similarity_numeric(std::get<double>(x), std::get<double>(target), scale);
  }
  throw DataError("similarity: unsupported field kind");
}

namespace detail {

// Cluster features resolved to direct indices for the generation loop.
struct ResolvedFeature {
  bool numeric = false;
  int cat_index = -1;          // index into RuleRow::cat
  std::int32_t target_id = -1;
  bool is_age = false;         // numeric: age vs price
  double target_value = 0;
  double scale = 1;
};

struct ResolvedCluster {
  double weight = 0;
  std::vector<ResolvedFeature> features;
};

inline std::vector<std::vector<ResolvedCluster>> resolve_clusters(const RuleGenConfig& cfg) {
  std::vector<std::vector<ResolvedCluster>> out(cfg.clusters.size());
  for (std::size_t k = 0; k < cfg.clusters.size(); ++k) {
    for (const Cluster& g : cfg.clusters[k]) {
      ResolvedCluster rc;
      rc.weight = g.weight;
      for (const ClusterFeature& cf : g.features) {
        ResolvedFeature rf;
        rf.numeric = cf.numeric;
        if (cf.numeric) {
          rf.is_age = (cf.field == "age");
          rf.target_value = cf.value;
          rf.scale = cf.scale;
        } else {
          for (std::size_t f = 0; f < cfg.categorical.size(); ++f) {
            if (cfg.categorical[f].name == cf.field) {
              rf.cat_index = static_cast<int>(f);
              const auto& vals = cfg.categorical[f].values;
              rf.target_id = static_cast<std::int32_t>(
                  std::find(vals.begin(), vals.end(), cf.token) - vals.begin());
              break;
            }
          }
          if (rf.cat_index < 0) throw DataError("rulegen: unknown categorical field " + cf.field);
        }
        rc.features.push_back(rf);
      }
      out[k].push_back(std::move(rc));
    }
  }
  return out;
}

inline double cluster_product(const ResolvedCluster& g, const RuleRow& row) {
  double prod = 1.0;
  for (const ResolvedFeature& rf : g.features) {
    const double s = rf.numeric
                         ? similarity_numeric(rf.is_age ? row.age : row.price, rf.target_value, rf.scale)
                         : similarity_categorical(row.cat[static_cast<std::size_t>(rf.cat_index)], rf.target_id);
    if (s == 0.0) return 0.0;
    prod *= s;
  }
  return prod;
}

inline double interaction_score_resolved(const std::vector<ResolvedCluster>& order_clusters,
                                         const RuleRow& row) {
  double score = 0;
  for (const ResolvedCluster& g : order_clusters) score += g.weight * detail::cluster_product(g, row);
  return score;
}

}  // namespace detail

// I_k(x) = sum over order-k clusters of w_g * prod_f s(x_f, t_f).
inline double interaction_score(const RuleRow& row, const RuleGenConfig& cfg, int k) {
  if (k < 1 || k > cfg.max_order()) throw DataError("interaction_score: order out of range");
  const auto resolved = detail::resolve_clusters(cfg);
  return detail::interaction_score_resolved(resolved[static_cast<std::size_t>(k - 1)], row);
}

// p(y=1|x) = clamp(beta_0 + sum_k alpha_k I_k(x), 0, 1).
inline double click_probability(const RuleRow& row, const RuleGenConfig& cfg) {
  const auto resolved = detail::resolve_clusters(cfg);
  double score = cfg.base_rate;
  for (std::size_t k = 0; k < resolved.size(); ++k)
    score += cfg.order_weights[k] * detail::interaction_score_resolved(resolved[k], row);
  return std::clamp(score, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Dataset generation

void to_json(nlohmann::json& j, const RuleGenConfig& cfg);
void from_json(const nlohmann::json& j, RuleGenConfig& cfg);

namespace detail {

inline constexpr std::size_t kRuleGenShard = 8192;

}  // namespace detail

// Generate N labeled instances. Schema: the configured categorical fields
// (vocabulary = value set, in order), numeric age and price, label "click";
// deterministic for a given (config, N, seed) and independent of `workers`.
inline Dataset generate_rule_dataset(const RuleGenConfig& cfg, std::size_t n, std::uint64_t seed,
                                     int workers = 1) {
  if (n < 1) throw DataError("generate_rule_dataset: N must be >= 1");
  cfg.validate();
  const auto resolved = detail::resolve_clusters(cfg);
  const std::size_t n_cat = cfg.categorical.size();

  Dataset ds;
  for (const auto& spec : cfg.categorical) {
    FieldSchema fs;
    fs.name = spec.name;
    fs.kind = FieldKind::categorical;
    for (std::size_t i = 0; i < spec.values.size(); ++i)
      fs.vocabulary[spec.values[i]] = static_cast<std::int32_t>(i);
    fs.oov_id = static_cast<std::int32_t>(spec.values.size());
    fs.cardinality = fs.oov_id + 1;
    ds.schema.push_back(std::move(fs));
  }
  ds.schema.push_back({"age", FieldKind::numeric, {}, -1, 0});
  ds.schema.push_back({"price", FieldKind::numeric, {}, -1, 0});
  ds.schema.push_back({"click", FieldKind::label, {}, -1, 0});

  ds.columns.resize(ds.schema.size());
  for (std::size_t f = 0; f < n_cat; ++f) ds.columns[f].ids.resize(n);
  Column& age_col = ds.columns[n_cat];
  Column& price_col = ds.columns[n_cat + 1];
  Column& label_col = ds.columns[n_cat + 2];
  age_col.numeric.resize(n);
  price_col.numeric.resize(n);
  label_col.ids.resize(n);

  const std::size_t n_shards = (n + detail::kRuleGenShard - 1) / detail::kRuleGenShard;
  auto run_shard = [&](std::size_t shard) {
    Rng rng(child_seed(seed, shard));
    const std::size_t begin = shard * detail::kRuleGenShard;
    const std::size_t end = std::min(begin + detail::kRuleGenShard, n);
    RuleRow row;
    row.cat.resize(n_cat);
    for (std::size_t r = begin; r < end; ++r) {
      for (std::size_t f = 0; f < n_cat; ++f) {
        row.cat[f] = sample_categorical(cfg.categorical[f], rng);
        ds.columns[f].ids[r] = row.cat[f];
      }
      row.age = sample_trunc_normal(cfg.age, rng);
      row.price = sample_log_normal(cfg.price, rng);
      age_col.numeric[r] = row.age;
      price_col.numeric[r] = row.price;

      double p = cfg.base_rate;
      for (std::size_t k = 0; k < resolved.size(); ++k)
        p += cfg.order_weights[k] * detail::interaction_score_resolved(resolved[k], row);
      p = std::clamp(p, 0.0, 1.0);
      label_col.ids[r] = (uniform_double(rng) < p) ? 1 : 0;
    }
  };

  if (workers <= 1 || n_shards <= 1) {
    for (std::size_t s = 0; s < n_shards; ++s) run_shard(s);
  } else {
    std::vector<std::future<void>> futs;
    std::atomic<std::size_t> next{0};
    const int n_workers = std::min<int>(workers, static_cast<int>(n_shards));
    for (int w = 0; w < n_workers; ++w) {
      futs.push_back(std::async(std::launch::async, [&]() {
        for (;;) {
          const std::size_t s = next.fetch_add(1);
          if (s >= n_shards) return;
          run_shard(s);
        }
      }));
    }
    for (auto& f : futs) f.get();
  }

  nlohmann::json jcfg;  // provenance: hash of the exact generating config
  to_json(jcfg, cfg);
  ds.provenance = "rulegen:" + hex64(fnv1a64(jcfg.dump())) + ":seed=" + std::to_string(seed) +
                  ":n=" + std::to_string(n);
  return ds;
}

// ---------------------------------------------------------------------------
// Config JSON

inline void to_json(nlohmann::json& j, const RuleGenConfig& cfg) {
  j = nlohmann::json::object();
  j["version"] = 1;
  j["base_rate"] = cfg.base_rate;
  j["order_weights"] = cfg.order_weights;
  j["age"] = {{"mean", cfg.age.mean}, {"stddev", cfg.age.stddev}, {"lo", cfg.age.lo}, {"hi", cfg.age.hi}};
  j["price"] = {{"mu_log", cfg.price.mu_log},
                {"sigma_log", cfg.price.sigma_log},
                {"lo", cfg.price.lo},
                {"hi", cfg.price.hi}};
  j["categorical"] = nlohmann::json::array();
  for (const auto& spec : cfg.categorical)
    j["categorical"].push_back({{"field", spec.name}, {"values", spec.values}, {"probs", spec.probs}});
  j["clusters"] = nlohmann::json::array();
  for (std::size_t k = 0; k < cfg.clusters.size(); ++k) {
    for (const Cluster& g : cfg.clusters[k]) {
      nlohmann::json jc;
      jc["order"] = k + 1;
      jc["weight"] = g.weight;
      jc["features"] = nlohmann::json::array();
      for (const ClusterFeature& cf : g.features) {
        nlohmann::json jf;
        jf["field"] = cf.field;
        if (cf.numeric) {
          jf["target"] = cf.value;
          jf["scale"] = cf.scale;
        } else {
          jf["target"] = cf.token;
        }
        jc["features"].push_back(std::move(jf));
      }
      j["clusters"].push_back(std::move(jc));
    }
  }
}

inline void from_json(const nlohmann::json& j, RuleGenConfig& cfg) {
  cfg = RuleGenConfig{};
  cfg.base_rate = j.value("base_rate", 0.01);
  cfg.order_weights = j.at("order_weights").get<std::vector<double>>();
  if (j.contains("age")) {
    cfg.age.mean = j["age"].value("mean", 35.0);
    cfg.age.stddev = j["age"].value("stddev", 14.0);
    cfg.age.lo = j["age"].value("lo", 0.0);
    cfg.age.hi = j["age"].value("hi", 100.0);
  }
  if (j.contains("price")) {
    cfg.price.mu_log = j["price"].value("mu_log", 4.5);
    cfg.price.sigma_log = j["price"].value("sigma_log", 0.8);
    cfg.price.lo = j["price"].value("lo", 1.0);
    cfg.price.hi = j["price"].value("hi", 30000.0);
  }
  for (const auto& js : j.at("categorical")) {
    CategoricalFieldSpec spec;
    spec.name = js.at("field").get<std::string>();
    spec.values = js.at("values").get<std::vector<std::string>>();
    spec.probs = js.at("probs").get<std::vector<double>>();
    cfg.categorical.push_back(std::move(spec));
  }
  cfg.clusters.resize(cfg.order_weights.size());
  for (const auto& jc : j.at("clusters")) {
    const std::size_t order = jc.at("order").get<std::size_t>();
    if (order < 1 || order > cfg.clusters.size())
      throw DataError("rulegen config: cluster order out of range");
    Cluster g;
    g.weight = jc.at("weight").get<double>();
    for (const auto& jf : jc.at("features")) {
      ClusterFeature cf;
      cf.field = jf.at("field").get<std::string>();
      if (jf.at("target").is_number()) {
        cf.numeric = true;
        cf.value = jf.at("target").get<double>();
        cf.scale = jf.value("scale", 1.0);
      } else {
        cf.token = jf.at("target").get<std::string>();
      }
      g.features.push_back(std::move(cf));
    }
    cfg.clusters[order - 1].push_back(std::move(g));
  }
  cfg.validate();
}

// ---------------------------------------------------------------------------
// Shipped default: 8 categorical fields with Zipf-like marginals plus age
// and price; cluster weights tuned so the marginal positive rate lands
// near 0.25 with clear second- and third-order structure.

namespace detail {

inline std::vector<double> zipf_probs(std::size_t n, double s) {
  std::vector<double> p(n);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  // Nudge the first entry so the vector sums to exactly 1.
  double total = 0;
  for (std::size_t i = 1; i < n; ++i) total += p[i];
  p[0] = 1.0 - total;
  return p;
}

inline CategoricalFieldSpec zipf_field(const std::string& name, std::size_t card, double s) {
  CategoricalFieldSpec spec;
  spec.name = name;
  spec.values.reserve(card);
  for (std::size_t i = 0; i < card; ++i) spec.values.push_back(name + "_v" + std::to_string(i));
  spec.probs = zipf_probs(card, s);
  return spec;
}

}  // namespace detail

inline RuleGenConfig RuleGenConfig::default_config() {
  RuleGenConfig cfg;
  cfg.categorical = {
      detail::zipf_field("c0", 100, 1.1), detail::zipf_field("c1", 50, 1.1),
      detail::zipf_field("c2", 50, 1.1),  detail::zipf_field("c3", 20, 1.0),
      detail::zipf_field("c4", 20, 1.0),  detail::zipf_field("c5", 12, 1.0),
      detail::zipf_field("c6", 10, 0.8),  detail::zipf_field("c7", 1000, 1.2),
  };
  cfg.age = TruncNormalSpec{35, 14, 0, 100};
  cfg.price = LogNormalSpec{4.5, 0.8, 1, 30000};
  cfg.base_rate = 0.01;
  cfg.order_weights = {0.5, 1.0, 1.0};

  auto cat = [](std::string field, std::string token) {
    ClusterFeature cf;
    cf.field = std::move(field);
    cf.token = std::move(token);
    return cf;
  };
  auto num = [](std::string field, double value, double scale) {
    ClusterFeature cf;
    cf.field = std::move(field);
    cf.numeric = true;
    cf.value = value;
    cf.scale = scale;
    return cf;
  };

  cfg.clusters.resize(3);
  cfg.clusters[0] = {
      {0.12, {cat("c0", "c0_v1")}},
      {0.15, {num("age", 27, 9)}},
      {0.10, {cat("c5", "c5_v2")}},
  };
  cfg.clusters[1] = {
      {0.56, {cat("c1", "c1_v0"), cat("c2", "c2_v1")}},
      {0.52, {cat("c2", "c2_v0"), cat("c3", "c3_v1")}},
      {0.48, {cat("c3", "c3_v0"), cat("c4", "c4_v1")}},
      {0.48, {cat("c4", "c4_v0"), cat("c5", "c5_v1")}},
      {0.44, {cat("c1", "c1_v1"), cat("c5", "c5_v0")}},
      {0.44, {cat("c0", "c0_v0"), cat("c6", "c6_v1")}},
      {0.40, {num("price", 120, 60), cat("c6", "c6_v0")}},
  };
  cfg.clusters[2] = {
      {0.90, {cat("c1", "c1_v0"), cat("c3", "c3_v1"), cat("c6", "c6_v0")}},
      {0.85, {cat("c2", "c2_v0"), cat("c4", "c4_v0"), cat("c5", "c5_v1")}},
      {0.85, {num("age", 45, 8), cat("c0", "c0_v1"), cat("c6", "c6_v1")}},
  };
  return cfg;
}

}  // namespace benchctr
