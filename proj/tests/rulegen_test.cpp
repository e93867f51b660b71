#include "benchctr/rulegen.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace benchctr;

namespace {

RuleGenConfig two_field_config() {
  RuleGenConfig cfg;
  CategoricalFieldSpec a;
  a.name = "a";
  a.values = {"a0", "a1", "a2"};
  a.probs = {0.7, 0.3, 0.0};
  CategoricalFieldSpec b;
  b.name = "b";
  b.values = {"b0", "b1"};
  b.probs = {0.5, 0.5};
  cfg.categorical = {a, b};
  cfg.base_rate = 0.01;
  cfg.order_weights = {0.0, 0.0};
  cfg.clusters.resize(2);
  return cfg;
}

TEST(Sampling, DegenerateCategoricalAlwaysFirstValue) {
  CategoricalFieldSpec spec;
  spec.name = "x";
  spec.values = {"only", "never", "never2"};
  spec.probs = {1.0, 0.0, 0.0};
  Rng rng(1);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(sample_categorical(spec, rng), 0);
}

TEST(Sampling, CategoricalFrequenciesWithinBinomialBand) {
  CategoricalFieldSpec spec;
  spec.name = "x";
  spec.values = {"x0", "x1"};
  spec.probs = {0.7, 0.3};
  Rng rng(2);
  const int n = 100000;
  std::int64_t zeros = 0;
  for (int i = 0; i < n; ++i) zeros += (sample_categorical(spec, rng) == 0) ? 1 : 0;
  EXPECT_TRUE(oracles::within_binomial_band(zeros, n, 0.7));
}

TEST(Sampling, TruncatedDrawsRespectBounds) {
  TruncNormalSpec age{35, 30, 0, 100};  // wide stddev to exercise rejection
  LogNormalSpec price{4.5, 1.2, 1, 30000};
  Rng rng(3);
  double age_mean = 0;
  for (int i = 0; i < 100000; ++i) {
    const double a = sample_trunc_normal(age, rng);
    ASSERT_GE(a, 0.0);
    ASSERT_LE(a, 100.0);
    age_mean += a;
    const double p = sample_log_normal(price, rng);
    ASSERT_GE(p, 1.0);
    ASSERT_LE(p, 30000.0);
  }
  EXPECT_NEAR(age_mean / 100000, 37.0, 2.0);  // truncation at 0 shifts the mean up a little
}

TEST(Similarity, CategoricalIndicatorAndNumericKernel) {
  EXPECT_DOUBLE_EQ(similarity_categorical(3, 3), 1.0);
  EXPECT_DOUBLE_EQ(similarity_categorical(3, 4), 0.0);
  EXPECT_DOUBLE_EQ(similarity_numeric(10.0, 10.0, 5.0), 1.0);
  EXPECT_NEAR(similarity_numeric(15.0, 10.0, 5.0), std::exp(-0.5), 1e-12);

  const Value x{std::int32_t{2}}, t{std::int32_t{2}};
  EXPECT_DOUBLE_EQ(similarity(x, t, FieldKind::categorical), 1.0);
  const Value xn{1.0}, tn{1.0};
  EXPECT_DOUBLE_EQ(similarity(xn, tn, FieldKind::numeric), 1.0);
  EXPECT_THROW(similarity(x, tn, FieldKind::categorical), DataError);
  // similarity stays within [0,1]
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double s = similarity_numeric(normal_double(rng) * 50, 10, 7);
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
  }
}

TEST(Interaction, EmptyOrderScoresZero) {
  const RuleGenConfig cfg = two_field_config();
  RuleRow row{{0, 0}, 30, 100};
  EXPECT_DOUBLE_EQ(interaction_score(row, cfg, 1), 0.0);
  EXPECT_THROW(interaction_score(row, cfg, 3), DataError);
}

TEST(Interaction, ProductThenWeightedSum) {
  RuleGenConfig cfg = two_field_config();
  Cluster g;
  g.weight = 0.5;
  ClusterFeature f1;
  f1.field = "a";
  f1.token = "a1";
  ClusterFeature f2;
  f2.field = "b";
  f2.token = "b0";
  g.features = {f1, f2};
  cfg.clusters[1] = {g};
  cfg.order_weights = {0.0, 1.0};

  RuleRow both{{1, 0}, 30, 100};      // both features match their targets
  RuleRow one_off{{1, 1}, 30, 100};   // one mismatch annihilates the product
  EXPECT_DOUBLE_EQ(interaction_score(both, cfg, 2), 0.5);
  EXPECT_DOUBLE_EQ(interaction_score(one_off, cfg, 2), 0.0);
}

TEST(ClickProbability, BaseRateAndClamping) {
  RuleGenConfig cfg = two_field_config();
  RuleRow row{{0, 0}, 30, 100};
  // all alpha_k = 0 -> p = base rate
  EXPECT_DOUBLE_EQ(click_probability(row, cfg), 0.01);

  Cluster g;
  g.weight = 0.24;
  ClusterFeature f;
  f.field = "a";
  f.token = "a0";
  g.features = {f};
  cfg.clusters[0] = {g};
  cfg.order_weights = {1.0, 0.0};
  EXPECT_NEAR(click_probability(row, cfg), 0.25, 1e-15);

  cfg.clusters[0][0].weight = 5.0;  // beta0 + alpha*I > 1 must clamp
  EXPECT_DOUBLE_EQ(click_probability(row, cfg), 1.0);
}

TEST(ClickProbability, MonotoneInOrderWeightsPreClamp) {
  RuleGenConfig cfg = RuleGenConfig::default_config();
  const auto resolved = detail::resolve_clusters(cfg);
  Rng rng(5);
  RuleRow row;
  row.cat.resize(cfg.categorical.size());
  for (int trial = 0; trial < 200; ++trial) {
    for (std::size_t f = 0; f < cfg.categorical.size(); ++f)
      row.cat[f] = sample_categorical(cfg.categorical[f], rng);
    row.age = sample_trunc_normal(cfg.age, rng);
    row.price = sample_log_normal(cfg.price, rng);
    double pre_clamp = cfg.base_rate;
    std::vector<double> scores(resolved.size());
    for (std::size_t k = 0; k < resolved.size(); ++k) {
      scores[k] = detail::interaction_score_resolved(resolved[k], row);
      ASSERT_GE(scores[k], 0.0);
      pre_clamp += cfg.order_weights[k] * scores[k];
    }
    // bumping any alpha_k can only raise the pre-clamp score
    for (std::size_t k = 0; k < resolved.size(); ++k) {
      const double bumped = pre_clamp + 0.1 * scores[k];
      ASSERT_GE(bumped, pre_clamp);
    }
  }
}

TEST(Interaction, DependsOnlyOnReferencedFeatures) {
  RuleGenConfig cfg = RuleGenConfig::default_config();
  Rng rng(6);
  RuleRow row;
  row.cat.assign(cfg.categorical.size(), 0);
  row.age = 30;
  row.price = 100;
  // order-2 clusters in the default config never reference c7
  const double before = interaction_score(row, cfg, 2);
  const std::size_t c7 = 7;
  for (std::int32_t id = 0; id < 20; ++id) {
    row.cat[c7] = id;
    ASSERT_DOUBLE_EQ(interaction_score(row, cfg, 2), before);
  }
}

TEST(Generate, BaseRateOnlyBinomialOracle) {
  RuleGenConfig cfg = RuleGenConfig::default_config();
  for (auto& a : cfg.order_weights) a = 0.0;
  const Dataset ds = generate_rule_dataset(cfg, 100000, 42);
  std::int64_t positives = 0;
  for (auto y : ds.labels()) positives += y;
  // expect 1000 +- 3*sqrt(100000*0.01*0.99) ~ +-94
  EXPECT_TRUE(oracles::within_binomial_band(positives, 100000, 0.01)) << positives;
}

TEST(Generate, DeterministicAndWorkerCountInvariant) {
  const RuleGenConfig cfg = RuleGenConfig::default_config();
  const Dataset a = generate_rule_dataset(cfg, 20000, 7, 1);
  const Dataset b = generate_rule_dataset(cfg, 20000, 7, 1);
  const Dataset c = generate_rule_dataset(cfg, 20000, 7, 4);
  for (std::size_t f = 0; f < a.schema.size(); ++f) {
    ASSERT_EQ(a.columns[f].ids, b.columns[f].ids);
    ASSERT_EQ(a.columns[f].numeric, b.columns[f].numeric);
    ASSERT_EQ(a.columns[f].ids, c.columns[f].ids);
    ASSERT_EQ(a.columns[f].numeric, c.columns[f].numeric);
  }
  const Dataset d = generate_rule_dataset(cfg, 20000, 8);
  EXPECT_NE(a.labels(), d.labels());  // different seed, different data
}

TEST(Generate, DefaultConfigShapeAndRate) {
  const Dataset ds = generate_rule_dataset(RuleGenConfig::default_config(), 100000, 123);
  EXPECT_EQ(ds.schema.size(), 11u);  // 8 categorical + age + price + label
  int cats = 0, nums = 0;
  for (const auto& fs : ds.schema) {
    cats += fs.kind == FieldKind::categorical;
    nums += fs.kind == FieldKind::numeric;
  }
  EXPECT_EQ(cats, 8);
  EXPECT_EQ(nums, 2);
  EXPECT_TRUE(validate_dataset(ds).ok());
  EXPECT_NEAR(positive_rate(ds), 0.25, 0.02);

  // empirical positive rate tracks the mean click probability (3-sigma)
  const auto resolved = detail::resolve_clusters(RuleGenConfig::default_config());
  const RuleGenConfig cfg = RuleGenConfig::default_config();
  double mean_p = 0;
  RuleRow row;
  row.cat.resize(8);
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t f = 0; f < 8; ++f) row.cat[f] = ds.columns[f].ids[r];
    row.age = ds.columns[8].numeric[r];
    row.price = ds.columns[9].numeric[r];
    mean_p += click_probability(row, cfg) / static_cast<double>(ds.rows());
  }
  std::int64_t positives = 0;
  for (auto y : ds.labels()) positives += y;
  EXPECT_TRUE(oracles::within_binomial_band(positives, static_cast<std::int64_t>(ds.rows()), mean_p))
      << "positives=" << positives << " mean_p=" << mean_p;
}

TEST(Config, ValidationCatchesBadInputs) {
  RuleGenConfig cfg = two_field_config();
  cfg.categorical[0].probs = {0.7, 0.2, 0.2};  // sums to 1.1
  EXPECT_THROW(cfg.validate(), DataError);

  cfg = two_field_config();
  cfg.base_rate = 1.5;
  EXPECT_THROW(cfg.validate(), DataError);

  cfg = two_field_config();
  Cluster g;
  g.weight = 1;
  ClusterFeature f;
  f.field = "a";
  f.token = "a0";
  g.features = {f};
  cfg.clusters[1] = {g};  // order-2 cluster with one feature
  EXPECT_THROW(cfg.validate(), DataError);

  cfg = two_field_config();
  f.token = "zz";  // target outside the value set
  g.features = {f};
  cfg.clusters[0] = {g};
  EXPECT_THROW(cfg.validate(), DataError);

  EXPECT_THROW(generate_rule_dataset(two_field_config(), 0, 1), DataError);
}

TEST(Config, JsonRoundTrip) {
  const RuleGenConfig cfg = RuleGenConfig::default_config();
  nlohmann::json j;
  to_json(j, cfg);
  RuleGenConfig back;
  from_json(j, back);
  EXPECT_EQ(back.categorical.size(), cfg.categorical.size());
  EXPECT_EQ(back.order_weights, cfg.order_weights);
  for (std::size_t k = 0; k < cfg.clusters.size(); ++k) {
    ASSERT_EQ(back.clusters[k].size(), cfg.clusters[k].size());
    for (std::size_t g = 0; g < cfg.clusters[k].size(); ++g)
      EXPECT_DOUBLE_EQ(back.clusters[k][g].weight, cfg.clusters[k][g].weight);
  }
  // identical generation from the round-tripped config
  const Dataset a = generate_rule_dataset(cfg, 2000, 5);
  const Dataset b = generate_rule_dataset(back, 2000, 5);
  EXPECT_EQ(a.labels(), b.labels());
}

}  // namespace
