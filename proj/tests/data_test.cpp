#include "benchctr/data.hpp"

#include <gtest/gtest.h>

#include "benchctr/ingest.hpp"
#include "benchctr/rulegen.hpp"
#include "oracles.hpp"

using namespace benchctr;

namespace {

Dataset small_dataset() {
  Dataset ds;
  FieldSchema site{"site", FieldKind::categorical, {{"a", 0}, {"b", 1}}, 2, 3};
  FieldSchema age{"age", FieldKind::numeric, {}, -1, 0};
  FieldSchema click{"click", FieldKind::label, {}, -1, 0};
  ds.schema = {site, age, click};
  ds.columns.resize(3);
  ds.columns[0].ids = {0, 1, 2};
  ds.columns[1].numeric = {10.0, 20.0, 30.0};
  ds.columns[2].ids = {1, 0, 1};
  ds.provenance = "test";
  return ds;
}

TEST(DataModel, WellFormedDatasetValidates) {
  const auto report = validate_dataset(small_dataset());
  EXPECT_TRUE(report.ok());
}

TEST(DataModel, BadLabelIsAViolationNotAFailure) {
  Dataset ds = small_dataset();
  ds.columns[2].ids[1] = 2;
  const auto report = validate_dataset(ds);
  ASSERT_FALSE(report.ok());
  EXPECT_EQ(report.violations[0].field, "click");
  EXPECT_EQ(report.violations[0].row, 1);
  EXPECT_EQ(report.violations[0].rule, "label\xe2\x88\x88{0,1}");
}

TEST(DataModel, CategoricalIdAtCardinalityIsAViolation) {
  Dataset ds = small_dataset();
  ds.columns[0].ids[0] = 3;  // cardinality is 3, so valid ids are 0..2
  const auto report = validate_dataset(ds);
  ASSERT_FALSE(report.ok());
  EXPECT_EQ(report.violations[0].rule, "id<cardinality");
}

TEST(DataModel, DuplicateFieldNamesAndMissingLabelAreSchemaViolations) {
  Dataset ds = small_dataset();
  ds.schema[1].name = "site";
  auto report = validate_dataset(ds);
  ASSERT_FALSE(report.ok());

  ds = small_dataset();
  ds.schema[2].kind = FieldKind::numeric;
  ds.columns[2].numeric = {1.0, 0.0, 1.0};
  ds.columns[2].ids.clear();
  report = validate_dataset(ds);
  ASSERT_FALSE(report.ok());
}

TEST(DataModel, PositiveRate) {
  Dataset ds = small_dataset();
  ds.columns[2].ids = {1, 0, 1};
  EXPECT_DOUBLE_EQ(positive_rate(ds), 2.0 / 3.0);
  ds.columns[2].ids = {0, 0, 0};
  EXPECT_DOUBLE_EQ(positive_rate(ds), 0.0);
}

TEST(DataModel, PositiveRateEmptyDatasetThrows) {
  Dataset ds;
  ds.schema = small_dataset().schema;
  ds.columns.resize(3);
  EXPECT_THROW(positive_rate(ds), DataError);
}

// Table-level check against the shipped generator defaults: the default
// config is tuned for a ~25% positive rate (binomial 3-sigma band around
// the tuned mean, which itself must sit within 0.25 +- 0.02).
TEST(DataModel, DefaultRuleDatasetPositiveRate) {
  const Dataset ds = generate_rule_dataset(RuleGenConfig::default_config(), 100000, 20250101);
  const double rate = positive_rate(ds);
  EXPECT_NEAR(rate, 0.25, 0.02);
}

TEST(DataModel, RowAccessorRoundTrip) {
  const Dataset ds = small_dataset();
  const Instance row = ds.row(1);
  ASSERT_EQ(row.values.size(), 2u);
  EXPECT_EQ(std::get<std::int32_t>(row.values[0]), 1);
  EXPECT_DOUBLE_EQ(std::get<double>(row.values[1]), 20.0);
  EXPECT_EQ(row.label, 0);
}

TEST(DataModel, CsvRoundTripIsExact) {
  Dataset ds = generate_rule_dataset(RuleGenConfig::default_config(), 500, 99);
  const std::string path = testing::TempDir() + "roundtrip.csv";
  write_csv(ds, path);
  Dataset back = load_delimited(path, ds.schema);
  back = encode_with_vocab(back, ds.schema);
  ASSERT_EQ(back.rows(), ds.rows());
  for (std::size_t f = 0; f < ds.schema.size(); ++f) {
    SCOPED_TRACE(ds.schema[f].name);
    EXPECT_EQ(back.columns[f].ids, ds.columns[f].ids);
    EXPECT_EQ(back.columns[f].numeric, ds.columns[f].numeric);
    EXPECT_EQ(back.columns[f].stamps, ds.columns[f].stamps);
  }
}

TEST(DataModel, BinaryCacheRoundTripIsExact) {
  Dataset ds = generate_rule_dataset(RuleGenConfig::default_config(), 300, 7);
  const std::string path = testing::TempDir() + "roundtrip.bin";
  save_dataset_binary(ds, path);
  const Dataset back = load_dataset_binary(path);
  ASSERT_EQ(back.schema.size(), ds.schema.size());
  EXPECT_EQ(back.provenance, ds.provenance);
  for (std::size_t f = 0; f < ds.schema.size(); ++f) {
    EXPECT_EQ(back.schema[f].name, ds.schema[f].name);
    EXPECT_EQ(back.schema[f].vocabulary, ds.schema[f].vocabulary);
    EXPECT_EQ(back.columns[f].ids, ds.columns[f].ids);
    EXPECT_EQ(back.columns[f].numeric, ds.columns[f].numeric);
  }
}

TEST(DataModel, SplitDisjointnessIsEnforced) {
  SplitSpec s;
  s.train = {0, 1, 2};
  s.validation = {3};
  s.test = {4};
  EXPECT_NO_THROW(validate_split(s, 5));
  s.test = {1};
  EXPECT_THROW(validate_split(s, 5), DataError);
  s.test = {7};
  EXPECT_THROW(validate_split(s, 5), DataError);
}

TEST(DataModel, PredictionSetInvariants) {
  PredictionSet ok{{1, 0}, {0.5, 0.25}, {}};
  EXPECT_NO_THROW(ok.check());
  PredictionSet bad_len{{1, 0}, {0.5}, {}};
  EXPECT_THROW(bad_len.check(), DataError);
  PredictionSet bad_p{{1, 0}, {0.5, 1.25}, {}};
  EXPECT_THROW(bad_p.check(), DataError);
  PredictionSet bad_y{{1, 2}, {0.5, 0.25}, {}};
  EXPECT_THROW(bad_y.check(), DataError);
}

// positive_rate stays in [0,1] for arbitrary generated datasets.
TEST(DataModel, PositiveRateRangeProperty) {
  Rng rng(5150);
  for (int trial = 0; trial < 25; ++trial) {
    Dataset ds = small_dataset();
    const std::size_t n = 1 + bounded_uniform(rng, 200);
    ds.columns[0].ids.assign(n, 0);
    ds.columns[1].numeric.assign(n, 1.0);
    ds.columns[2].ids.resize(n);
    for (auto& y : ds.columns[2].ids) y = static_cast<std::int32_t>(bounded_uniform(rng, 2));
    const double rate = positive_rate(ds);
    EXPECT_GE(rate, 0.0);
    EXPECT_LE(rate, 1.0);
  }
}

}  // namespace
