#include "benchctr/diffusion.hpp"

#include <gtest/gtest.h>

#include "benchctr/rulegen.hpp"
#include "oracles.hpp"

using namespace benchctr;
using nn::Matrix;

namespace {

Dataset toy_dataset(std::size_t n, std::uint64_t seed) {
  RuleGenConfig cfg = RuleGenConfig::default_config();
  // shrink the high-cardinality noise field so toy runs stay fast
  cfg.categorical.resize(4);
  cfg.clusters[0] = {};
  cfg.clusters[1] = {cfg.clusters[1][0], cfg.clusters[1][1]};
  cfg.clusters[2] = {};
  return generate_rule_dataset(cfg, n, seed);
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

DiffusionConfig toy_config() {
  DiffusionConfig cfg;
  cfg.latent_dim = 8;
  cfg.hidden = 32;
  cfg.timesteps = 100;
  cfg.num_steps = 10;
  cfg.epochs = 5;
  cfg.batch_size = 128;
  return cfg;
}

TEST(Bundle, ConstructionAndScheduleInvariants) {
  const Dataset ds = toy_dataset(500, 1);
  Rng rng(2);
  const DiffusionBundle b = make_bundle(ds, all_rows(ds), toy_config(), rng);
  EXPECT_EQ(b.cat_fields.size(), 4u);
  EXPECT_EQ(b.num_fields.size(), 2u);
  EXPECT_EQ(b.input_width(), 4 * 4 + 2);
  EXPECT_EQ(b.encoder.output_width(), 2 * b.cfg.latent_dim);
  EXPECT_EQ(b.decoder.input_width(), b.cfg.latent_dim);

  // beta strictly increasing inside (0,1), alpha_bar strictly decreasing
  for (int t = 1; t <= b.cfg.timesteps; ++t) {
    ASSERT_GT(b.betas[static_cast<std::size_t>(t)], 0.0);
    ASSERT_LT(b.betas[static_cast<std::size_t>(t)], 1.0);
    if (t > 1) {
      ASSERT_GT(b.betas[static_cast<std::size_t>(t)], b.betas[static_cast<std::size_t>(t - 1)]);
      ASSERT_LT(b.alpha_bar[static_cast<std::size_t>(t)], b.alpha_bar[static_cast<std::size_t>(t - 1)]);
    }
  }
}

TEST(Bundle, ConfigValidation) {
  DiffusionConfig cfg = toy_config();
  cfg.beta_start = 0.5;
  cfg.beta_end = 0.1;
  EXPECT_THROW(cfg.validate(), DataError);
  cfg = toy_config();
  cfg.num_steps = cfg.timesteps + 1;
  EXPECT_THROW(cfg.validate(), DataError);
  cfg = toy_config();
  cfg.lambda_kl = -1;
  EXPECT_THROW(cfg.validate(), DataError);
}

TEST(Encode, ZeroNetAndDeterminism) {
  const Dataset ds = toy_dataset(100, 3);
  Rng rng(4);
  DiffusionBundle b = make_bundle(ds, all_rows(ds), toy_config(), rng);
  const Matrix x = featurize(b, ds, {0, 1, 2});

  auto [mu, logvar] = encode(b, x);
  EXPECT_EQ(mu.cols(), b.cfg.latent_dim);
  EXPECT_EQ(logvar.cols(), b.cfg.latent_dim);
  auto [mu2, logvar2] = encode(b, x);
  EXPECT_EQ((mu - mu2).cwiseAbs().maxCoeff(), 0.0);

  for (auto& w : b.encoder.weights) w.setZero();
  for (auto& bias : b.encoder.biases) bias.setZero();
  auto [mu0, logvar0] = encode(b, x);
  EXPECT_EQ(mu0.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(logvar0.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Reparameterize, ForcedNoiseAndMoments) {
  Matrix mu = Matrix::Constant(2, 3, 1.5);
  Matrix logvar = Matrix::Zero(2, 3);
  // eps forced to zero -> z == mu
  const Matrix z0 = reparameterize(mu, logvar, Matrix::Zero(2, 3));
  EXPECT_EQ((z0 - mu).cwiseAbs().maxCoeff(), 0.0);

  // mu = 0, logvar = 0 -> standard normal draws: check moments at 3 sigma
  Rng rng(5);
  const int n = 10000;
  Matrix zeros = Matrix::Zero(n, 1);
  const Matrix z = reparameterize(zeros, zeros, rng);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().sum() / (n - 1);
  EXPECT_NEAR(mean, 0.0, 3.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(var, 1.0, 3.0 * std::sqrt(2.0 / static_cast<double>(n)));

  Matrix wrong(1, 2);
  EXPECT_THROW(reparameterize(mu, wrong, rng), DataError);
}

TEST(AddNoise, LimitCasesAndVariancePreservation) {
  const Dataset ds = toy_dataset(50, 6);
  Rng rng(7);
  const DiffusionBundle b = make_bundle(ds, all_rows(ds), toy_config(), rng);
  const int n = 10000;
  const Matrix z = standard_normal(n, 1, rng);
  const Matrix eps = standard_normal(n, 1, rng);

  // t = 1: alpha_bar near 1, z_noisy stays close to z
  const Matrix near_z = add_noise(z, std::vector<int>(n, 1), eps, b);
  const double max_dev = (near_z - z).cwiseAbs().maxCoeff();
  const double bound = std::sqrt(1.0 - b.alpha_bar[1]) * eps.cwiseAbs().maxCoeff() +
                       (1.0 - std::sqrt(b.alpha_bar[1])) * z.cwiseAbs().maxCoeff();
  EXPECT_LE(max_dev, bound + 1e-12);

  // t = T: alpha_bar small, z_noisy dominated by the injected noise
  const Matrix near_eps = add_noise(z, std::vector<int>(n, b.cfg.timesteps), eps, b);
  double corr = 0;
  for (int i = 0; i < n; ++i) corr += near_eps(i, 0) * eps(i, 0);
  EXPECT_GT(corr / n, 0.5);

  // unit-variance inputs keep unit variance for any t (3-sigma check)
  const Matrix mid = add_noise(z, std::vector<int>(n, b.cfg.timesteps / 2), eps, b);
  const double var = mid.array().square().sum() / n;
  EXPECT_NEAR(var, 1.0, 3.0 * std::sqrt(2.0 / static_cast<double>(n)));

  EXPECT_THROW(add_noise(z, std::vector<int>(n, 0), eps, b), DataError);
  EXPECT_THROW(add_noise(z, std::vector<int>(n, b.cfg.timesteps + 1), eps, b), DataError);
}

TEST(TrainEpoch, TotalIsWeightedSumOfComponents) {
  const Dataset ds = toy_dataset(600, 8);
  DiffusionConfig cfg = toy_config();
  cfg.lambda_recon = 1.0;
  cfg.lambda_kl = 0.1;
  cfg.lambda_diff = 0.7;
  cfg.lambda_ctr = 1.3;
  Rng rng(9);
  DiffusionBundle b = make_bundle(ds, all_rows(ds), cfg, rng);
  DiffusionTrainState st;
  const EpochLosses l = train_epoch(b, ds, all_rows(ds), rng, st);
  EXPECT_NEAR(l.total,
              cfg.lambda_recon * l.recon + cfg.lambda_kl * l.kl + cfg.lambda_diff * l.diff +
                  cfg.lambda_ctr * l.ctr,
              1e-12);
}

TEST(TrainEpoch, AllZeroWeightsLeaveParametersUntouched) {
  const Dataset ds = toy_dataset(300, 10);
  DiffusionConfig cfg = toy_config();
  cfg.lambda_recon = cfg.lambda_kl = cfg.lambda_diff = cfg.lambda_ctr = 0.0;
  Rng rng(11);
  DiffusionBundle b = make_bundle(ds, all_rows(ds), cfg, rng);
  const DiffusionBundle before = b;
  DiffusionTrainState st;
  train_epoch(b, ds, all_rows(ds), rng, st);
  for (std::size_t l = 0; l < b.encoder.num_layers(); ++l)
    EXPECT_EQ((b.encoder.weights[l] - before.encoder.weights[l]).cwiseAbs().maxCoeff(), 0.0);
  for (std::size_t c = 0; c < b.codes.size(); ++c)
    EXPECT_EQ((b.codes[c] - before.codes[c]).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TrainEpoch, PureAutoencoderReconLossDecreases) {
  const Dataset ds = toy_dataset(1000, 12);
  DiffusionConfig cfg = toy_config();
  cfg.lambda_kl = cfg.lambda_diff = cfg.lambda_ctr = 0.0;  // plain autoencoder
  cfg.epochs = 20;
  Rng rng(13);
  DiffusionBundle b = make_bundle(ds, all_rows(ds), cfg, rng);
  const auto history = train_bundle(b, ds, all_rows(ds), rng);
  EXPECT_LT(history.back().recon, history.front().recon * 0.8);
}

TEST(TrainBundle, JointLossTrendsDownOnToyRun) {
  const Dataset ds = toy_dataset(1000, 14);
  DiffusionConfig cfg = toy_config();
  cfg.epochs = 12;
  Rng rng(15);
  DiffusionBundle b = make_bundle(ds, all_rows(ds), cfg, rng);
  const auto history = train_bundle(b, ds, all_rows(ds), rng);
  // moving average over the first and last 5 epochs must not diverge
  double head = 0, tail = 0;
  for (int i = 0; i < 5; ++i) {
    head += history[static_cast<std::size_t>(i)].total / 5;
    tail += history[history.size() - 1 - static_cast<std::size_t>(i)].total / 5;
  }
  EXPECT_LT(tail, head);
}

TEST(Generate, ShapeLabelsAndVocabularyValidity) {
  const Dataset ds = toy_dataset(800, 16);
  Rng rng(17);
  DiffusionBundle b = make_bundle(ds, all_rows(ds), toy_config(), rng);
  train_bundle(b, ds, all_rows(ds), rng);

  const Dataset synth = generate_synthetic(b, 500, 99);
  EXPECT_EQ(synth.rows(), 500u);
  ASSERT_EQ(synth.schema.size(), ds.schema.size());
  for (std::size_t f = 0; f < ds.schema.size(); ++f)
    EXPECT_EQ(synth.schema[f].name, ds.schema[f].name);
  EXPECT_TRUE(validate_dataset(synth).ok());  // includes id < cardinality everywhere
  for (auto y : synth.labels()) EXPECT_TRUE(y == 0 || y == 1);
}

TEST(Generate, ThresholdExtremesForceLabels) {
  const Dataset ds = toy_dataset(300, 18);
  Rng rng(19);
  DiffusionBundle b = make_bundle(ds, all_rows(ds), toy_config(), rng);

  b.cfg.threshold = 1.0;  // sigmoid(x) > 1 never holds
  Dataset all_zero = generate_synthetic(b, 200, 1);
  for (auto y : all_zero.labels()) ASSERT_EQ(y, 0);

  b.cfg.threshold = 0.0;  // sigmoid(x) > 0 always holds
  Dataset all_one = generate_synthetic(b, 200, 1);
  for (auto y : all_one.labels()) ASSERT_EQ(y, 1);
}

TEST(Generate, DeterministicAndWorkerInvariant) {
  const Dataset ds = toy_dataset(500, 20);
  Rng rng(21);
  DiffusionBundle b = make_bundle(ds, all_rows(ds), toy_config(), rng);
  train_bundle(b, ds, all_rows(ds), rng);
  const Dataset a = generate_synthetic(b, 6000, 5, 1);
  const Dataset c = generate_synthetic(b, 6000, 5, 4);
  for (std::size_t f = 0; f < a.schema.size(); ++f) {
    ASSERT_EQ(a.columns[f].ids, c.columns[f].ids);
    ASSERT_EQ(a.columns[f].numeric, c.columns[f].numeric);
  }
}

TEST(Generate, MarginalMomentsTrackTrainingData) {
  const Dataset ds = toy_dataset(2000, 22);
  DiffusionConfig cfg = toy_config();
  cfg.epochs = 25;
  Rng rng(23);
  DiffusionBundle b = make_bundle(ds, all_rows(ds), cfg, rng);
  train_bundle(b, ds, all_rows(ds), rng);
  const Dataset synth = generate_synthetic(b, 2000, 7);

  // per numeric field, standardized-unit gap between real and synthetic means
  for (std::size_t nf = 0; nf < b.num_fields.size(); ++nf) {
    const std::size_t f = b.num_fields[nf];
    double real_mean = 0, synth_mean = 0;
    for (double v : ds.columns[f].numeric) real_mean += v / static_cast<double>(ds.rows());
    for (double v : synth.columns[f].numeric) synth_mean += v / static_cast<double>(synth.rows());
    const double gap = std::abs(real_mean - synth_mean) / b.num_std[nf];
    EXPECT_LT(gap, 0.35) << ds.schema[f].name;
  }
}

TEST(Checkpoint, BundleRoundTripReproducesGeneration) {
  const Dataset ds = toy_dataset(400, 24);
  Rng rng(25);
  DiffusionBundle b = make_bundle(ds, all_rows(ds), toy_config(), rng);
  train_bundle(b, ds, all_rows(ds), rng);
  const std::string path = testing::TempDir() + "bundle.ckpt";
  save_bundle(b, path);
  const DiffusionBundle back = load_bundle(path);
  const Dataset a = generate_synthetic(b, 300, 9);
  const Dataset c = generate_synthetic(back, 300, 9);
  for (std::size_t f = 0; f < a.schema.size(); ++f) {
    ASSERT_EQ(a.columns[f].ids, c.columns[f].ids);
    ASSERT_EQ(a.columns[f].numeric, c.columns[f].numeric);
  }
}

}  // namespace
