#include "benchctr/nn.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace benchctr;
using nn::Matrix;
using nn::Vector;

namespace {

TEST(Sigmoid, ValuesAndStability) {
  EXPECT_DOUBLE_EQ(nn::sigmoid(0.0), 0.5);
  EXPECT_NEAR(nn::sigmoid(std::log(3.0)), 0.75, 1e-15);
  const double tiny = nn::sigmoid(-40.0);
  EXPECT_GT(tiny, 0.0);
  EXPECT_LT(tiny, 1e-17);
  EXPECT_DOUBLE_EQ(nn::sigmoid(1000.0), 1.0);  // no overflow either way
  EXPECT_DOUBLE_EQ(nn::sigmoid(-1000.0), 0.0);
}

TEST(Sigmoid, ComplementIdentity) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = (uniform_double(rng) - 0.5) * 80.0;
    ASSERT_NEAR(nn::sigmoid(x) + nn::sigmoid(-x), 1.0, 1e-12);
  }
}

TEST(Softmax, ValuesAndInvariance) {
  Vector two(2);
  two << 1.7, 1.7;
  const Vector sym = nn::softmax(two);
  EXPECT_NEAR(sym(0), 0.5, 1e-15);

  Vector logs(2);
  logs << std::log(1.0), std::log(3.0);
  const Vector s = nn::softmax(logs);
  EXPECT_NEAR(s(0), 0.25, 1e-12);
  EXPECT_NEAR(s(1), 0.75, 1e-12);

  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    Vector x(5);
    for (int j = 0; j < 5; ++j) x(j) = (uniform_double(rng) - 0.5) * 20;
    const Vector a = nn::softmax(x);
    ASSERT_NEAR(a.sum(), 1.0, 1e-12);
    const Vector b = nn::softmax((x.array() + 123.456).matrix());
    for (int j = 0; j < 5; ++j) ASSERT_NEAR(a(j), b(j), 1e-12);
  }
  EXPECT_THROW(nn::softmax(Vector()), Error);
}

TEST(Forward, HandArithmetic) {
  Rng rng(3);
  nn::DenseNet zero = nn::make_net({3, 2}, nn::Activation::relu, nn::Activation::identity, 0, rng);
  zero.weights[0].setZero();
  zero.biases[0].setZero();
  Vector x(3);
  x << 1, 2, 3;
  const Vector out = nn::forward(zero, x);
  EXPECT_DOUBLE_EQ(out(0), 0.0);
  EXPECT_DOUBLE_EQ(out(1), 0.0);

  nn::DenseNet lin = nn::make_net({1, 1}, nn::Activation::relu, nn::Activation::identity, 0, rng);
  lin.weights[0](0, 0) = 2.0;
  lin.biases[0](0) = 1.0;
  Vector x1(1);
  x1 << 3.0;
  EXPECT_DOUBLE_EQ(nn::forward(lin, x1)(0), 7.0);

  Matrix bad(1, 2);
  EXPECT_THROW(nn::forward(lin, bad), Error);
}

TEST(Forward, EvalModeIsDeterministic) {
  Rng rng(4);
  const nn::DenseNet net =
      nn::make_net({4, 8, 2}, nn::Activation::tanh, nn::Activation::sigmoid, 0.5, rng);
  Matrix x(3, 4);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) x(r, c) = uniform_double(rng);
  const Matrix a = nn::forward(net, x);
  const Matrix b = nn::forward(net, x);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, DropoutOnlyInTrainMode) {
  Rng rng(5);
  const nn::DenseNet net =
      nn::make_net({4, 64, 1}, nn::Activation::relu, nn::Activation::identity, 0.5, rng);
  Matrix x = Matrix::Constant(1, 4, 1.0);
  Rng d1(10), d2(11);
  const Matrix t1 = nn::forward(net, x, nn::Mode::train, &d1);
  const Matrix t2 = nn::forward(net, x, nn::Mode::train, &d2);
  EXPECT_NE(t1(0, 0), t2(0, 0));  // different masks
  EXPECT_THROW(nn::forward(net, x, nn::Mode::train, nullptr), Error);
}

TEST(Backward, ZeroLossGradGivesZeroGradients) {
  Rng rng(6);
  const nn::DenseNet net =
      nn::make_net({3, 5, 2}, nn::Activation::relu, nn::Activation::identity, 0, rng);
  Matrix x(2, 3);
  x.setRandom();
  nn::ForwardCache cache;
  nn::forward(net, x, nn::Mode::train, &rng, &cache);
  const nn::Gradients g = nn::backward(net, cache, Matrix::Zero(2, 2));
  for (const auto& gw : g.weights) EXPECT_EQ(gw.cwiseAbs().maxCoeff(), 0.0);
  for (const auto& gb : g.biases) EXPECT_EQ(gb.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, MismatchedCacheThrows) {
  Rng rng(7);
  const nn::DenseNet a = nn::make_net({2, 2}, nn::Activation::relu, nn::Activation::identity, 0, rng);
  const nn::DenseNet b = nn::make_net({2, 2}, nn::Activation::relu, nn::Activation::identity, 0, rng);
  Matrix x(1, 2);
  x.setRandom();
  nn::ForwardCache cache;
  nn::forward(a, x, nn::Mode::eval, nullptr, &cache);
  EXPECT_THROW(nn::backward(b, cache, Matrix::Zero(1, 2)), Error);
}

// Finite-difference gradient check over several architectures and
// activation menus, against an MSE-style loss on the outputs.
TEST(Backward, FiniteDifferenceOracle) {
  Rng rng(8);
  struct Case {
    std::vector<int> sizes;
    nn::Activation hidden, output;
  };
  const std::vector<Case> cases = {
      {{3, 4, 2}, nn::Activation::relu, nn::Activation::identity},
      {{2, 6, 3}, nn::Activation::tanh, nn::Activation::sigmoid},
      {{4, 5, 5, 1}, nn::Activation::sigmoid, nn::Activation::identity},
      {{3, 4, 3}, nn::Activation::tanh, nn::Activation::softmax},
  };
  for (const Case& c : cases) {
    nn::DenseNet net = nn::make_net(c.sizes, c.hidden, c.output, 0, rng);
    const int b = 3;
    Matrix x(b, c.sizes.front());
    for (int r = 0; r < b; ++r)
      for (int col = 0; col < c.sizes.front(); ++col) x(r, col) = 2.0 * uniform_double(rng) - 1.0;
    Matrix target(b, c.sizes.back());
    for (int r = 0; r < b; ++r)
      for (int col = 0; col < c.sizes.back(); ++col) target(r, col) = uniform_double(rng);

    auto loss = [&]() {
      const Matrix out = nn::forward(net, x);
      return (out - target).array().square().sum() / static_cast<double>(out.size());
    };
    nn::ForwardCache cache;
    const Matrix out = nn::forward(net, x, nn::Mode::eval, nullptr, &cache);
    const nn::LossResult l = nn::mse_loss(out, target);
    const nn::Gradients g = nn::backward(net, cache, l.grad);
    const double worst = oracles::gradient_check(net, g, loss);
    EXPECT_LT(worst, 1e-4) << "sizes[0]=" << c.sizes.front();
  }
}

// The input gradient must agree with finite differences too (models chain
// networks through their inputs).
TEST(Backward, InputGradientMatchesFiniteDifferences) {
  Rng rng(9);
  nn::DenseNet net = nn::make_net({4, 6, 2}, nn::Activation::relu, nn::Activation::identity, 0, rng);
  Matrix x(2, 4);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) x(r, c) = 2.0 * uniform_double(rng) - 1.0;
  Matrix target = Matrix::Zero(2, 2);

  nn::ForwardCache cache;
  Matrix out = nn::forward(net, x, nn::Mode::eval, nullptr, &cache);
  const nn::Gradients g = nn::backward(net, cache, nn::mse_loss(out, target).grad);

  const double h = 1e-6;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) {
      const double saved = x(r, c);
      x(r, c) = saved + h;
      const double up = nn::mse_loss(nn::forward(net, x), target).value;
      x(r, c) = saved - h;
      const double down = nn::mse_loss(nn::forward(net, x), target).value;
      x(r, c) = saved;
      ASSERT_NEAR(g.input(r, c), (up - down) / (2 * h), 1e-5);
    }
  }
}

TEST(Adam, ZeroGradientLeavesParametersFixed) {
  Matrix p = Matrix::Constant(2, 2, 1.5);
  nn::AdamStateT<Matrix> st;
  nn::adam_step(p, Matrix::Zero(2, 2), st);
  EXPECT_EQ(st.t, 1);
  EXPECT_EQ((p.array() - 1.5).abs().maxCoeff(), 0.0);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  for (double g : {0.37, -1.2e4, 5e-6}) {
    Matrix p = Matrix::Zero(1, 1);
    Matrix grad = Matrix::Constant(1, 1, g);
    nn::AdamStateT<Matrix> st;
    nn::AdamConfig cfg;
    nn::adam_step(p, grad, st, cfg);
    EXPECT_NEAR(p(0, 0), -cfg.learning_rate * (g > 0 ? 1.0 : -1.0), 1e-6) << g;
  }
}

TEST(Adam, ZeroLearningRateFreezesParameters) {
  Rng rng(10);
  Matrix p(3, 3);
  p.setRandom();
  const Matrix orig = p;
  nn::AdamStateT<Matrix> st;
  nn::AdamConfig cfg;
  cfg.learning_rate = 0.0;
  for (int i = 0; i < 10; ++i) {
    Matrix g(3, 3);
    g.setRandom();
    nn::adam_step(p, g, st, cfg);
  }
  EXPECT_EQ((p - orig).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Adam, DeterministicAcross100Steps) {
  auto run = [&]() {
    Rng rng(11);
    Matrix p = Matrix::Zero(4, 4);
    nn::AdamStateT<Matrix> st;
    for (int i = 0; i < 100; ++i) {
      Matrix g(4, 4);
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) g(r, c) = normal_double(rng);
      nn::adam_step(p, g, st);
    }
    return p;
  };
  const Matrix a = run(), b = run();
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Losses, BceValuesAndClamp) {
  Matrix p(1, 2), y(1, 2);
  p << 0.8, 0.2;
  y << 1, 0;
  const nn::LossResult l = nn::bce_loss(p, y);
  EXPECT_NEAR(l.value, -std::log(0.8), 1e-12);
  EXPECT_NEAR(l.value, 0.22314, 1e-5);

  Matrix bad_y(1, 2);
  bad_y << 1, 0.5;
  EXPECT_THROW(nn::bce_loss(p, bad_y), Error);

  Matrix saturated(1, 1), one(1, 1);
  saturated << 1.0;
  one << 0.0;
  EXPECT_TRUE(std::isfinite(nn::bce_loss(saturated, one).value));
}

TEST(Losses, MseAndKl) {
  Matrix a(1, 2), b(1, 2);
  a << 1, 3;
  b << 0, 0;
  EXPECT_DOUBLE_EQ(nn::mse_loss(a, b).value, 5.0);
  EXPECT_DOUBLE_EQ(nn::mse_loss(a, b).grad(0, 1), 3.0);  // 2*(3-0)/2

  Matrix mu = Matrix::Zero(1, 1), logvar = Matrix::Zero(1, 1);
  EXPECT_DOUBLE_EQ(nn::kl_gaussian_loss(mu, logvar).value, 0.0);
  mu(0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(nn::kl_gaussian_loss(mu, logvar).value, 0.5);
}

TEST(Losses, KlGradientMatchesFiniteDifferences) {
  Rng rng(12);
  Matrix mu(2, 3), logvar(2, 3);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) {
      mu(r, c) = normal_double(rng);
      logvar(r, c) = 0.5 * normal_double(rng);
    }
  const nn::KlResult kl = nn::kl_gaussian_loss(mu, logvar);
  const double h = 1e-6;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) {
      double saved = mu(r, c);
      mu(r, c) = saved + h;
      const double up = nn::kl_gaussian_loss(mu, logvar).value;
      mu(r, c) = saved - h;
      const double down = nn::kl_gaussian_loss(mu, logvar).value;
      mu(r, c) = saved;
      ASSERT_NEAR(kl.dmu(r, c), (up - down) / (2 * h), 1e-6);

      saved = logvar(r, c);
      logvar(r, c) = saved + h;
      const double up2 = nn::kl_gaussian_loss(mu, logvar).value;
      logvar(r, c) = saved - h;
      const double down2 = nn::kl_gaussian_loss(mu, logvar).value;
      logvar(r, c) = saved;
      ASSERT_NEAR(kl.dlogvar(r, c), (up2 - down2) / (2 * h), 1e-6);
    }
}

TEST(Checkpoint, ExactRoundTrip) {
  Rng rng(13);
  nn::DenseNet net = nn::make_net({3, 7, 2}, nn::Activation::tanh, nn::Activation::sigmoid, 0.25, rng);
  nn::Checkpoint ck;
  ck.meta["note"] = "roundtrip";
  nn::put_net(ck, "net", net);
  const std::string path = testing::TempDir() + "ck.bin";
  nn::save_checkpoint(ck, path);
  const nn::Checkpoint back = nn::load_checkpoint(path);
  EXPECT_EQ(back.meta.at("note"), "roundtrip");
  const nn::DenseNet net2 = nn::get_net(back, "net");
  ASSERT_EQ(net2.layer_sizes, net.layer_sizes);
  EXPECT_EQ(net2.hidden_activation, net.hidden_activation);
  EXPECT_EQ(net2.output_activation, net.output_activation);
  EXPECT_EQ(net2.dropout_rate, net.dropout_rate);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    EXPECT_EQ((net2.weights[l] - net.weights[l]).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((net2.biases[l] - net.biases[l]).cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_THROW(nn::load_checkpoint(testing::TempDir() + "missing.bin"), Error);
}

}  // namespace
