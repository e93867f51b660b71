#pragma once

// Minimal dense-network machinery: batched forward pass, hand-derived
// reverse-mode gradients, Adam, the standard loss functions and an exact
// binary checkpoint container. 64-bit floats throughout; matrix algebra is
// Eigen, gradients are derived per layer (no autodiff).
//
// Batches are stored row-major: one sample per row.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "benchctr/common.hpp"

namespace benchctr::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Numerically stable logistic function; branches on sign so neither branch
// exponentiates a large positive argument.
inline double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Max-shifted softmax; components sum to 1.
inline Vector softmax(const Vector& x) {
  if (x.size() == 0) throw Error("softmax: empty vector");
  const double m = x.maxCoeff();
  Vector e = (x.array() - m).exp();
  return e / e.sum();
}

enum class Activation { identity, relu, tanh, sigmoid, softmax };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

inline Activation activation_from(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "softmax") return Activation::softmax;
  throw Error("unknown activation: " + s);
}

enum class Mode { train, eval };

struct DenseNet {
  std::vector<int> layer_sizes;   // [input, hidden..., output]
  std::vector<Matrix> weights;    // weights[l]: sizes[l+1] x sizes[l]
  std::vector<Vector> biases;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::identity;
  double dropout_rate = 0.0;      // applied to hidden activations, train mode only

  std::size_t num_layers() const { return weights.size(); }
  int input_width() const { return layer_sizes.front(); }
  int output_width() const { return layer_sizes.back(); }
};

// Symmetric uniform init in +-sqrt(6 / (fan_in + fan_out)).
inline DenseNet make_net(std::vector<int> sizes, Activation hidden, Activation output, double dropout,
                         Rng& rng) {
  if (sizes.size() < 2) throw Error("make_net: need at least input and output widths");
  if (dropout < 0 || dropout >= 1) throw Error("make_net: dropout_rate must be in [0,1)");
  DenseNet net;
  net.layer_sizes = std::move(sizes);
  net.hidden_activation = hidden;
  net.output_activation = output;
  net.dropout_rate = dropout;
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    const int fan_in = net.layer_sizes[l], fan_out = net.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = (2.0 * uniform_double(rng) - 1.0) * bound;
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vector::Zero(fan_out));
  }
  return net;
}

namespace detail {

inline void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh(); break;
    case Activation::sigmoid: z = z.unaryExpr([](double v) { return sigmoid(v); }); break;
    case Activation::softmax:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        Eigen::RowVectorXd e = (z.row(r).array() - m).exp();
        z.row(r) = e / e.sum();
      }
      break;
  }
}

// dL/dz from dL/da given pre-activation z and post-activation a.
inline Matrix activation_backward(Activation act, const Matrix& z, const Matrix& a, const Matrix& da) {
  switch (act) {
    case Activation::identity: return da;
    case Activation::relu: return (z.array() > 0.0).cast<double>() * da.array();
    case Activation::tanh: return (1.0 - a.array().square()) * da.array();
    case Activation::sigmoid: return (a.array() * (1.0 - a.array())) * da.array();
    case Activation::softmax: {
      // dz_i = s_i * (da_i - sum_j da_j s_j), rowwise
      Matrix dz(a.rows(), a.cols());
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double dot = a.row(r).dot(da.row(r));
        dz.row(r) = a.row(r).array() * (da.row(r).array() - dot);
      }
      return dz;
    }
  }
  return da;
}

}  // namespace detail

// Everything backward() needs from the matching forward() call.
struct ForwardCache {
  const DenseNet* net = nullptr;
  Matrix input;
  std::vector<Matrix> pre;    // pre-activations per layer
  std::vector<Matrix> act;    // post-activation (and post-dropout) per layer
  std::vector<Matrix> mask;   // inverted-scaling dropout masks, train mode
  bool training = false;
};

// Batched forward pass; rows are samples. Dropout uses inverted scaling so
// eval mode needs no rescale; masks are drawn from `rng` (required when
// training with dropout_rate > 0).
inline Matrix forward(const DenseNet& net, const Matrix& x, Mode mode = Mode::eval,
                      Rng* rng = nullptr, ForwardCache* cache = nullptr) {
  if (x.cols() != net.input_width())
    throw Error("forward: input width " + std::to_string(x.cols()) + " != net input " +
                std::to_string(net.input_width()));
  const bool training = (mode == Mode::train);
  const bool use_dropout = training && net.dropout_rate > 0.0;
  if (use_dropout && rng == nullptr) throw Error("forward: dropout in train mode needs an rng");

  if (cache) {
    cache->net = &net;
    cache->input = x;
    cache->pre.clear();
    cache->act.clear();
    cache->mask.clear();
    cache->training = training;
  }

  Matrix a = x;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix z = a * net.weights[l].transpose();
    z.rowwise() += net.biases[l].transpose();
    if (cache) cache->pre.push_back(z);
    const bool last = (l + 1 == net.num_layers());
    detail::apply_activation(last ? net.output_activation : net.hidden_activation, z);
    if (!last && use_dropout) {
      const double keep = 1.0 - net.dropout_rate;
      Matrix m(z.rows(), z.cols());
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          m(r, c) = (uniform_double(*rng) < keep) ? 1.0 / keep : 0.0;
      z.array() *= m.array();
      if (cache) cache->mask.push_back(std::move(m));
    } else if (cache && !last) {
      cache->mask.emplace_back();
    }
    if (cache) cache->act.push_back(z);
    a = std::move(z);
  }
  return a;
}

inline Vector forward(const DenseNet& net, const Vector& x, Mode mode = Mode::eval,
                      Rng* rng = nullptr, ForwardCache* cache = nullptr) {
  Matrix out = forward(net, Matrix(x.transpose()), mode, rng, cache);
  return out.row(0).transpose();
}

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix input;  // dL/dx, for chaining networks and embedding tables
};

// Exact reverse-mode gradients of a scalar loss w.r.t. all parameters and
// the input, given dL/d(output).
inline Gradients backward(const DenseNet& net, const ForwardCache& cache, const Matrix& dout) {
  if (cache.net != &net || cache.pre.size() != net.num_layers())
    throw Error("backward: cache does not match this network/forward call");
  if (dout.rows() != cache.input.rows() || dout.cols() != net.output_width())
    throw Error("backward: loss gradient shape mismatch");

  Gradients g;
  g.weights.resize(net.num_layers());
  g.biases.resize(net.num_layers());

  Matrix da = dout;
  for (std::size_t li = net.num_layers(); li-- > 0;) {
    const bool last = (li + 1 == net.num_layers());
    if (!last && cache.mask.size() > li && cache.mask[li].size() > 0) {
      // act was multiplied by the mask after activation; undo for the
      // activation derivative and scale the incoming gradient.
      da.array() *= cache.mask[li].array();
    }
    Matrix a = cache.act[li];
    if (!last && cache.mask.size() > li && cache.mask[li].size() > 0) {
      // recover pre-dropout activation values for tanh/sigmoid derivatives
      a = cache.pre[li];
      detail::apply_activation(net.hidden_activation, a);
    }
    const Activation act = last ? net.output_activation : net.hidden_activation;
    Matrix dz = detail::activation_backward(act, cache.pre[li], a, da);
    const Matrix& a_prev = (li == 0) ? cache.input : cache.act[li - 1];
    g.weights[li] = dz.transpose() * a_prev;
    g.biases[li] = dz.colwise().sum().transpose();
    da = dz * net.weights[li];
  }
  g.input = std::move(da);
  return g;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators for one tensor, plus its step counter.
template <typename Mat>
struct AdamStateT {
  Mat m, v;
  std::int64_t t = 0;
};
using AdamState = AdamStateT<Matrix>;
using AdamStateVec = AdamStateT<Vector>;

// One bias-corrected Adam update. A zero gradient still advances t and
// decays the moments, matching the reference recursion.
template <typename Mat>
void adam_step(Mat& param, const Mat& grad, AdamStateT<Mat>& state, const AdamConfig& cfg = {}) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw Error("adam_step: parameter/gradient shape mismatch");
  if (state.t == 0) {
    state.m = Mat::Zero(param.rows(), param.cols());
    state.v = Mat::Zero(param.rows(), param.cols());
  }
  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = (cfg.beta2 * state.v.array() + (1.0 - cfg.beta2) * grad.array().square()).matrix();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  param.array() -= cfg.learning_rate * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + cfg.epsilon);
}

// Adam states covering a whole DenseNet.
struct NetAdam {
  std::vector<AdamState> w;
  std::vector<AdamStateVec> b;

  void step(DenseNet& net, const Gradients& g, const AdamConfig& cfg) {
    if (w.empty()) {
      w.resize(net.num_layers());
      b.resize(net.num_layers());
    }
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      adam_step(net.weights[l], g.weights[l], w[l], cfg);
      adam_step(net.biases[l], g.biases[l], b[l], cfg);
    }
  }
};

// ---------------------------------------------------------------------------
// Losses (value + gradient w.r.t. the first argument)

struct LossResult {
  double value = 0;
  Matrix grad;
};

// Mean binary cross-entropy. Probabilities are clamped to
// [1e-7, 1-1e-7] before the logs; targets must be 0/1.
inline LossResult bce_loss(const Matrix& p, const Matrix& y) {
  if (p.rows() != y.rows() || p.cols() != y.cols()) throw Error("bce_loss: shape mismatch");
  const double n = static_cast<double>(p.size());
  LossResult out;
  out.grad = Matrix::Zero(p.rows(), p.cols());
  double total = 0;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const double yi = y(r, c);
      if (yi != 0.0 && yi != 1.0) throw Error("bce_loss: targets must be 0 or 1");
      const double pi = std::clamp(p(r, c), 1e-7, 1.0 - 1e-7);
      total -= yi * std::log(pi) + (1.0 - yi) * std::log(1.0 - pi);
      out.grad(r, c) = (pi - yi) / (pi * (1.0 - pi) * n);
    }
  }
  out.value = total / n;
  return out;
}

// Mean squared error over all coefficients.
inline LossResult mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw Error("mse_loss: shape mismatch");
  const double n = static_cast<double>(pred.size());
  LossResult out;
  Matrix d = pred - target;
  out.value = d.array().square().sum() / n;
  out.grad = (2.0 / n) * d;
  return out;
}

struct KlResult {
  double value = 0;
  Matrix dmu, dlogvar;
};

// KL(N(mu, sigma^2) || N(0, 1)), averaged over all coefficients:
// mean of 0.5 * (mu^2 + sigma^2 - 1 - log sigma^2).
inline KlResult kl_gaussian_loss(const Matrix& mu, const Matrix& logvar) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols())
    throw Error("kl_gaussian_loss: shape mismatch");
  const double n = static_cast<double>(mu.size());
  KlResult out;
  const auto var = logvar.array().exp();
  out.value = 0.5 * (mu.array().square() + var - 1.0 - logvar.array()).sum() / n;
  out.dmu = (mu.array() / n).matrix();
  out.dlogvar = (0.5 * (var - 1.0) / n).matrix();
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint container: named tensors + string metadata, exact round trip.

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Matrix>> tensors;  // insertion-ordered

  void add(const std::string& name, const Matrix& t) { tensors.emplace_back(name, t); }
  void add(const std::string& name, const Vector& t) { tensors.emplace_back(name, Matrix(t)); }

  const Matrix& get(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    throw Error("checkpoint tensor not found: " + name);
  }
  bool has(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return true;
    return false;
  }
};

namespace detail {
inline constexpr std::uint32_t kCheckpointMagic = 0x42434b50;  // "BCKP"
inline constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  auto put32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto put64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  auto puts = [&](const std::string& s) {
    put64(s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  put32(detail::kCheckpointMagic);
  put32(detail::kCheckpointVersion);
  put64(ck.meta.size());
  for (const auto& [k, v] : ck.meta) {
    puts(k);
    puts(v);
  }
  put64(ck.tensors.size());
  for (const auto& [name, t] : ck.tensors) {
    puts(name);
    put64(static_cast<std::uint64_t>(t.rows()));
    put64(static_cast<std::uint64_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.size())));
  }
  if (!out) throw Error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  auto get32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get64 = [&]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto gets = [&]() {
    std::string s(get64(), '\0');
    in.read(s.data(), static_cast<std::streamsize>(s.size()));
    return s;
  };
  if (get32() != detail::kCheckpointMagic) throw Error("not a checkpoint file: " + path);
  const std::uint32_t version = get32();
  if (version != detail::kCheckpointVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const std::uint64_t nm = get64();
  for (std::uint64_t i = 0; i < nm; ++i) {
    std::string k = gets();
    ck.meta[k] = gets();
  }
  const std::uint64_t nt = get64();
  for (std::uint64_t i = 0; i < nt; ++i) {
    std::string name = gets();
    const std::uint64_t rows = get64(), cols = get64();
    Matrix t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!in) throw Error("truncated checkpoint: " + path);
  return ck;
}

// Serialize a DenseNet's layout and parameters under a name prefix.
inline void put_net(Checkpoint& ck, const std::string& prefix, const DenseNet& net) {
  Matrix sizes(1, static_cast<Eigen::Index>(net.layer_sizes.size()));
  for (std::size_t i = 0; i < net.layer_sizes.size(); ++i)
    sizes(0, static_cast<Eigen::Index>(i)) = net.layer_sizes[i];
  ck.add(prefix + ".sizes", sizes);
  ck.meta[prefix + ".hidden"] = to_string(net.hidden_activation);
  ck.meta[prefix + ".output"] = to_string(net.output_activation);
  ck.meta[prefix + ".dropout"] = format_double(net.dropout_rate);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    ck.add(prefix + ".w" + std::to_string(l), net.weights[l]);
    ck.add(prefix + ".b" + std::to_string(l), net.biases[l]);
  }
}

inline DenseNet get_net(const Checkpoint& ck, const std::string& prefix) {
  DenseNet net;
  const Matrix& sizes = ck.get(prefix + ".sizes");
  for (Eigen::Index i = 0; i < sizes.cols(); ++i)
    net.layer_sizes.push_back(static_cast<int>(sizes(0, i)));
  net.hidden_activation = activation_from(ck.meta.at(prefix + ".hidden"));
  net.output_activation = activation_from(ck.meta.at(prefix + ".output"));
  bool ok = true;
  net.dropout_rate = parse_double(ck.meta.at(prefix + ".dropout"), ok);
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    net.weights.push_back(ck.get(prefix + ".w" + std::to_string(l)));
    net.biases.push_back(Vector(ck.get(prefix + ".b" + std::to_string(l))));
  }
  return net;
}

}  // namespace benchctr::nn
