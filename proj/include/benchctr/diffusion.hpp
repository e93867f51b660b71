#pragma once

// Latent-diffusion synthetic data generation: a VAE maps rows into a
// continuous latent space, a noise-prediction network is trained under a
// linear beta schedule, and a jointly trained CTR head labels the decoded
// synthetic rows. The generation loop applies the plain update
// z <- z - alpha_step * eps_pred with t walked from small to large - this
// is deliberately not ancestral DDPM sampling; see README for the
// rationale. Its step size and step count are tuned only through the
// train-on-synthetic-test-on-real sanity check.
//
// Feature codec: numerics are standardized to zero mean / unit variance;
// each categorical field contributes a learned dense code of width
// `code_dim` (trained through the encoder input path; reconstruction
// targets are treated as constants). Decoding picks the nearest code row,
// so generated ids always stay inside the vocabulary.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <future>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "benchctr/data.hpp"
#include "benchctr/ingest.hpp"
#include "benchctr/nn.hpp"

namespace benchctr {

struct DiffusionConfig {
  int latent_dim = 16;
  int hidden = 64;
  int code_dim = 4;         // width of the learned categorical codes
  int timesteps = 1000;     // T
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double lambda_recon = 1.0;
  double lambda_kl = 0.1;
  double lambda_diff = 1.0;
  double lambda_ctr = 1.0;
  double alpha_step = 0.01;
  int num_steps = 50;
  double threshold = 0.5;   // label = 1 iff sigmoid(ctr logit) > threshold
  int epochs = 30;          // E
  int batch_size = 256;
  double learning_rate = 1e-3;
  double dropout = 0.0;

  void validate() const {
    if (latent_dim < 1 || hidden < 1 || code_dim < 1) throw DataError("diffusion: widths must be >= 1");
    if (timesteps < 2 || num_steps < 1 || num_steps > timesteps)
      throw DataError("diffusion: need 1 <= num_steps <= T and T >= 2");
    if (!(beta_start > 0 && beta_end < 1 && beta_start < beta_end))
      throw DataError("diffusion: beta schedule must be increasing inside (0,1)");
    if (lambda_recon < 0 || lambda_kl < 0 || lambda_diff < 0 || lambda_ctr < 0)
      throw DataError("diffusion: loss weights must be >= 0");
    if (threshold < 0 || threshold > 1) throw DataError("diffusion: threshold must be in [0,1]");
  }
};

struct DiffusionBundle {
  DiffusionConfig cfg;
  std::vector<FieldSchema> schema;     // training schema (label included)
  std::vector<std::size_t> cat_fields; // schema indices, order of code tables
  std::vector<std::size_t> num_fields;
  std::vector<nn::Matrix> codes;       // per categorical field: cardinality x code_dim
  std::vector<double> num_mean, num_std;

  nn::DenseNet encoder;    // input -> (mu, logvar), output width 2*latent
  nn::DenseNet decoder;    // latent -> input
  nn::DenseNet noise_net;  // (z, t/T) -> eps_pred
  nn::DenseNet ctr_net;    // reconstructed features -> click logit

  std::vector<double> betas;      // index 1..T
  std::vector<double> alpha_bar;  // cumulative prod of (1 - beta), index 1..T

  int input_width() const {
    return static_cast<int>(cat_fields.size()) * cfg.code_dim + static_cast<int>(num_fields.size());
  }
};

inline void from_json(const nlohmann::json& j, DiffusionConfig& cfg) {
  cfg = DiffusionConfig{};
  cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.code_dim = j.value("code_dim", cfg.code_dim);
  cfg.timesteps = j.value("timesteps", cfg.timesteps);
  cfg.beta_start = j.value("beta_start", cfg.beta_start);
  cfg.beta_end = j.value("beta_end", cfg.beta_end);
  cfg.lambda_recon = j.value("lambda_recon", cfg.lambda_recon);
  cfg.lambda_kl = j.value("lambda_kl", cfg.lambda_kl);
  cfg.lambda_diff = j.value("lambda_diff", cfg.lambda_diff);
  cfg.lambda_ctr = j.value("lambda_ctr", cfg.lambda_ctr);
  cfg.alpha_step = j.value("alpha_step", cfg.alpha_step);
  cfg.num_steps = j.value("num_steps", cfg.num_steps);
  cfg.threshold = j.value("threshold", cfg.threshold);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.validate();
}

// ---------------------------------------------------------------------------
// Construction

namespace detail {

// Linear beta schedule over t = 1..T with alpha_bar_t = prod(1 - beta_s).
inline void build_schedule(DiffusionBundle& b) {
  const int T = b.cfg.timesteps;
  b.betas.assign(static_cast<std::size_t>(T) + 1, 0.0);
  b.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
  double prod = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double beta = b.cfg.beta_start + (b.cfg.beta_end - b.cfg.beta_start) *
                                               static_cast<double>(t - 1) / static_cast<double>(T - 1);
    prod *= (1.0 - beta);
    b.betas[static_cast<std::size_t>(t)] = beta;
    b.alpha_bar[static_cast<std::size_t>(t)] = prod;
  }
}

}  // namespace detail

inline DiffusionBundle make_bundle(const Dataset& ds, const std::vector<std::size_t>& stat_rows,
                                   const DiffusionConfig& cfg, Rng& rng) {
  cfg.validate();
  DiffusionBundle b;
  b.cfg = cfg;
  b.schema = ds.schema;
  for (std::size_t f = 0; f < ds.schema.size(); ++f) {
    if (ds.schema[f].kind == FieldKind::categorical) {
      if (!ds.schema[f].has_vocab() || ds.columns[f].ids.empty())
        throw DataError("diffusion: categorical field " + ds.schema[f].name + " is not encoded");
      b.cat_fields.push_back(f);
    } else if (ds.schema[f].kind == FieldKind::numeric) {
      b.num_fields.push_back(f);
    }
  }
  if (b.cat_fields.empty() && b.num_fields.empty())
    throw DataError("diffusion: dataset has no feature fields");

  for (std::size_t f : b.cat_fields) {
    nn::Matrix codes(ds.schema[f].cardinality, cfg.code_dim);
    for (Eigen::Index r = 0; r < codes.rows(); ++r)
      for (Eigen::Index c = 0; c < codes.cols(); ++c) codes(r, c) = 2.0 * uniform_double(rng) - 1.0;
    b.codes.push_back(std::move(codes));
  }
  for (std::size_t f : b.num_fields) {
    const auto& col = ds.columns[f].numeric;
    double mean = 0, var = 0;
    const double n = static_cast<double>(stat_rows.empty() ? 1 : stat_rows.size());
    for (std::size_t r : stat_rows) mean += col[r];
    mean /= n;
    for (std::size_t r : stat_rows) var += (col[r] - mean) * (col[r] - mean);
    var /= n;
    b.num_mean.push_back(mean);
    b.num_std.push_back(var > 0 ? std::sqrt(var) : 1.0);
  }

  const int in = b.input_width();
  b.encoder = nn::make_net({in, cfg.hidden, 2 * cfg.latent_dim}, nn::Activation::relu,
                           nn::Activation::identity, cfg.dropout, rng);
  b.decoder = nn::make_net({cfg.latent_dim, cfg.hidden, in}, nn::Activation::relu,
                           nn::Activation::identity, 0.0, rng);
  b.noise_net = nn::make_net({cfg.latent_dim + 1, cfg.hidden, cfg.latent_dim}, nn::Activation::relu,
                             nn::Activation::identity, 0.0, rng);
  b.ctr_net = nn::make_net({in, cfg.hidden, 1}, nn::Activation::relu, nn::Activation::identity,
                           0.0, rng);

  detail::build_schedule(b);
  return b;
}

// ---------------------------------------------------------------------------
// Feature codec

// Rows -> standardized feature matrix (code blocks + standardized numerics).
inline nn::Matrix featurize(const DiffusionBundle& b, const Dataset& ds,
                            const std::vector<std::size_t>& rows) {
  nn::Matrix x(static_cast<Eigen::Index>(rows.size()), b.input_width());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int pos = 0;
    for (std::size_t c = 0; c < b.cat_fields.size(); ++c) {
      const std::int32_t id = ds.columns[b.cat_fields[c]].ids[rows[i]];
      x.block(static_cast<Eigen::Index>(i), pos, 1, b.cfg.code_dim) = b.codes[c].row(id);
      pos += b.cfg.code_dim;
    }
    for (std::size_t nf = 0; nf < b.num_fields.size(); ++nf) {
      x(static_cast<Eigen::Index>(i), pos) =
          (ds.columns[b.num_fields[nf]].numeric[rows[i]] - b.num_mean[nf]) / b.num_std[nf];
      pos += 1;
    }
  }
  return x;
}

// Nearest-code id per categorical field and de-standardized numerics for
// one matrix of feature-space rows.
inline void defeaturize(const DiffusionBundle& b, const nn::Matrix& x,
                        std::vector<std::vector<std::int32_t>>& cat_ids,
                        std::vector<std::vector<double>>& numerics) {
  const Eigen::Index n = x.rows();
  cat_ids.assign(b.cat_fields.size(), std::vector<std::int32_t>(static_cast<std::size_t>(n)));
  numerics.assign(b.num_fields.size(), std::vector<double>(static_cast<std::size_t>(n)));
  int pos = 0;
  for (std::size_t c = 0; c < b.cat_fields.size(); ++c) {
    // argmin_j |v - code_j|^2 == argmax_j (v . code_j - 0.5 |code_j|^2)
    const nn::Matrix& codes = b.codes[c];
    nn::Matrix scores = x.block(0, pos, n, b.cfg.code_dim) * codes.transpose();
    const nn::Vector half_norms = 0.5 * codes.rowwise().squaredNorm();
    scores.rowwise() -= half_norms.transpose();
    for (Eigen::Index r = 0; r < n; ++r) {
      Eigen::Index best = 0;
      scores.row(r).maxCoeff(&best);
      cat_ids[c][static_cast<std::size_t>(r)] = static_cast<std::int32_t>(best);
    }
    pos += b.cfg.code_dim;
  }
  for (std::size_t nf = 0; nf < b.num_fields.size(); ++nf) {
    for (Eigen::Index r = 0; r < n; ++r)
      numerics[nf][static_cast<std::size_t>(r)] = x(r, pos) * b.num_std[nf] + b.num_mean[nf];
    pos += 1;
  }
}

// ---------------------------------------------------------------------------
// Core operations

// Encoder forward: (mu, log sigma^2).
inline std::pair<nn::Matrix, nn::Matrix> encode(const DiffusionBundle& b, const nn::Matrix& x) {
  const nn::Matrix out = nn::forward(b.encoder, x);
  const int latent = b.cfg.latent_dim;
  return {out.leftCols(latent), out.rightCols(latent)};
}

// z = mu + exp(0.5 * logvar) . eps, with the noise supplied explicitly.
inline nn::Matrix reparameterize(const nn::Matrix& mu, const nn::Matrix& logvar, const nn::Matrix& eps) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.rows() != eps.rows() ||
      mu.cols() != eps.cols())
    throw DataError("reparameterize: shape mismatch");
  return mu.array() + (0.5 * logvar.array()).exp() * eps.array();
}

inline nn::Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal_double(rng);
  return m;
}

inline nn::Matrix reparameterize(const nn::Matrix& mu, const nn::Matrix& logvar, Rng& rng) {
  return reparameterize(mu, logvar, standard_normal(mu.rows(), mu.cols(), rng));
}

// Variance-preserving forward noising under the linear schedule:
// z_noisy = sqrt(alpha_bar_t) * z + sqrt(1 - alpha_bar_t) * eps, rowwise t.
inline nn::Matrix add_noise(const nn::Matrix& z, const std::vector<int>& t, const nn::Matrix& eps,
                            const DiffusionBundle& b) {
  if (z.rows() != eps.rows() || z.cols() != eps.cols() ||
      static_cast<std::size_t>(z.rows()) != t.size())
    throw DataError("add_noise: shape mismatch");
  nn::Matrix out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int tr = t[static_cast<std::size_t>(r)];
    if (tr < 1 || tr > b.cfg.timesteps) throw DataError("add_noise: timestep out of range");
    const double ab = b.alpha_bar[static_cast<std::size_t>(tr)];
    out.row(r) = std::sqrt(ab) * z.row(r) + std::sqrt(1.0 - ab) * eps.row(r);
  }
  return out;
}

struct EpochLosses {
  double recon = 0, kl = 0, diff = 0, ctr = 0, total = 0;
};

// Optimizer state for all four networks plus the code tables.
struct DiffusionTrainState {
  nn::NetAdam encoder, decoder, noise_net, ctr_net;
  std::vector<nn::AdamState> codes;
};

// One pass over the shuffled training rows. Per batch: VAE forward,
// uniform timestep sampling, forward noising, noise prediction, CTR
// prediction on the reconstruction, weighted joint loss and one Adam step
// over every parameter tensor. Returns the epoch-mean loss components.
inline EpochLosses train_epoch(DiffusionBundle& b, const Dataset& ds,
                               const std::vector<std::size_t>& train_rows, Rng& rng,
                               DiffusionTrainState& st) {
  if (train_rows.empty()) throw DataError("train_epoch: empty training set");
  if (st.codes.empty()) st.codes.resize(b.codes.size());
  const int latent = b.cfg.latent_dim;
  const auto& labels = ds.labels();
  nn::AdamConfig adam;
  adam.learning_rate = b.cfg.learning_rate;

  std::vector<std::size_t> order = train_rows;
  deterministic_shuffle(order, rng);

  EpochLosses epoch;
  double weight_sum = 0;

  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(b.cfg.batch_size)) {
    const std::size_t cnt = std::min(order.size() - start, static_cast<std::size_t>(b.cfg.batch_size));
    const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(start + cnt));
    const Eigen::Index bn = static_cast<Eigen::Index>(cnt);

    const nn::Matrix x = featurize(b, ds, batch);

    // VAE forward
    nn::ForwardCache enc_cache;
    const nn::Matrix enc_out = nn::forward(b.encoder, x, nn::Mode::train, &rng, &enc_cache);
    const nn::Matrix mu = enc_out.leftCols(latent);
    const nn::Matrix logvar = enc_out.rightCols(latent);
    const nn::Matrix eps1 = standard_normal(bn, latent, rng);
    const nn::Matrix sigma = (0.5 * logvar.array()).exp();
    const nn::Matrix z = mu.array() + sigma.array() * eps1.array();

    nn::ForwardCache dec_cache;
    const nn::Matrix x_recon = nn::forward(b.decoder, z, nn::Mode::train, &rng, &dec_cache);

    // Diffusion forward
    std::vector<int> t(cnt);
    for (std::size_t i = 0; i < cnt; ++i)
      t[i] = 1 + static_cast<int>(bounded_uniform(rng, static_cast<std::uint64_t>(b.cfg.timesteps)));
    const nn::Matrix eps = standard_normal(bn, latent, rng);
    const nn::Matrix z_noisy = add_noise(z, t, eps, b);
    nn::Matrix noise_in(bn, latent + 1);
    noise_in.leftCols(latent) = z_noisy;
    for (Eigen::Index r = 0; r < bn; ++r)
      noise_in(r, latent) = static_cast<double>(t[static_cast<std::size_t>(r)]) /
                            static_cast<double>(b.cfg.timesteps);
    nn::ForwardCache noise_cache;
    const nn::Matrix eps_pred = nn::forward(b.noise_net, noise_in, nn::Mode::train, &rng, &noise_cache);

    // CTR prediction on the reconstruction
    nn::ForwardCache ctr_cache;
    const nn::Matrix ctr_logit = nn::forward(b.ctr_net, x_recon, nn::Mode::train, &rng, &ctr_cache);

    // Losses (reconstruction target is the current featurization, held
    // constant for the gradient).
    const nn::LossResult l_recon = nn::mse_loss(x_recon, x);
    const nn::KlResult l_kl = nn::kl_gaussian_loss(mu, logvar);
    const nn::LossResult l_diff = nn::mse_loss(eps_pred, eps);
    nn::Matrix y(bn, 1);
    for (std::size_t i = 0; i < cnt; ++i)
      y(static_cast<Eigen::Index>(i), 0) = static_cast<double>(labels[batch[i]]);
    nn::Matrix p(bn, 1);
    double ctr_loss = 0;
    nn::Matrix dlogit(bn, 1);
    for (Eigen::Index r = 0; r < bn; ++r) {
      p(r, 0) = nn::sigmoid(ctr_logit(r, 0));
      const double pc = std::clamp(p(r, 0), 1e-7, 1.0 - 1e-7);
      ctr_loss -= y(r, 0) * std::log(pc) + (1.0 - y(r, 0)) * std::log(1.0 - pc);
      dlogit(r, 0) = b.cfg.lambda_ctr * (p(r, 0) - y(r, 0)) / static_cast<double>(cnt);
    }
    ctr_loss /= static_cast<double>(cnt);

    const double total = b.cfg.lambda_recon * l_recon.value + b.cfg.lambda_kl * l_kl.value +
                         b.cfg.lambda_diff * l_diff.value + b.cfg.lambda_ctr * ctr_loss;
    const double w = static_cast<double>(cnt);
    epoch.recon += l_recon.value * w;
    epoch.kl += l_kl.value * w;
    epoch.diff += l_diff.value * w;
    epoch.ctr += ctr_loss * w;
    epoch.total += total * w;
    weight_sum += w;

    // ---- backward ----
    // ctr head, into the reconstruction
    nn::Gradients g_ctr = nn::backward(b.ctr_net, ctr_cache, dlogit);

    // decoder: recon loss + ctr path
    nn::Matrix dx_recon = b.cfg.lambda_recon * l_recon.grad + g_ctr.input;
    nn::Gradients g_dec = nn::backward(b.decoder, dec_cache, dx_recon);

    // noise net, into z via sqrt(alpha_bar_t)
    nn::Gradients g_noise = nn::backward(b.noise_net, noise_cache, b.cfg.lambda_diff * l_diff.grad);
    nn::Matrix dz = g_dec.input;
    for (Eigen::Index r = 0; r < bn; ++r) {
      const double ab = b.alpha_bar[static_cast<std::size_t>(t[static_cast<std::size_t>(r)])];
      dz.row(r) += std::sqrt(ab) * g_noise.input.row(r).head(latent);
    }

    // through the reparameterization into (mu, logvar), plus KL terms
    nn::Matrix denc(bn, 2 * latent);
    denc.leftCols(latent) = dz + b.cfg.lambda_kl * l_kl.dmu;
    denc.rightCols(latent) =
        (dz.array() * eps1.array() * 0.5 * sigma.array()).matrix() + b.cfg.lambda_kl * l_kl.dlogvar;
    nn::Gradients g_enc = nn::backward(b.encoder, enc_cache, denc);

    // codes receive gradient only through the encoder input
    std::vector<nn::Matrix> gcodes(b.codes.size());
    for (std::size_t c = 0; c < b.codes.size(); ++c)
      gcodes[c] = nn::Matrix::Zero(b.codes[c].rows(), b.codes[c].cols());
    for (std::size_t i = 0; i < cnt; ++i) {
      int pos = 0;
      for (std::size_t c = 0; c < b.cat_fields.size(); ++c) {
        const std::int32_t id = ds.columns[b.cat_fields[c]].ids[batch[i]];
        gcodes[c].row(id) += g_enc.input.block(static_cast<Eigen::Index>(i), pos, 1, b.cfg.code_dim);
        pos += b.cfg.code_dim;
      }
    }

    // joint Adam update of all four networks and the code tables
    st.encoder.step(b.encoder, g_enc, adam);
    st.decoder.step(b.decoder, g_dec, adam);
    st.noise_net.step(b.noise_net, g_noise, adam);
    st.ctr_net.step(b.ctr_net, g_ctr, adam);
    for (std::size_t c = 0; c < b.codes.size(); ++c)
      nn::adam_step(b.codes[c], gcodes[c], st.codes[c], adam);
  }

  epoch.recon /= weight_sum;
  epoch.kl /= weight_sum;
  epoch.diff /= weight_sum;
  epoch.ctr /= weight_sum;
  epoch.total /= weight_sum;
  return epoch;
}

// Full training phase: E epochs over the given rows.
inline std::vector<EpochLosses> train_bundle(DiffusionBundle& b, const Dataset& ds,
                                             const std::vector<std::size_t>& train_rows, Rng& rng) {
  DiffusionTrainState st;
  std::vector<EpochLosses> history;
  history.reserve(static_cast<std::size_t>(b.cfg.epochs));
  for (int e = 0; e < b.cfg.epochs; ++e) history.push_back(train_epoch(b, ds, train_rows, rng, st));
  return history;
}

// ---------------------------------------------------------------------------
// Generation phase

namespace detail {
inline constexpr std::size_t kDiffusionShard = 4096;
}

// Produce M synthetic rows: draw z ~ N(0, I), run the configured number of
// update steps (t = max(1, step * (T / num_steps)) per step), decode,
// de-standardize, and label through the CTR head at the configured
// threshold. Sharded and worker-count independent like the rule generator.
inline Dataset generate_synthetic(const DiffusionBundle& b, std::size_t m, std::uint64_t seed,
                                  int workers = 1) {
  if (m < 1) throw DataError("generate_synthetic: M must be >= 1");
  const int latent = b.cfg.latent_dim;
  const int t_stride = b.cfg.timesteps / b.cfg.num_steps;

  Dataset ds;
  ds.schema = b.schema;
  ds.columns.resize(ds.schema.size());
  for (std::size_t f = 0; f < ds.schema.size(); ++f) {
    switch (ds.schema[f].kind) {
      case FieldKind::categorical: ds.columns[f].ids.resize(m); break;
      case FieldKind::numeric: ds.columns[f].numeric.resize(m); break;
      case FieldKind::temporal: ds.columns[f].stamps.assign(m, 0); break;
      case FieldKind::label: ds.columns[f].ids.resize(m); break;
    }
  }
  const std::size_t label_f = ds.label_index();

  const std::size_t n_shards = (m + detail::kDiffusionShard - 1) / detail::kDiffusionShard;
  auto run_shard = [&](std::size_t shard) {
    Rng rng(child_seed(seed, shard));
    const std::size_t begin = shard * detail::kDiffusionShard;
    const std::size_t end = std::min(begin + detail::kDiffusionShard, m);
    const Eigen::Index bn = static_cast<Eigen::Index>(end - begin);

    nn::Matrix z = standard_normal(bn, latent, rng);
    nn::Matrix noise_in(bn, latent + 1);
    for (int step = 1; step <= b.cfg.num_steps; ++step) {
      const int t = std::max(1, step * t_stride);
      noise_in.leftCols(latent) = z;
      noise_in.col(latent).setConstant(static_cast<double>(t) / static_cast<double>(b.cfg.timesteps));
      const nn::Matrix eps_pred = nn::forward(b.noise_net, noise_in);
      z -= b.cfg.alpha_step * eps_pred;
    }

    const nn::Matrix x = nn::forward(b.decoder, z);
    const nn::Matrix logits = nn::forward(b.ctr_net, x);

    std::vector<std::vector<std::int32_t>> cat_ids;
    std::vector<std::vector<double>> numerics;
    defeaturize(b, x, cat_ids, numerics);

    for (Eigen::Index i = 0; i < bn; ++i) {
      const std::size_t r = begin + static_cast<std::size_t>(i);
      for (std::size_t c = 0; c < b.cat_fields.size(); ++c)
        ds.columns[b.cat_fields[c]].ids[r] = cat_ids[c][static_cast<std::size_t>(i)];
      for (std::size_t nf = 0; nf < b.num_fields.size(); ++nf)
        ds.columns[b.num_fields[nf]].numeric[r] = numerics[nf][static_cast<std::size_t>(i)];
      const double p = nn::sigmoid(logits(i, 0));
      ds.columns[label_f].ids[r] = (p > b.cfg.threshold) ? 1 : 0;
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

  ds.provenance = "diffusion:seed=" + std::to_string(seed) + ":m=" + std::to_string(m);
  return ds;
}

// ---------------------------------------------------------------------------
// Checkpointing

inline void save_bundle(const DiffusionBundle& b, const std::string& path) {
  nn::Checkpoint ck;
  nlohmann::json jc;
  jc["latent_dim"] = b.cfg.latent_dim;
  jc["hidden"] = b.cfg.hidden;
  jc["code_dim"] = b.cfg.code_dim;
  jc["timesteps"] = b.cfg.timesteps;
  jc["beta_start"] = b.cfg.beta_start;
  jc["beta_end"] = b.cfg.beta_end;
  jc["lambda_recon"] = b.cfg.lambda_recon;
  jc["lambda_kl"] = b.cfg.lambda_kl;
  jc["lambda_diff"] = b.cfg.lambda_diff;
  jc["lambda_ctr"] = b.cfg.lambda_ctr;
  jc["alpha_step"] = b.cfg.alpha_step;
  jc["num_steps"] = b.cfg.num_steps;
  jc["threshold"] = b.cfg.threshold;
  jc["epochs"] = b.cfg.epochs;
  jc["batch_size"] = b.cfg.batch_size;
  jc["learning_rate"] = b.cfg.learning_rate;
  jc["dropout"] = b.cfg.dropout;
  ck.meta["diffusion.config"] = jc.dump();
  ck.meta["diffusion.schema"] = schema_to_json(b.schema).dump();

  nn::put_net(ck, "encoder", b.encoder);
  nn::put_net(ck, "decoder", b.decoder);
  nn::put_net(ck, "noise_net", b.noise_net);
  nn::put_net(ck, "ctr_net", b.ctr_net);
  for (std::size_t c = 0; c < b.codes.size(); ++c) ck.add("codes" + std::to_string(c), b.codes[c]);
  nn::Matrix stats(2, static_cast<Eigen::Index>(b.num_fields.size()));
  for (std::size_t i = 0; i < b.num_fields.size(); ++i) {
    stats(0, static_cast<Eigen::Index>(i)) = b.num_mean[i];
    stats(1, static_cast<Eigen::Index>(i)) = b.num_std[i];
  }
  ck.add("num_stats", stats);
  nn::save_checkpoint(ck, path);
}

inline DiffusionBundle load_bundle(const std::string& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  DiffusionBundle b;
  const nlohmann::json jc = nlohmann::json::parse(ck.meta.at("diffusion.config"));
  b.cfg.latent_dim = jc.at("latent_dim").get<int>();
  b.cfg.hidden = jc.at("hidden").get<int>();
  b.cfg.code_dim = jc.at("code_dim").get<int>();
  b.cfg.timesteps = jc.at("timesteps").get<int>();
  b.cfg.beta_start = jc.at("beta_start").get<double>();
  b.cfg.beta_end = jc.at("beta_end").get<double>();
  b.cfg.lambda_recon = jc.at("lambda_recon").get<double>();
  b.cfg.lambda_kl = jc.at("lambda_kl").get<double>();
  b.cfg.lambda_diff = jc.at("lambda_diff").get<double>();
  b.cfg.lambda_ctr = jc.at("lambda_ctr").get<double>();
  b.cfg.alpha_step = jc.at("alpha_step").get<double>();
  b.cfg.num_steps = jc.at("num_steps").get<int>();
  b.cfg.threshold = jc.at("threshold").get<double>();
  b.cfg.epochs = jc.at("epochs").get<int>();
  b.cfg.batch_size = jc.at("batch_size").get<int>();
  b.cfg.learning_rate = jc.at("learning_rate").get<double>();
  b.cfg.dropout = jc.at("dropout").get<double>();
  b.schema = schema_from_json(nlohmann::json::parse(ck.meta.at("diffusion.schema")));

  for (std::size_t f = 0; f < b.schema.size(); ++f) {
    if (b.schema[f].kind == FieldKind::categorical) b.cat_fields.push_back(f);
    else if (b.schema[f].kind == FieldKind::numeric) b.num_fields.push_back(f);
  }
  b.encoder = nn::get_net(ck, "encoder");
  b.decoder = nn::get_net(ck, "decoder");
  b.noise_net = nn::get_net(ck, "noise_net");
  b.ctr_net = nn::get_net(ck, "ctr_net");
  for (std::size_t c = 0; c < b.cat_fields.size(); ++c)
    b.codes.push_back(ck.get("codes" + std::to_string(c)));
  const nn::Matrix& stats = ck.get("num_stats");
  for (Eigen::Index i = 0; i < stats.cols(); ++i) {
    b.num_mean.push_back(stats(0, i));
    b.num_std.push_back(stats(1, i));
  }
  detail::build_schedule(b);
  return b;
}

}  // namespace benchctr
