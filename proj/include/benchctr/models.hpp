#pragma once

// Reference CTR predictors (LR, Poly2, FM, MLP) over a shared sparse
// feature space, trained with mini-batch Adam on BCE, early stopping on
// validation AUC-ROC and snapshot-of-best-epoch semantics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "benchctr/data.hpp"
#include "benchctr/metrics.hpp"
#include "benchctr/nn.hpp"

namespace benchctr {

enum class ModelKind { lr, poly2, fm, mlp };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::lr: return "lr";
    case ModelKind::poly2: return "poly2";
    case ModelKind::fm: return "fm";
    case ModelKind::mlp: return "mlp";
  }
  return "?";
}

inline ModelKind model_kind_from(const std::string& s) {
  if (s == "lr") return ModelKind::lr;
  if (s == "poly2") return ModelKind::poly2;
  if (s == "fm") return ModelKind::fm;
  if (s == "mlp") return ModelKind::mlp;
  throw DataError("unknown model kind: " + s);
}

struct ModelSpec {
  ModelKind kind = ModelKind::lr;
  int embedding_dim = 16;              // fm latent width / mlp embedding width
  std::vector<int> hidden_layers = {64, 64};
  double dropout = 0.0;
  int pair_hash_buckets = 1 << 18;     // poly2
  double l2_embedding = 1e-6;

  void validate() const {
    if (embedding_dim < 1) throw DataError("ModelSpec: embedding_dim must be >= 1");
    if (pair_hash_buckets < 1) throw DataError("ModelSpec: pair_hash_buckets must be >= 1");
    if (dropout < 0 || dropout >= 1) throw DataError("ModelSpec: dropout must be in [0,1)");
  }
};

struct TrainConfig {
  int max_epochs = 99;
  int early_stop_patience = 2;
  int batch_size = 4096;
  double learning_rate = 0.001;
  std::vector<std::int64_t> seeds = {2019, 2020};
  double improvement_eps = 1e-5;  // minimum validation AUC gain that counts

  void validate() const {
    if (early_stop_patience < 1) throw DataError("TrainConfig: patience must be >= 1");
    if (seeds.empty()) throw DataError("TrainConfig: seeds must be nonempty");
    if (batch_size < 1) throw DataError("TrainConfig: batch_size must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Feature space: one slot block per categorical field (its cardinality),
// one value-scaled slot per numeric field. Temporal fields are skipped
// (the prepare step expands them into categoricals).

struct FeatureSpace {
  std::vector<int> field_offset;     // -1 for skipped fields, parallel to schema
  std::vector<double> num_mean;      // per field; 0 for non-numeric
  std::vector<double> num_scale;     // per field; 1 for non-numeric
  std::vector<std::size_t> fields;   // participating field indices, schema order
  int total = 0;

  // Standardization constants come from the given rows (the training
  // split), so validation/test encoding never leaks statistics.
  static FeatureSpace build(const Dataset& ds, const std::vector<std::size_t>& stat_rows) {
    FeatureSpace sp;
    sp.field_offset.assign(ds.schema.size(), -1);
    sp.num_mean.assign(ds.schema.size(), 0.0);
    sp.num_scale.assign(ds.schema.size(), 1.0);
    for (std::size_t f = 0; f < ds.schema.size(); ++f) {
      const FieldSchema& fs = ds.schema[f];
      if (fs.kind == FieldKind::categorical) {
        if (!fs.has_vocab() || ds.columns[f].ids.empty())
          throw DataError("FeatureSpace: categorical field " + fs.name + " is not encoded");
        sp.field_offset[f] = sp.total;
        sp.total += fs.cardinality;
        sp.fields.push_back(f);
      } else if (fs.kind == FieldKind::numeric) {
        double mean = 0, var = 0;
        const auto& col = ds.columns[f].numeric;
        const double n = static_cast<double>(stat_rows.empty() ? 1 : stat_rows.size());
        for (std::size_t r : stat_rows) mean += col[r];
        mean /= n;
        for (std::size_t r : stat_rows) var += (col[r] - mean) * (col[r] - mean);
        var /= n;
        sp.num_mean[f] = mean;
        sp.num_scale[f] = var > 0 ? std::sqrt(var) : 1.0;
        sp.field_offset[f] = sp.total;
        sp.total += 1;
        sp.fields.push_back(f);
      }
    }
    if (sp.total == 0) throw DataError("FeatureSpace: no usable feature fields");
    return sp;
  }

  // Active (feature id, value) pairs for one row: categorical slots carry
  // 1.0, numeric slots the standardized value.
  void encode(const Dataset& ds, std::size_t row, std::vector<std::pair<int, double>>& out) const {
    out.clear();
    for (std::size_t f : fields) {
      const int base = field_offset[f];
      if (ds.schema[f].kind == FieldKind::categorical) {
        out.emplace_back(base + ds.columns[f].ids[row], 1.0);
      } else {
        out.emplace_back(base, (ds.columns[f].numeric[row] - num_mean[f]) / num_scale[f]);
      }
    }
  }
};

using ActiveFeatures = std::vector<std::pair<int, double>>;

// ---------------------------------------------------------------------------
// Model parameters and scorers

struct CtrModel {
  ModelSpec spec;
  FeatureSpace space;
  std::vector<std::string> field_names;  // participating fields, for schema checks

  double w0 = 0;
  nn::Vector w;                   // linear weights, space.total
  nn::Matrix v;                   // fm latent vectors, space.total x k
  nn::Vector pair_w;              // poly2 hashed pair weights
  std::vector<nn::Matrix> embed;  // mlp per-field tables (categorical fields only)
  nn::DenseNet net;               // mlp trunk
};

// Symmetric deterministic pair hash into [0, buckets).
inline int pair_bucket(int i, int j, int buckets) {
  const std::uint64_t a = static_cast<std::uint64_t>(std::min(i, j));
  const std::uint64_t b = static_cast<std::uint64_t>(std::max(i, j));
  return static_cast<int>(splitmix64(a * 0x9e3779b97f4a7c15ULL + b) % static_cast<std::uint64_t>(buckets));
}

inline double lr_score(const CtrModel& m, const ActiveFeatures& x) {
  double logit = m.w0;
  for (const auto& [i, xi] : x) {
    if (i < 0 || i >= m.space.total) throw DataError("lr_score: feature id out of range");
    logit += m.w[i] * xi;
  }
  return logit;
}

inline double poly2_score(const CtrModel& m, const ActiveFeatures& x) {
  double logit = lr_score(m, x);
  for (std::size_t a = 0; a < x.size(); ++a)
    for (std::size_t b = a + 1; b < x.size(); ++b)
      logit += m.pair_w[pair_bucket(x[a].first, x[b].first, m.spec.pair_hash_buckets)] * x[a].second * x[b].second;
  return logit;
}

// Linear-time pairwise form: 0.5 * sum_d [(sum_i v_id x_i)^2 - sum_i v_id^2 x_i^2],
// equal to the brute-force sum over feature pairs of <v_i, v_j> x_i x_j.
inline double fm_score(const CtrModel& m, const ActiveFeatures& x) {
  double logit = lr_score(m, x);
  const int k = m.spec.embedding_dim;
  if (m.v.rows() != m.space.total) throw DataError("fm_score: missing latent vectors");
  for (int d = 0; d < k; ++d) {
    double sum = 0, sum_sq = 0;
    for (const auto& [i, xi] : x) {
      const double t = m.v(i, d) * xi;
      sum += t;
      sum_sq += t * t;
    }
    logit += 0.5 * (sum * sum - sum_sq);
  }
  return logit;
}

namespace detail {

inline int mlp_input_width(const Dataset& ds, const FeatureSpace& sp, int k) {
  int w = 0;
  for (std::size_t f : sp.fields)
    w += (ds.schema[f].kind == FieldKind::categorical) ? k : 1;
  return w;
}

// MLP input row: per-field embedding blocks for categoricals, one
// standardized slot per numeric field.
inline void mlp_fill_row(const CtrModel& m, const Dataset& ds, std::size_t row, nn::Matrix& x,
                         Eigen::Index out_row) {
  int pos = 0;
  int table = 0;
  const int k = m.spec.embedding_dim;
  for (std::size_t f : m.space.fields) {
    if (ds.schema[f].kind == FieldKind::categorical) {
      const std::int32_t id = ds.columns[f].ids[row];
      x.block(out_row, pos, 1, k) = m.embed[static_cast<std::size_t>(table)].row(id);
      pos += k;
      ++table;
    } else {
      x(out_row, pos) = (ds.columns[f].numeric[row] - m.space.num_mean[f]) / m.space.num_scale[f];
      pos += 1;
    }
  }
}

}  // namespace detail

inline double mlp_score(const CtrModel& m, const Dataset& ds, std::size_t row) {
  nn::Matrix x(1, m.net.input_width());
  detail::mlp_fill_row(m, ds, row, x, 0);
  return nn::forward(m.net, x)(0, 0);
}

// Logit for one dataset row under any model kind.
inline double score_row(const CtrModel& m, const Dataset& ds, std::size_t row) {
  if (m.spec.kind == ModelKind::mlp) return mlp_score(m, ds, row);
  ActiveFeatures x;
  m.space.encode(ds, row, x);
  switch (m.spec.kind) {
    case ModelKind::lr: return lr_score(m, x);
    case ModelKind::poly2: return poly2_score(m, x);
    case ModelKind::fm: return fm_score(m, x);
    case ModelKind::mlp: break;
  }
  return 0;
}

inline void check_schema_compatible(const CtrModel& m, const Dataset& ds) {
  for (std::size_t i = 0; i < m.space.fields.size(); ++i) {
    const std::size_t f = m.space.fields[i];
    if (f >= ds.schema.size() || ds.schema[f].name != m.field_names[i])
      throw DataError("dataset schema does not match the trained model (field " + m.field_names[i] + ")");
  }
}

// Probabilities for the given rows; labels are copied through, order
// preserved.
inline PredictionSet predict(const CtrModel& m, const Dataset& ds, const std::vector<std::size_t>& rows) {
  check_schema_compatible(m, ds);
  PredictionSet out;
  out.y.reserve(rows.size());
  out.p.reserve(rows.size());
  const auto& labels = ds.labels();
  if (m.spec.kind == ModelKind::mlp) {
    const std::size_t chunk = 8192;
    for (std::size_t start = 0; start < rows.size(); start += chunk) {
      const std::size_t cnt = std::min(chunk, rows.size() - start);
      nn::Matrix x(static_cast<Eigen::Index>(cnt), m.net.input_width());
      for (std::size_t i = 0; i < cnt; ++i)
        detail::mlp_fill_row(m, ds, rows[start + i], x, static_cast<Eigen::Index>(i));
      nn::Matrix logits = nn::forward(m.net, x);
      for (std::size_t i = 0; i < cnt; ++i) {
        out.y.push_back(labels[rows[start + i]]);
        out.p.push_back(nn::sigmoid(logits(static_cast<Eigen::Index>(i), 0)));
      }
    }
    return out;
  }
  for (std::size_t r : rows) {
    out.y.push_back(labels[r]);
    out.p.push_back(nn::sigmoid(score_row(m, ds, r)));
  }
  return out;
}

// Attach segment ids from one categorical field (for field-level
// calibration metrics).
inline void attach_segments(PredictionSet& preds, const Dataset& ds,
                            const std::vector<std::size_t>& rows, const std::string& field) {
  const auto fi = ds.field_index(field);
  if (!fi || ds.schema[*fi].kind != FieldKind::categorical || ds.columns[*fi].ids.empty())
    throw DataError("attach_segments: no encoded categorical field named " + field);
  preds.z.clear();
  preds.z.reserve(rows.size());
  for (std::size_t r : rows) preds.z.push_back(ds.columns[*fi].ids[r]);
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;          // 1-based
  double train_loss = 0;  // mean BCE over the epoch's batches
  double validation_auc = 0;
};

struct TrainedModel {
  CtrModel model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 1-based epoch whose parameters were returned
};

// Early-stopping policy: halt once the monitor has failed to improve (by
// more than `improvement_eps`) for `patience` consecutive epochs, and
// report the best epoch seen. Improvement resets the counter.
class EarlyStopTracker {
 public:
  EarlyStopTracker(int patience, double improvement_eps)
      : patience_(patience), eps_(improvement_eps) {}

  // Feed one epoch's monitor value; returns true when training must stop.
  bool update(double monitor) {
    ++epoch_;
    if (monitor > best_value_ + eps_) {
      best_value_ = monitor;
      best_epoch_ = epoch_;
      bad_epochs_ = 0;
      return false;
    }
    return ++bad_epochs_ >= patience_;
  }

  bool improved_last_epoch() const { return bad_epochs_ == 0 && epoch_ > 0; }
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }
  int epochs_seen() const { return epoch_; }

 private:
  int patience_;
  double eps_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int bad_epochs_ = 0;
  double best_value_ = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline CtrModel init_model(const ModelSpec& spec, const Dataset& ds, const FeatureSpace& space,
                           Rng& rng) {
  CtrModel m;
  m.spec = spec;
  m.space = space;
  for (std::size_t f : space.fields) m.field_names.push_back(ds.schema[f].name);
  m.w0 = 0;
  m.w = nn::Vector::Zero(space.total);
  if (spec.kind == ModelKind::fm) {
    m.v = nn::Matrix(space.total, spec.embedding_dim);
    const double scale = 0.01;
    for (Eigen::Index r = 0; r < m.v.rows(); ++r)
      for (Eigen::Index c = 0; c < m.v.cols(); ++c)
        m.v(r, c) = scale * (2.0 * uniform_double(rng) - 1.0);
  }
  if (spec.kind == ModelKind::poly2) m.pair_w = nn::Vector::Zero(spec.pair_hash_buckets);
  if (spec.kind == ModelKind::mlp) {
    const int k = spec.embedding_dim;
    for (std::size_t f : space.fields) {
      if (ds.schema[f].kind != FieldKind::categorical) continue;
      const int card = ds.schema[f].cardinality;
      nn::Matrix e(card, k);
      const double bound = std::sqrt(6.0 / static_cast<double>(card + k));
      for (Eigen::Index r = 0; r < e.rows(); ++r)
        for (Eigen::Index c = 0; c < e.cols(); ++c) e(r, c) = bound * (2.0 * uniform_double(rng) - 1.0);
      m.embed.push_back(std::move(e));
    }
    std::vector<int> sizes;
    sizes.push_back(mlp_input_width(ds, space, k));
    for (int h : spec.hidden_layers) sizes.push_back(h);
    sizes.push_back(1);
    m.net = nn::make_net(std::move(sizes), nn::Activation::relu, nn::Activation::identity,
                         spec.dropout, rng);
  }
  return m;
}

inline double bce_sample(double p, double y) {
  const double pc = std::clamp(p, 1e-7, 1.0 - 1e-7);
  return -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
}

// One epoch of mini-batch Adam for the sparse linear-family models.
// Gradients are accumulated densely per batch; Adam states live in the
// caller so moments persist across epochs.
struct SparseTrainState {
  nn::AdamState w0_state;  // 1x1
  nn::AdamStateVec w_state;
  nn::AdamState v_state;
  nn::AdamStateVec pair_state;
  nn::Matrix w0_mat = nn::Matrix::Zero(1, 1);
};

inline double sparse_epoch(CtrModel& m, const Dataset& ds, const std::vector<std::size_t>& order,
                           int batch_size, const nn::AdamConfig& adam, SparseTrainState& st) {
  const bool is_fm = m.spec.kind == ModelKind::fm;
  const bool is_poly2 = m.spec.kind == ModelKind::poly2;
  const int k = m.spec.embedding_dim;
  const auto& labels = ds.labels();

  nn::Vector gw = nn::Vector::Zero(m.space.total);
  nn::Matrix gv;
  if (is_fm) gv = nn::Matrix::Zero(m.space.total, k);
  nn::Vector gpair;
  if (is_poly2) gpair = nn::Vector::Zero(m.spec.pair_hash_buckets);
  std::vector<double> fm_sums(static_cast<std::size_t>(k));

  double loss_sum = 0;
  ActiveFeatures x;
  st.w0_mat(0, 0) = m.w0;

  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t cnt = std::min(order.size() - start, static_cast<std::size_t>(batch_size));
    const double inv_b = 1.0 / static_cast<double>(cnt);
    double gw0 = 0;
    gw.setZero();
    if (is_fm) gv.setZero();
    if (is_poly2) gpair.setZero();

    for (std::size_t bi = 0; bi < cnt; ++bi) {
      const std::size_t r = order[start + bi];
      m.space.encode(ds, r, x);
      double logit = m.w0;
      for (const auto& [i, xi] : x) logit += m.w[i] * xi;
      if (is_fm) {
        for (int d = 0; d < k; ++d) {
          double sum = 0, sum_sq = 0;
          for (const auto& [i, xi] : x) {
            const double t = m.v(i, d) * xi;
            sum += t;
            sum_sq += t * t;
          }
          fm_sums[static_cast<std::size_t>(d)] = sum;
          logit += 0.5 * (sum * sum - sum_sq);
        }
      } else if (is_poly2) {
        for (std::size_t a = 0; a < x.size(); ++a)
          for (std::size_t b = a + 1; b < x.size(); ++b)
            logit += m.pair_w[pair_bucket(x[a].first, x[b].first, m.spec.pair_hash_buckets)] *
                     x[a].second * x[b].second;
      }
      const double y = static_cast<double>(labels[r]);
      const double p = nn::sigmoid(logit);
      loss_sum += bce_sample(p, y);
      const double g = (p - y) * inv_b;

      gw0 += g;
      for (const auto& [i, xi] : x) gw[i] += g * xi;
      if (is_fm) {
        for (int d = 0; d < k; ++d) {
          const double sum = fm_sums[static_cast<std::size_t>(d)];
          for (const auto& [i, xi] : x) gv(i, d) += g * xi * (sum - m.v(i, d) * xi);
        }
      } else if (is_poly2) {
        for (std::size_t a = 0; a < x.size(); ++a)
          for (std::size_t b = a + 1; b < x.size(); ++b)
            gpair[pair_bucket(x[a].first, x[b].first, m.spec.pair_hash_buckets)] +=
                g * x[a].second * x[b].second;
      }
    }

    if (is_fm && m.spec.l2_embedding > 0) gv += 2.0 * m.spec.l2_embedding * m.v;

    nn::Matrix gw0_mat(1, 1);
    gw0_mat(0, 0) = gw0;
    nn::adam_step(st.w0_mat, gw0_mat, st.w0_state, adam);
    m.w0 = st.w0_mat(0, 0);
    nn::adam_step(m.w, gw, st.w_state, adam);
    if (is_fm) nn::adam_step(m.v, gv, st.v_state, adam);
    if (is_poly2) nn::adam_step(m.pair_w, gpair, st.pair_state, adam);
  }
  return loss_sum / static_cast<double>(order.size());
}

struct MlpTrainState {
  nn::NetAdam net_states;
  std::vector<nn::AdamState> embed_states;
};

inline double mlp_epoch(CtrModel& m, const Dataset& ds, const std::vector<std::size_t>& order,
                        int batch_size, const nn::AdamConfig& adam, MlpTrainState& st, Rng& rng) {
  if (st.embed_states.empty()) st.embed_states.resize(m.embed.size());
  const int k = m.spec.embedding_dim;
  const auto& labels = ds.labels();
  double loss_sum = 0;

  std::vector<nn::Matrix> gembed(m.embed.size());
  for (std::size_t t = 0; t < m.embed.size(); ++t)
    gembed[t] = nn::Matrix::Zero(m.embed[t].rows(), m.embed[t].cols());

  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t cnt = std::min(order.size() - start, static_cast<std::size_t>(batch_size));
    nn::Matrix x(static_cast<Eigen::Index>(cnt), m.net.input_width());
    nn::Matrix y(static_cast<Eigen::Index>(cnt), 1);
    for (std::size_t i = 0; i < cnt; ++i) {
      mlp_fill_row(m, ds, order[start + i], x, static_cast<Eigen::Index>(i));
      y(static_cast<Eigen::Index>(i), 0) = static_cast<double>(labels[order[start + i]]);
    }

    nn::ForwardCache cache;
    nn::Matrix logits = nn::forward(m.net, x, nn::Mode::train, &rng, &cache);
    nn::Matrix dlogit(logits.rows(), 1);
    const double inv_b = 1.0 / static_cast<double>(cnt);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double p = nn::sigmoid(logits(i, 0));
      loss_sum += bce_sample(p, y(i, 0));
      dlogit(i, 0) = (p - y(i, 0)) * inv_b;
    }

    nn::Gradients g = nn::backward(m.net, cache, dlogit);

    for (auto& ge : gembed) ge.setZero();
    for (std::size_t i = 0; i < cnt; ++i) {
      const std::size_t r = order[start + i];
      int pos = 0, table = 0;
      for (std::size_t f : m.space.fields) {
        if (ds.schema[f].kind == FieldKind::categorical) {
          const std::int32_t id = ds.columns[f].ids[r];
          gembed[static_cast<std::size_t>(table)].row(id) +=
              g.input.block(static_cast<Eigen::Index>(i), pos, 1, k);
          pos += k;
          ++table;
        } else {
          pos += 1;  // standardization constants are not trained
        }
      }
    }
    if (m.spec.l2_embedding > 0)
      for (std::size_t t = 0; t < m.embed.size(); ++t) gembed[t] += 2.0 * m.spec.l2_embedding * m.embed[t];

    st.net_states.step(m.net, g, adam);
    for (std::size_t t = 0; t < m.embed.size(); ++t)
      nn::adam_step(m.embed[t], gembed[t], st.embed_states[t], adam);
  }
  return loss_sum / static_cast<double>(order.size());
}

}  // namespace detail

// Train one model on the split's train rows, monitoring AUC-ROC on the
// validation rows after every epoch. Stops when the monitor fails to
// improve for `early_stop_patience` consecutive epochs (or at max_epochs)
// and returns the parameters of the best epoch seen. Deterministic given
// (spec, dataset, split, config, seed).
inline TrainedModel train_model(const ModelSpec& spec, const Dataset& ds, const SplitSpec& split,
                                const TrainConfig& cfg, std::uint64_t seed) {
  spec.validate();
  cfg.validate();
  if (split.train.empty() || split.validation.empty())
    throw DataError("train_model: train and validation sets must be nonempty");

  Rng rng(child_seed(seed, 0x7e41));
  const FeatureSpace space = FeatureSpace::build(ds, split.train);
  CtrModel model = detail::init_model(spec, ds, space, rng);

  nn::AdamConfig adam;
  adam.learning_rate = cfg.learning_rate;
  detail::SparseTrainState sparse_state;
  detail::MlpTrainState mlp_state;

  TrainedModel out;
  CtrModel best = model;
  EarlyStopTracker stopper(cfg.early_stop_patience, cfg.improvement_eps);
  std::vector<std::size_t> order = split.train;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    deterministic_shuffle(order, rng);
    const double train_loss =
        (spec.kind == ModelKind::mlp)
            ? detail::mlp_epoch(model, ds, order, cfg.batch_size, adam, mlp_state, rng)
            : detail::sparse_epoch(model, ds, order, cfg.batch_size, adam, sparse_state);

    const PredictionSet vp = predict(model, ds, split.validation);
    double auc = 0.5;
    try {
      auc = auc_roc(vp);
    } catch (const DataError&) {
      // single-class validation split; monitor stays at chance level
    }
    out.history.push_back({epoch, train_loss, auc});

    const bool stop = stopper.update(auc);
    if (stopper.improved_last_epoch()) best = model;
    if (stop) break;
  }
  out.best_epoch = stopper.best_epoch();
  out.model = std::move(best);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpointing (neural_core container with a kind tag)

inline void save_model(const CtrModel& m, const std::string& path) {
  nn::Checkpoint ck;
  ck.meta["model.kind"] = to_string(m.spec.kind);
  ck.meta["model.embedding_dim"] = std::to_string(m.spec.embedding_dim);
  ck.meta["model.pair_hash_buckets"] = std::to_string(m.spec.pair_hash_buckets);
  ck.meta["model.l2_embedding"] = format_double(m.spec.l2_embedding);
  ck.meta["model.dropout"] = format_double(m.spec.dropout);
  std::string hl;
  for (int h : m.spec.hidden_layers) hl += (hl.empty() ? "" : ",") + std::to_string(h);
  ck.meta["model.hidden_layers"] = hl;
  std::string names;
  for (const auto& n : m.field_names) names += (names.empty() ? "" : ",") + n;
  ck.meta["model.fields"] = names;

  nn::Matrix w0(1, 1);
  w0(0, 0) = m.w0;
  ck.add("w0", w0);
  ck.add("w", m.w);
  if (m.spec.kind == ModelKind::fm) ck.add("v", m.v);
  if (m.spec.kind == ModelKind::poly2) ck.add("pair_w", m.pair_w);
  if (m.spec.kind == ModelKind::mlp) {
    for (std::size_t t = 0; t < m.embed.size(); ++t) ck.add("embed" + std::to_string(t), m.embed[t]);
    nn::put_net(ck, "net", m.net);
  }

  // feature space
  nn::Matrix offsets(3, static_cast<Eigen::Index>(m.space.field_offset.size()));
  for (std::size_t f = 0; f < m.space.field_offset.size(); ++f) {
    offsets(0, static_cast<Eigen::Index>(f)) = m.space.field_offset[f];
    offsets(1, static_cast<Eigen::Index>(f)) = m.space.num_mean[f];
    offsets(2, static_cast<Eigen::Index>(f)) = m.space.num_scale[f];
  }
  ck.add("space.offsets", offsets);
  nn::Matrix fields(1, static_cast<Eigen::Index>(m.space.fields.size()));
  for (std::size_t i = 0; i < m.space.fields.size(); ++i)
    fields(0, static_cast<Eigen::Index>(i)) = static_cast<double>(m.space.fields[i]);
  ck.add("space.fields", fields);
  ck.meta["space.total"] = std::to_string(m.space.total);
  nn::save_checkpoint(ck, path);
}

inline CtrModel load_model(const std::string& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  CtrModel m;
  m.spec.kind = model_kind_from(ck.meta.at("model.kind"));
  m.spec.embedding_dim = static_cast<int>(std::stol(ck.meta.at("model.embedding_dim")));
  m.spec.pair_hash_buckets = static_cast<int>(std::stol(ck.meta.at("model.pair_hash_buckets")));
  bool ok = true;
  m.spec.l2_embedding = parse_double(ck.meta.at("model.l2_embedding"), ok);
  m.spec.dropout = parse_double(ck.meta.at("model.dropout"), ok);
  m.spec.hidden_layers.clear();
  {
    const std::string& hl = ck.meta.at("model.hidden_layers");
    std::size_t pos = 0;
    while (pos < hl.size()) {
      std::size_t comma = hl.find(',', pos);
      if (comma == std::string::npos) comma = hl.size();
      m.spec.hidden_layers.push_back(static_cast<int>(std::stol(hl.substr(pos, comma - pos))));
      pos = comma + 1;
    }
  }
  {
    const std::string& names = ck.meta.at("model.fields");
    std::size_t pos = 0;
    while (pos < names.size()) {
      std::size_t comma = names.find(',', pos);
      if (comma == std::string::npos) comma = names.size();
      m.field_names.push_back(names.substr(pos, comma - pos));
      pos = comma + 1;
    }
  }

  m.w0 = ck.get("w0")(0, 0);
  m.w = nn::Vector(ck.get("w"));
  if (m.spec.kind == ModelKind::fm) m.v = ck.get("v");
  if (m.spec.kind == ModelKind::poly2) m.pair_w = nn::Vector(ck.get("pair_w"));
  if (m.spec.kind == ModelKind::mlp) {
    for (std::size_t t = 0; ck.has("embed" + std::to_string(t)); ++t)
      m.embed.push_back(ck.get("embed" + std::to_string(t)));
    m.net = nn::get_net(ck, "net");
  }

  const nn::Matrix& offsets = ck.get("space.offsets");
  m.space.field_offset.resize(static_cast<std::size_t>(offsets.cols()));
  m.space.num_mean.resize(static_cast<std::size_t>(offsets.cols()));
  m.space.num_scale.resize(static_cast<std::size_t>(offsets.cols()));
  for (Eigen::Index f = 0; f < offsets.cols(); ++f) {
    m.space.field_offset[static_cast<std::size_t>(f)] = static_cast<int>(offsets(0, f));
    m.space.num_mean[static_cast<std::size_t>(f)] = offsets(1, f);
    m.space.num_scale[static_cast<std::size_t>(f)] = offsets(2, f);
  }
  const nn::Matrix& fields = ck.get("space.fields");
  for (Eigen::Index i = 0; i < fields.cols(); ++i)
    m.space.fields.push_back(static_cast<std::size_t>(fields(0, i)));
  m.space.total = static_cast<int>(std::stol(ck.meta.at("space.total")));
  return m;
}

}  // namespace benchctr
