#pragma once

// Ingestion and preparation: delimited-text loading, missing-value
// imputation, vocabulary building with OOV folding, log-square binning,
// temporal feature extraction and split construction. Also owns the file
// formats around Dataset: schema config JSON, CSV export and the exact
// columnar binary cache.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "benchctr/data.hpp"

namespace benchctr {

struct PrepPolicy {
  double numeric_missing_fill = 0.0;
  std::string categorical_missing_token = "unknown";
  std::int64_t oov_min_freq = 10;
  double bin_threshold = 2.0;

  void validate() const {
    if (oov_min_freq < 1) throw DataError("PrepPolicy: oov_min_freq must be >= 1");
    if (bin_threshold < 1) throw DataError("PrepPolicy: bin_threshold must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Delimited loading

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == delim) {
      std::string cell = line.substr(start, i - start);
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      cells.push_back(std::move(cell));
      start = i + 1;
    }
  }
  return cells;
}

}  // namespace detail

// Load a delimited UTF-8 file with a header row. Header names must match
// the schema names (any order). Empty cells are flagged missing for
// impute_missing; categorical cells stay raw tokens until build_vocab.
// Labels must be integral; fractional labels are rejected here
// (out-of-range integers are left for validate_dataset to flag).
inline Dataset load_delimited(const std::string& path, const std::vector<FieldSchema>& schema,
                              char delimiter = ',') {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);

  std::string header;
  if (!std::getline(in, header)) throw DataError("empty file: " + path);
  const std::vector<std::string> names = detail::split_line(header, delimiter);

  // column position in file -> field index in schema
  std::vector<std::size_t> field_of_col(names.size());
  std::vector<bool> seen(schema.size(), false);
  for (std::size_t c = 0; c < names.size(); ++c) {
    bool found = false;
    for (std::size_t f = 0; f < schema.size(); ++f) {
      if (schema[f].name == names[c]) {
        if (seen[f]) throw DataError("duplicate header column: " + names[c]);
        field_of_col[c] = f;
        seen[f] = true;
        found = true;
        break;
      }
    }
    if (!found) throw DataError("header column not in schema: " + names[c]);
  }
  for (std::size_t f = 0; f < schema.size(); ++f)
    if (!seen[f]) throw DataError("schema field missing from header: " + schema[f].name);

  Dataset ds;
  ds.schema = schema;
  ds.columns.resize(schema.size());
  ds.provenance = path;

  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const std::vector<std::string> cells = detail::split_line(line, delimiter);
    if (cells.size() != names.size())
      throw DataError("arity mismatch at row " + std::to_string(row + 1) + ": expected " +
                      std::to_string(names.size()) + " cells, got " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::size_t f = field_of_col[c];
      const FieldSchema& fs = schema[f];
      Column& col = ds.columns[f];
      const std::string& cell = cells[c];
      const bool is_missing = cell.empty();
      bool ok = true;
      switch (fs.kind) {
        case FieldKind::numeric: {
          double v = is_missing ? 0.0 : parse_double(cell, ok);
          if (!ok) throw DataError("bad numeric cell '" + cell + "' at row " + std::to_string(row + 1) +
                                   ", field " + fs.name);
          col.numeric.push_back(v);
          break;
        }
        case FieldKind::temporal: {
          std::int64_t v = is_missing ? 0 : parse_int(cell, ok);
          if (!ok) throw DataError("bad timestamp cell '" + cell + "' at row " + std::to_string(row + 1) +
                                   ", field " + fs.name);
          col.stamps.push_back(v);
          break;
        }
        case FieldKind::categorical: {
          if (fs.has_vocab()) col.ids.push_back(is_missing ? fs.oov_id : fs.encode(cell));
          else col.tokens.push_back(cell);
          break;
        }
        case FieldKind::label: {
          if (is_missing) throw DataError("missing label at row " + std::to_string(row + 1));
          double v = parse_double(cell, ok);
          if (!ok || v != std::floor(v))
            throw DataError("label must be an integer at row " + std::to_string(row + 1) + ", got '" + cell + "'");
          col.ids.push_back(static_cast<std::int32_t>(v));
          break;
        }
      }
      if (is_missing && fs.kind != FieldKind::label) {
        if (col.missing.size() < row + 1) col.missing.resize(row + 1, 0);
        col.missing[row] = 1;
      }
    }
    ++row;
  }
  // Pad missing masks to full column length.
  for (Column& col : ds.columns)
    if (!col.missing.empty()) col.missing.resize(row, 0);
  return ds;
}

// ---------------------------------------------------------------------------
// Imputation

// Replace every missing cell: numerics with the policy fill, categoricals
// with the missing token (which then participates in vocabulary building).
// Idempotent; output has no missing flags left.
inline Dataset impute_missing(const Dataset& ds, const PrepPolicy& policy = {}) {
  policy.validate();
  Dataset out = ds;
  for (std::size_t f = 0; f < out.schema.size(); ++f) {
    Column& col = out.columns[f];
    if (col.missing.empty()) continue;
    for (std::size_t r = 0; r < col.missing.size(); ++r) {
      if (!col.missing[r]) continue;
      switch (out.schema[f].kind) {
        case FieldKind::numeric: col.numeric[r] = policy.numeric_missing_fill; break;
        case FieldKind::categorical:
          if (!col.tokens.empty()) col.tokens[r] = policy.categorical_missing_token;
          // already-encoded columns were mapped to OOV at load time
          break;
        case FieldKind::temporal: col.stamps[r] = 0; break;
        case FieldKind::label: break;  // labels are never missing past load
      }
    }
    col.missing.clear();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary building

// Build vocabularies for every categorical field still in raw-token state.
// Tokens with frequency >= min_freq get ids 0..n-1 in descending frequency
// order, ties broken lexicographically so assignment is platform
// independent; everything rarer folds into oov_id == n. Fields that already
// carry a vocabulary are returned unchanged.
inline std::vector<FieldSchema> build_vocab(const Dataset& ds, std::int64_t min_freq) {
  if (min_freq < 1) throw DataError("build_vocab: min_freq must be >= 1");
  std::vector<FieldSchema> out = ds.schema;
  for (std::size_t f = 0; f < out.size(); ++f) {
    FieldSchema& fs = out[f];
    if (fs.kind != FieldKind::categorical || fs.has_vocab()) continue;
    const Column& col = ds.columns[f];
    if (col.tokens.empty() && !col.ids.empty())
      throw DataError("build_vocab: field " + fs.name + " is encoded but has no vocabulary");

    std::unordered_map<std::string, std::int64_t> freq;
    for (const std::string& tok : col.tokens) ++freq[tok];

    std::vector<std::pair<std::string, std::int64_t>> kept;
    kept.reserve(freq.size());
    for (auto& [tok, n] : freq)
      if (n >= min_freq) kept.emplace_back(tok, n);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });

    fs.vocabulary.clear();
    for (std::size_t i = 0; i < kept.size(); ++i)
      fs.vocabulary[kept[i].first] = static_cast<std::int32_t>(i);
    fs.oov_id = static_cast<std::int32_t>(kept.size());
    fs.cardinality = fs.oov_id + 1;
  }
  return out;
}

// Encode raw-token categorical columns against the given schemas. Tokens
// absent from a vocabulary (including never-seen ones) map to oov_id.
// With strict == false, fields without a vocabulary stay raw.
inline Dataset encode_with_vocab(const Dataset& ds, const std::vector<FieldSchema>& schema,
                                 bool strict = true) {
  if (schema.size() != ds.schema.size()) throw DataError("encode_with_vocab: schema size mismatch");
  Dataset out = ds;
  out.schema = schema;
  for (std::size_t f = 0; f < out.schema.size(); ++f) {
    const FieldSchema& fs = out.schema[f];
    Column& col = out.columns[f];
    if (fs.kind != FieldKind::categorical || col.tokens.empty()) continue;
    if (!fs.has_vocab()) {
      if (strict) throw DataError("encode_with_vocab: no vocabulary for field " + fs.name);
      continue;
    }
    col.ids.resize(col.tokens.size());
    for (std::size_t r = 0; r < col.tokens.size(); ++r) col.ids[r] = fs.encode(col.tokens[r]);
    col.tokens.clear();
    col.tokens.shrink_to_fit();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Numeric binning and temporal features

// Log-square binning: floor((ln x)^2) above the threshold (strictly),
// floor(x) in [0, threshold], and the dedicated bucket -1 for negatives.
inline std::int64_t bin_numeric(double x, double threshold) {
  if (!std::isfinite(x)) throw DataError("bin_numeric: non-finite value");
  if (x < 0) return -1;
  if (x > threshold) {
    const double l = std::log(x);
    return static_cast<std::int64_t>(std::floor(l * l));
  }
  return static_cast<std::int64_t>(std::floor(x));
}

struct TemporalFeatures {
  std::int32_t hour_of_day = 0;   // [0,24)
  std::int32_t day_of_week = 0;   // [0,7), Monday = 0
  std::int32_t is_weekend = 0;    // 1 iff day_of_week in {5,6}
};

// UTC calendar features from epoch seconds. Day 0 (1970-01-01) was a
// Thursday, which is 3 under Monday = 0.
inline TemporalFeatures extract_temporal(std::int64_t epoch_seconds) {
  if (epoch_seconds < 0) throw DataError("extract_temporal: negative timestamp");
  TemporalFeatures t;
  const std::int64_t days = epoch_seconds / 86400;
  const std::int64_t secs = epoch_seconds % 86400;
  t.hour_of_day = static_cast<std::int32_t>(secs / 3600);
  t.day_of_week = static_cast<std::int32_t>((days + 3) % 7);
  t.is_weekend = (t.day_of_week >= 5) ? 1 : 0;
  return t;
}

// ---------------------------------------------------------------------------
// Splits

enum class SplitMode { random, chronological };

// Hold-out split. Random mode: seeded uniform shuffle, then contiguous cut.
// Chronological: stable sort by time_field ascending (earliest rows go to
// train). Validation/test sizes are floor-allocated; the remainder goes to
// train.
inline SplitSpec split_holdout(const Dataset& ds, double train_ratio, double valid_ratio,
                               double test_ratio, SplitMode mode, std::uint64_t seed,
                               const std::string& time_field = "") {
  const std::size_t n = ds.rows();
  if (n < 3) throw DataError("split_holdout: dataset smaller than 3 rows");
  if (train_ratio <= 0 || valid_ratio <= 0 || test_ratio <= 0)
    throw DataError("split_holdout: ratios must be positive");
  if (std::abs(train_ratio + valid_ratio + test_ratio - 1.0) > 1e-9)
    throw DataError("split_holdout: ratios must sum to 1");

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;

  if (mode == SplitMode::random) {
    Rng rng(seed);
    deterministic_shuffle(idx, rng);
  } else {
    if (time_field.empty()) throw DataError("split_holdout: chronological mode requires time_field");
    const auto fi = ds.field_index(time_field);
    if (!fi) throw DataError("split_holdout: unknown time_field " + time_field);
    const FieldSchema& fs = ds.schema[*fi];
    const Column& col = ds.columns[*fi];
    if (fs.kind == FieldKind::temporal) {
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return col.stamps[a] < col.stamps[b]; });
    } else if (fs.kind == FieldKind::numeric) {
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return col.numeric[a] < col.numeric[b]; });
    } else {
      throw DataError("split_holdout: time_field must be temporal or numeric");
    }
  }

  const std::size_t n_valid = static_cast<std::size_t>(std::floor(valid_ratio * static_cast<double>(n)));
  const std::size_t n_test = static_cast<std::size_t>(std::floor(test_ratio * static_cast<double>(n)));
  const std::size_t n_train = n - n_valid - n_test;

  SplitSpec s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                      idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), idx.end());
  return s;
}

// k-fold partition: each fold serves once as the validation set and the
// remaining folds as train; there is no test set. Fold sizes differ by at
// most one (the first n%k folds take the extra row).
inline std::vector<SplitSpec> split_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  const std::size_t n = ds.rows();
  if (k < 2 || k > n) throw DataError("split_kfold: need 2 <= k <= N");
  Rng rng(seed);
  std::vector<std::size_t> idx = shuffled_indices(n, rng);

  std::vector<SplitSpec> folds(k);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  std::vector<std::vector<std::size_t>> parts(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t sz = base + (i < extra ? 1 : 0);
    parts[i].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                    idx.begin() + static_cast<std::ptrdiff_t>(pos + sz));
    pos += sz;
  }
  for (std::size_t i = 0; i < k; ++i) {
    folds[i].validation = parts[i];
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) folds[i].train.insert(folds[i].train.end(), parts[j].begin(), parts[j].end());
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Prepared-feature pipeline steps used by the CLI

// Expand every temporal field into three categorical fields
// (<name>_hour, <name>_dow, <name>_weekend) with fixed vocabularies. The
// original timestamp column is kept for chronological splitting; models
// ignore temporal fields.
inline Dataset expand_temporal(const Dataset& ds) {
  Dataset out = ds;
  const std::size_t n = ds.rows();
  for (std::size_t f = 0; f < ds.schema.size(); ++f) {
    if (ds.schema[f].kind != FieldKind::temporal) continue;
    const Column& src = ds.columns[f];
    auto make_field = [&](const std::string& suffix, std::int32_t card) {
      FieldSchema fs;
      fs.name = ds.schema[f].name + suffix;
      fs.kind = FieldKind::categorical;
      for (std::int32_t v = 0; v < card; ++v) fs.vocabulary[std::to_string(v)] = v;
      fs.oov_id = card;
      fs.cardinality = card + 1;
      return fs;
    };
    FieldSchema hour = make_field("_hour", 24), dow = make_field("_dow", 7), wknd = make_field("_weekend", 2);
    Column ch, cd, cw;
    ch.ids.resize(n);
    cd.ids.resize(n);
    cw.ids.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      const TemporalFeatures t = extract_temporal(src.stamps[r]);
      ch.ids[r] = t.hour_of_day;
      cd.ids[r] = t.day_of_week;
      cw.ids[r] = t.is_weekend;
    }
    out.schema.push_back(std::move(hour));
    out.columns.push_back(std::move(ch));
    out.schema.push_back(std::move(dow));
    out.columns.push_back(std::move(cd));
    out.schema.push_back(std::move(wknd));
    out.columns.push_back(std::move(cw));
  }
  return out;
}

// Replace every numeric field with a raw-token categorical field of bucket
// ids (build_vocab assigns the actual ids afterwards; the -1 bucket for
// negatives becomes an ordinary vocabulary entry).
inline Dataset bin_numeric_fields(const Dataset& ds, double threshold) {
  Dataset out = ds;
  const std::size_t n = ds.rows();
  for (std::size_t f = 0; f < out.schema.size(); ++f) {
    if (out.schema[f].kind != FieldKind::numeric) continue;
    Column binned;
    binned.tokens.resize(n);
    for (std::size_t r = 0; r < n; ++r)
      binned.tokens[r] = std::to_string(bin_numeric(out.columns[f].numeric[r], threshold));
    out.schema[f].kind = FieldKind::categorical;
    out.schema[f].vocabulary.clear();
    out.schema[f].oov_id = -1;
    out.schema[f].cardinality = 0;
    out.columns[f] = std::move(binned);
  }
  return out;
}

inline nlohmann::json split_to_json(const SplitSpec& s) {
  nlohmann::json j;
  j["train"] = s.train;
  j["validation"] = s.validation;
  j["test"] = s.test;
  return j;
}

inline SplitSpec split_from_json(const nlohmann::json& j) {
  SplitSpec s;
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.validation = j.at("validation").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  return s;
}

// ---------------------------------------------------------------------------
// Schema config JSON

inline std::vector<FieldSchema> schema_from_json(const nlohmann::json& j) {
  if (!j.contains("fields") || !j["fields"].is_array())
    throw DataError("schema config: missing 'fields' array");
  std::vector<FieldSchema> schema;
  for (const auto& jf : j["fields"]) {
    FieldSchema fs;
    fs.name = jf.at("name").get<std::string>();
    fs.kind = field_kind_from(jf.at("kind").get<std::string>());
    if (jf.contains("vocabulary")) {
      for (const auto& [tok, id] : jf["vocabulary"].items())
        fs.vocabulary[tok] = id.get<std::int32_t>();
      fs.oov_id = jf.at("oov_id").get<std::int32_t>();
      fs.cardinality = jf.at("cardinality").get<std::int32_t>();
    }
    schema.push_back(std::move(fs));
  }
  return schema;
}

inline nlohmann::json schema_to_json(const std::vector<FieldSchema>& schema) {
  nlohmann::json j;
  j["fields"] = nlohmann::json::array();
  for (const FieldSchema& fs : schema) {
    nlohmann::json jf;
    jf["name"] = fs.name;
    jf["kind"] = to_string(fs.kind);
    if (fs.has_vocab()) {
      nlohmann::json vocab = nlohmann::json::object();
      for (const auto& [tok, id] : fs.vocabulary) vocab[tok] = id;
      jf["vocabulary"] = std::move(vocab);
      jf["oov_id"] = fs.oov_id;
      jf["cardinality"] = fs.cardinality;
    }
    j["fields"].push_back(std::move(jf));
  }
  return j;
}

inline std::vector<FieldSchema> load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("schema config " + path + ": " + e.what());
  }
  return schema_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV export

// Write a Dataset back to delimited text. Encoded categorical cells render
// as their vocabulary tokens (OOV ids as the reserved token), numerics in
// shortest round-trip form, so load_delimited + encode_with_vocab on the
// same schema reproduces the dataset exactly.
inline void write_csv(const Dataset& ds, const std::string& path, char delimiter = ',') {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open file for writing: " + path);
  const std::size_t n = ds.rows(), nf = ds.schema.size();

  // Reverse vocabularies once; FieldSchema::decode is linear per call.
  std::vector<std::vector<const std::string*>> rev(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    if (ds.schema[f].kind == FieldKind::categorical && ds.schema[f].has_vocab()) {
      rev[f].assign(static_cast<std::size_t>(ds.schema[f].cardinality), nullptr);
      for (const auto& [tok, id] : ds.schema[f].vocabulary) rev[f][static_cast<std::size_t>(id)] = &tok;
    }
  }

  for (std::size_t f = 0; f < nf; ++f) {
    if (f) out << delimiter;
    out << ds.schema[f].name;
  }
  out << '\n';
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < nf; ++f) {
      if (f) out << delimiter;
      const Column& col = ds.columns[f];
      if (col.is_missing(r)) continue;  // empty cell = missing
      switch (ds.schema[f].kind) {
        case FieldKind::numeric: out << format_double(col.numeric[r]); break;
        case FieldKind::temporal: out << col.stamps[r]; break;
        case FieldKind::label: out << col.ids[r]; break;
        case FieldKind::categorical:
          if (!col.ids.empty()) {
            const std::int32_t id = col.ids[r];
            const std::string* tok =
                (id >= 0 && id < static_cast<std::int32_t>(rev[f].size())) ? rev[f][static_cast<std::size_t>(id)] : nullptr;
            out << (tok ? *tok : std::string(kOovToken));
          } else {
            out << col.tokens[r];
          }
          break;
      }
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Columnar binary cache (exact round-trip)

namespace detail {

inline void put_u64(std::ofstream& o, std::uint64_t v) { o.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_str(std::ofstream& o, const std::string& s) {
  put_u64(o, s.size());
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}
template <typename T>
void put_vec(std::ofstream& o, const std::vector<T>& v) {
  put_u64(o, v.size());
  o.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}
inline void put_str_vec(std::ofstream& o, const std::vector<std::string>& v) {
  put_u64(o, v.size());
  for (const auto& s : v) put_str(o, s);
}

inline std::uint64_t get_u64(std::ifstream& i) {
  std::uint64_t v = 0;
  i.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
inline std::string get_str(std::ifstream& i) {
  std::string s(get_u64(i), '\0');
  i.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}
template <typename T>
std::vector<T> get_vec(std::ifstream& i) {
  std::vector<T> v(get_u64(i));
  i.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  return v;
}
inline std::vector<std::string> get_str_vec(std::ifstream& i) {
  std::vector<std::string> v(get_u64(i));
  for (auto& s : v) s = get_str(i);
  return v;
}

inline constexpr std::uint64_t kCacheMagic = 0x42435452434831ULL;  // "BCTRCH1"

}  // namespace detail

inline void save_dataset_binary(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open cache file for writing: " + path);
  using namespace detail;
  put_u64(out, kCacheMagic);
  put_str(out, ds.provenance);
  put_u64(out, ds.schema.size());
  for (std::size_t f = 0; f < ds.schema.size(); ++f) {
    const FieldSchema& fs = ds.schema[f];
    put_str(out, fs.name);
    put_u64(out, static_cast<std::uint64_t>(fs.kind));
    put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(fs.oov_id)));
    put_u64(out, static_cast<std::uint64_t>(fs.cardinality));
    put_u64(out, fs.vocabulary.size());
    for (const auto& [tok, id] : fs.vocabulary) {
      put_str(out, tok);
      put_u64(out, static_cast<std::uint64_t>(id));
    }
    const Column& c = ds.columns[f];
    put_vec(out, c.numeric);
    put_str_vec(out, c.tokens);
    put_vec(out, c.ids);
    put_vec(out, c.stamps);
    put_vec(out, c.missing);
  }
  if (!out) throw DataError("write failed: " + path);
}

inline Dataset load_dataset_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cache file: " + path);
  using namespace detail;
  if (get_u64(in) != kCacheMagic) throw DataError("not a dataset cache file: " + path);
  Dataset ds;
  ds.provenance = get_str(in);
  const std::uint64_t nf = get_u64(in);
  ds.schema.resize(nf);
  ds.columns.resize(nf);
  for (std::uint64_t f = 0; f < nf; ++f) {
    FieldSchema& fs = ds.schema[f];
    fs.name = get_str(in);
    fs.kind = static_cast<FieldKind>(get_u64(in));
    fs.oov_id = static_cast<std::int32_t>(static_cast<std::int64_t>(get_u64(in)));
    fs.cardinality = static_cast<std::int32_t>(get_u64(in));
    const std::uint64_t nv = get_u64(in);
    for (std::uint64_t i = 0; i < nv; ++i) {
      std::string tok = get_str(in);
      fs.vocabulary[tok] = static_cast<std::int32_t>(get_u64(in));
    }
    Column& c = ds.columns[f];
    c.numeric = get_vec<double>(in);
    c.tokens = get_str_vec(in);
    c.ids = get_vec<std::int32_t>(in);
    c.stamps = get_vec<std::int64_t>(in);
    c.missing = get_vec<std::uint8_t>(in);
  }
  if (!in) throw DataError("truncated cache file: " + path);
  return ds;
}

// Load a dataset from either a binary cache (.bin) or CSV + schema file.
inline Dataset load_dataset_any(const std::string& path, const std::string& schema_path = "",
                                char delimiter = ',') {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".bin") return load_dataset_binary(path);
  if (schema_path.empty()) throw DataError("loading " + path + " requires a schema file");
  Dataset ds = load_delimited(path, load_schema(schema_path), delimiter);
  // Encode any raw-token fields whose schema carries a vocabulary.
  return encode_with_vocab(ds, ds.schema, /*strict=*/false);
}

}  // namespace benchctr
