#pragma once

// Core dataset representation shared by every other module: field schemas
// with vocabularies, columnar instance storage, splits and prediction sets.
//
// Datasets are immutable once built (single writer, then shared freely by
// concurrent readers). Storage is columnar; row order is the order of
// ingestion or generation and never changes.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "benchctr/common.hpp"

namespace benchctr {

enum class FieldKind { numeric, categorical, temporal, label };

inline const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::numeric: return "numeric";
    case FieldKind::categorical: return "categorical";
    case FieldKind::temporal: return "temporal";
    case FieldKind::label: return "label";
  }
  return "?";
}

inline FieldKind field_kind_from(const std::string& s) {
  if (s == "numeric") return FieldKind::numeric;
  if (s == "categorical") return FieldKind::categorical;
  if (s == "temporal") return FieldKind::temporal;
  if (s == "label") return FieldKind::label;
  throw DataError("unknown field kind: " + s);
}

// Token used when a categorical cell with id == oov_id has to be rendered
// back to text (CSV export). Parsing it maps back to oov_id because it is
// never a member of any vocabulary.
inline constexpr const char* kOovToken = "<oov>";

struct FieldSchema {
  std::string name;
  FieldKind kind = FieldKind::categorical;
  // token -> id, categorical fields only. Empty until built; ids are
  // 0..n-1 with oov_id == n, so cardinality == n + 1.
  std::map<std::string, std::int32_t> vocabulary;
  std::int32_t oov_id = -1;
  std::int32_t cardinality = 0;  // count of ids including OOV

  bool has_vocab() const { return oov_id >= 0; }

  // Token -> id under this vocabulary; unseen tokens collapse to OOV.
  std::int32_t encode(const std::string& token) const {
    auto it = vocabulary.find(token);
    return it == vocabulary.end() ? oov_id : it->second;
  }

  // Id -> token (OOV and out-of-range ids render as the reserved token).
  std::string decode(std::int32_t id) const {
    for (const auto& [tok, i] : vocabulary)
      if (i == id) return tok;
    return kOovToken;
  }
};

// A single cell: numeric scalar, categorical id, epoch-seconds timestamp,
// or raw (not yet encoded) token.
using Value = std::variant<double, std::int32_t, std::int64_t, std::string>;

// One materialized row. `values` has one entry per non-label field, in
// schema order.
struct Instance {
  std::vector<Value> values;
  std::int32_t label = 0;
};

// Columnar storage for one field. Exactly one of the payload vectors is
// active, depending on the field kind and (for categoricals) whether the
// column has been encoded against a vocabulary yet. `missing` is nonempty
// only while un-imputed cells exist.
struct Column {
  std::vector<double> numeric;        // FieldKind::numeric
  std::vector<std::string> tokens;    // categorical, raw
  std::vector<std::int32_t> ids;      // categorical encoded; label column
  std::vector<std::int64_t> stamps;   // temporal, epoch seconds UTC
  std::vector<std::uint8_t> missing;

  std::size_t size() const {
    if (!numeric.empty()) return numeric.size();
    if (!tokens.empty()) return tokens.size();
    if (!ids.empty()) return ids.size();
    if (!stamps.empty()) return stamps.size();
    return 0;
  }

  bool is_missing(std::size_t row) const {
    return row < missing.size() && missing[row] != 0;
  }
};

struct Dataset {
  std::vector<FieldSchema> schema;
  std::vector<Column> columns;  // parallel to schema
  std::string provenance;       // file path or generator config hash

  std::size_t rows() const {
    for (const auto& c : columns)
      if (c.size() > 0) return c.size();
    return 0;
  }

  std::size_t num_fields() const { return schema.size(); }

  std::optional<std::size_t> field_index(const std::string& name) const {
    for (std::size_t i = 0; i < schema.size(); ++i)
      if (schema[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t label_index() const {
    for (std::size_t i = 0; i < schema.size(); ++i)
      if (schema[i].kind == FieldKind::label) return i;
    throw DataError("dataset has no label field");
  }

  const std::vector<std::int32_t>& labels() const {
    return columns[label_index()].ids;
  }

  std::int32_t label(std::size_t row) const { return labels()[row]; }

  Instance row(std::size_t r) const {
    Instance inst;
    inst.values.reserve(schema.size() - 1);
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const Column& c = columns[f];
      switch (schema[f].kind) {
        case FieldKind::numeric: inst.values.emplace_back(c.numeric[r]); break;
        case FieldKind::categorical:
          if (!c.ids.empty()) inst.values.emplace_back(c.ids[r]);
          else inst.values.emplace_back(c.tokens[r]);
          break;
        case FieldKind::temporal: inst.values.emplace_back(c.stamps[r]); break;
        case FieldKind::label: inst.label = c.ids[r]; break;
      }
    }
    return inst;
  }
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string field;
  std::int64_t row = -1;  // -1 for schema-level violations
  std::string rule;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Checks every Dataset invariant. Violations are data, not failures: a
// malformed dataset yields a report, never a throw.
inline ValidationReport validate_dataset(const Dataset& ds) {
  ValidationReport rep;
  auto add = [&](const std::string& field, std::int64_t row, const std::string& rule) {
    rep.violations.push_back({field, row, rule});
  };

  // Schema-level rules.
  int label_fields = 0;
  for (std::size_t i = 0; i < ds.schema.size(); ++i) {
    const FieldSchema& fs = ds.schema[i];
    if (fs.kind == FieldKind::label) ++label_fields;
    for (std::size_t j = i + 1; j < ds.schema.size(); ++j)
      if (ds.schema[j].name == fs.name) add(fs.name, -1, "field names unique");
    if (fs.has_vocab()) {
      if (fs.oov_id >= fs.cardinality) add(fs.name, -1, "oov_id<cardinality");
      for (const auto& [tok, id] : fs.vocabulary)
        if (id < 0 || id >= fs.cardinality) add(fs.name, -1, "vocab id in [0,cardinality)");
    }
  }
  if (label_fields != 1) add("", -1, "exactly one label field");
  if (ds.columns.size() != ds.schema.size()) {
    add("", -1, "one column per field");
    return rep;
  }

  // Column-level rules.
  const std::size_t n = ds.rows();
  for (std::size_t f = 0; f < ds.schema.size(); ++f) {
    const FieldSchema& fs = ds.schema[f];
    const Column& c = ds.columns[f];
    if (c.size() != n) {
      add(fs.name, -1, "column length matches dataset rows");
      continue;
    }
    switch (fs.kind) {
      case FieldKind::numeric:
        if (c.numeric.size() != n) add(fs.name, -1, "numeric storage for numeric field");
        break;
      case FieldKind::temporal:
        if (c.stamps.size() != n) add(fs.name, -1, "timestamp storage for temporal field");
        break;
      case FieldKind::categorical:
        if (c.ids.empty() && c.tokens.empty())
          add(fs.name, -1, "token or id storage for categorical field");
        if (!c.ids.empty() && fs.has_vocab()) {
          for (std::size_t r = 0; r < n; ++r)
            if (c.ids[r] < 0 || c.ids[r] >= fs.cardinality)
              add(fs.name, static_cast<std::int64_t>(r), "id<cardinality");
        }
        break;
      case FieldKind::label:
        if (c.ids.size() != n) {
          add(fs.name, -1, "integer storage for label field");
        } else {
          for (std::size_t r = 0; r < n; ++r)
            if (c.ids[r] != 0 && c.ids[r] != 1)
              add(fs.name, static_cast<std::int64_t>(r), "label\xe2\x88\x88{0,1}");
        }
        break;
    }
  }
  return rep;
}

// Fraction of positive labels. Errors on an empty dataset.
inline double positive_rate(const Dataset& ds) {
  const std::size_t n = ds.rows();
  if (n == 0) throw DataError("positive_rate: empty dataset");
  const auto& y = ds.labels();
  std::int64_t sum = 0;
  for (std::int32_t v : y) sum += v;
  return static_cast<double>(sum) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Pairwise disjointness and bounds check; `require_nonempty` is the
// supervised-use rule (k-fold specs legitimately have an empty test set).
inline void validate_split(const SplitSpec& s, std::size_t n_rows, bool require_nonempty = true) {
  std::vector<std::uint8_t> seen(n_rows, 0);
  auto absorb = [&](const std::vector<std::size_t>& part, const char* name) {
    for (std::size_t i : part) {
      if (i >= n_rows) throw DataError(std::string("split index out of range in ") + name);
      if (seen[i]) throw DataError(std::string("split sets not disjoint at index ") + std::to_string(i));
      seen[i] = 1;
    }
  };
  absorb(s.train, "train");
  absorb(s.validation, "validation");
  absorb(s.test, "test");
  if (require_nonempty && (s.train.empty() || s.validation.empty() || s.test.empty()))
    throw DataError("split has an empty part");
}

// ---------------------------------------------------------------------------
// Predictions

// Paired ground truth and predicted probabilities; the input to every
// metric. `z` optionally carries segment ids for field-level calibration.
struct PredictionSet {
  std::vector<std::int32_t> y;
  std::vector<double> p;
  std::vector<std::int32_t> z;

  std::size_t size() const { return y.size(); }
  bool has_segments() const { return !z.empty(); }

  void check() const {
    if (p.size() != y.size()) throw DataError("PredictionSet: len(y) != len(p)");
    if (!z.empty() && z.size() != y.size()) throw DataError("PredictionSet: len(z) != len(y)");
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] != 0 && y[i] != 1) throw DataError("PredictionSet: label not in {0,1}");
      if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw DataError("PredictionSet: p outside [0,1]");
    }
  }
};

}  // namespace benchctr
