#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dar/common.hpp"
#include "dar/corpus.hpp"
#include "dar/graph.hpp"
#include "dar/optim.hpp"

namespace dar {

// ---- external vector formats ----

struct PretrainedTable {
  std::unordered_map<std::string, std::vector<Scalar>> vectors;
  std::size_t dim = 0;
};

// Parses "word v1 ... vd" lines; an optional first line "count dim" (two
// numeric fields) is treated as a header. Duplicate words: first wins.
inline PretrainedTable load_pretrained_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open embedding file: " + path);
  PretrainedTable table;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string word;
    is >> word;
    std::vector<Scalar> vals;
    Scalar v;
    while (is >> v) vals.push_back(v);
    if (first) {
      first = false;
      // header: "count dim" — word parses as a number and exactly one value
      char* end = nullptr;
      std::strtod(word.c_str(), &end);
      if (end && *end == '\0' && vals.size() == 1) continue;
    }
    if (vals.empty()) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": no vector values");
    }
    if (table.dim == 0) {
      table.dim = vals.size();
    } else if (vals.size() != table.dim) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": dimensionality " + std::to_string(vals.size()) +
                        " differs from " + std::to_string(table.dim));
    }
    table.vectors.emplace(word, std::move(vals));  // first occurrence wins
  }
  return table;
}

// (dialog_id, segment index) -> per-token vector matrix, produced by an
// external contextualized-embedding model.
class ContextualStore {
 public:
  using Key = std::pair<std::string, std::size_t>;

  void insert(const std::string& dialog_id, std::size_t index, Tensor matrix) {
    if (matrix.rank() != 2 || matrix.rows() == 0) {
      throw FormatError("contextual record (" + dialog_id + ", " +
                        std::to_string(index) + ") must be a non-empty matrix");
    }
    if (dim_ == 0) {
      dim_ = matrix.cols();
    } else if (matrix.cols() != dim_) {
      throw FormatError("contextual record (" + dialog_id + ", " +
                        std::to_string(index) + ") has dim " +
                        std::to_string(matrix.cols()) + ", expected " +
                        std::to_string(dim_));
    }
    auto key = Key{dialog_id, index};
    if (store_.count(key)) {
      throw FormatError("duplicate contextual record (" + dialog_id + ", " +
                        std::to_string(index) + ")");
    }
    store_.emplace(std::move(key), std::move(matrix));
  }

  const Tensor& get(const std::string& dialog_id, std::size_t index) const {
    auto it = store_.find({dialog_id, index});
    if (it == store_.end()) {
      throw LookupError("no contextual vectors for (" + dialog_id + ", " +
                        std::to_string(index) + ")");
    }
    return it->second;
  }

  bool contains(const std::string& dialog_id, std::size_t index) const {
    return store_.count({dialog_id, index}) > 0;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return store_.size(); }

 private:
  std::map<Key, Tensor> store_;
  std::size_t dim_ = 0;
};

// Line-delimited records {"dialog_id", "segment_index", "vectors": [[...]..]}.
inline ContextualStore load_contextual_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open contextual store: " + path);
  ContextualStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": invalid JSON: " + e.what());
    }
    const auto dialog_id = j.at("dialog_id").get<std::string>();
    const auto index = j.at("segment_index").get<std::size_t>();
    const auto& vecs = j.at("vectors");
    if (!vecs.is_array() || vecs.empty()) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": vectors must be a non-empty list");
    }
    const std::size_t cols = vecs[0].size();
    Tensor m({vecs.size(), cols});
    for (std::size_t r = 0; r < vecs.size(); ++r) {
      if (vecs[r].size() != cols) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": ragged vector list");
      }
      for (std::size_t c = 0; c < cols; ++c) {
        m.at(r, c) = vecs[r][c].get<Scalar>();
      }
    }
    store.insert(dialog_id, index, std::move(m));
  }
  return store;
}

// Elementwise sum of same-shape matrices; utility for building stores from
// multi-layer exports.
inline Tensor sum_layers(const std::vector<Tensor>& layers) {
  if (layers.empty()) throw ParameterError("sum_layers: empty list");
  Tensor out = layers[0];
  for (std::size_t k = 1; k < layers.size(); ++k) {
    require_same_shape(out, layers[k], "sum_layers");
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.values[i] += layers[k].values[i];
    }
  }
  return out;
}

// ---- providers ----

struct EmbedResult {
  Var matrix;          // L' x dim
  std::size_t length;  // effective L'
};

// Maps a segment's tokens at one level to an embedding matrix inside the
// graph. Trainable variants own parameters; lookup variants are frozen.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual TokenLevel level() const = 0;
  virtual EmbedResult embed(Graph& g, const Segment& segment) const = 0;

 protected:
  EmbedResult checked(EmbedResult r) const {
    if (r.matrix->value.cols() != dim()) {
      throw DimensionError("embedding provider produced dim " +
                           std::to_string(r.matrix->value.cols()) +
                           ", declared " + std::to_string(dim()));
    }
    return r;
  }
};

// Trainable token-index embedding; covers the random word-level variant and
// the char / POS / lemma one-hot-sized variants. Unknown tokens map to the
// trainable unknown row; the padding row is never gathered.
class TrainableEmbedding : public EmbeddingProvider {
 public:
  TrainableEmbedding(ParameterStore& store, const std::string& name,
                     const Vocabulary& vocab, TokenLevel level, std::size_t dim,
                     SeededRng& rng)
      : vocab_(vocab), level_(level), dim_(dim) {
    table_ = &store.create_glorot(name, {vocab.size(), dim}, vocab.size(), dim, rng);
    // padding row stays zero
    for (std::size_t c = 0; c < dim; ++c) table_->value.at(kPadIndex, c) = 0.0;
  }

  std::size_t dim() const override { return dim_; }
  TokenLevel level() const override { return level_; }

  EmbedResult embed(Graph& g, const Segment& segment) const override {
    std::vector<std::size_t> indices;
    for (const auto& t : level_tokens(segment, level_)) {
      indices.push_back(vocab_.lookup(t));
    }
    if (indices.empty()) {
      return checked({g.leaf(Tensor({1, dim_})), 1});  // zero-row fallback
    }
    return checked({g.embedding_rows(g.param(*table_), indices), indices.size()});
  }

 private:
  const Vocabulary& vocab_;
  TokenLevel level_;
  std::size_t dim_;
  Parameter* table_;
};

// Frozen word->vector lookup. Tokens absent from the table are dropped
// (L' <= L); a fully out-of-vocabulary segment yields a single zero row so
// downstream encoders always receive a non-empty sequence.
class PretrainedLookup : public EmbeddingProvider {
 public:
  PretrainedLookup(std::shared_ptr<const PretrainedTable> table,
                   bool lowercase_on_miss = false)
      : table_(std::move(table)), lowercase_on_miss_(lowercase_on_miss) {
    if (!table_ || table_->dim == 0) {
      throw ConfigError("pretrained lookup requires a non-empty table");
    }
  }

  std::size_t dim() const override { return table_->dim; }
  TokenLevel level() const override { return TokenLevel::kWords; }

  EmbedResult embed(Graph& g, const Segment& segment) const override {
    std::vector<const std::vector<Scalar>*> rows;
    for (const auto& w : segment.words) {
      auto it = table_->vectors.find(w);
      if (it == table_->vectors.end() && lowercase_on_miss_) {
        std::string lower = w;
        for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        it = table_->vectors.find(lower);
      }
      if (it != table_->vectors.end()) rows.push_back(&it->second);
    }
    if (rows.empty()) {
      return checked({g.leaf(Tensor({1, table_->dim})), 1});
    }
    Tensor m({rows.size(), table_->dim});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < table_->dim; ++c) m.at(r, c) = (*rows[r])[c];
    }
    return checked({g.leaf(std::move(m)), rows.size()});
  }

 private:
  std::shared_ptr<const PretrainedTable> table_;
  bool lowercase_on_miss_;
};

// Frozen per-occurrence vectors keyed by (dialog, segment index); returned
// verbatim, so two occurrences of the same word may differ.
class ContextualizedPrecomputed : public EmbeddingProvider {
 public:
  explicit ContextualizedPrecomputed(std::shared_ptr<const ContextualStore> store)
      : store_(std::move(store)) {
    if (!store_ || store_->dim() == 0) {
      throw ConfigError("contextualized provider requires a non-empty store");
    }
  }

  std::size_t dim() const override { return store_->dim(); }
  TokenLevel level() const override { return TokenLevel::kWords; }

  EmbedResult embed(Graph& g, const Segment& segment) const override {
    const Tensor& m = store_->get(segment.dialog_id, segment.index);
    return checked({g.leaf(m), m.rows()});
  }

 private:
  std::shared_ptr<const ContextualStore> store_;
};

}  // namespace dar
