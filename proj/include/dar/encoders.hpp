#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dar/cells.hpp"
#include "dar/common.hpp"
#include "dar/graph.hpp"
#include "dar/optim.hpp"

namespace dar {

enum class EncoderKind { kMaxPool, kParallelCnn, kRecurrentStack, kRcnn };
enum class CellKind { kLstm, kGru };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kParallelCnn;
  // ParallelCnn
  std::vector<std::size_t> windows = {1, 2, 3};  // {3,5,7} for char channels
  std::size_t filters_per_window = 100;
  // RecurrentStack
  std::size_t depth = 10;
  CellKind cell = CellKind::kLstm;
  bool bidirectional = false;
  // Rcnn
  std::size_t context_dim = 200;
  std::size_t proj_dim = 200;

  void validate() const {
    if (kind == EncoderKind::kParallelCnn) {
      if (windows.empty()) throw ConfigError("cnn encoder needs windows");
      std::size_t prev = 0;
      for (std::size_t w : windows) {
        if (w == 0 || w <= prev) {
          throw ConfigError("cnn windows must be positive and strictly ascending");
        }
        prev = w;
      }
      if (filters_per_window == 0) throw ConfigError("filters_per_window must be positive");
    }
    if (kind == EncoderKind::kRecurrentStack && depth == 0) {
      throw ConfigError("recurrent stack depth must be positive");
    }
    if (kind == EncoderKind::kRcnn && (context_dim == 0 || proj_dim == 0)) {
      throw ConfigError("rcnn dims must be positive");
    }
  }
};

// A segment encoder maps an L x d token-embedding matrix (with an effective
// length; rows beyond it are padding) to a fixed-size segment vector. Output
// dimensionality is a pure function of the config and the input dim.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::size_t output_dim() const = 0;
  virtual Var encode(Graph& g, Var embeddings, std::size_t length) const = 0;

 protected:
  static void require_nonempty(std::size_t length) {
    if (length == 0) throw IndexError("encoder requires a non-empty sequence");
  }
};

// Componentwise max over the token rows; the baseline representation.
class MaxPoolEncoder : public Encoder {
 public:
  explicit MaxPoolEncoder(std::size_t input_dim) : dim_(input_dim) {}

  std::size_t output_dim() const override { return dim_; }

  Var encode(Graph& g, Var e, std::size_t length) const override {
    require_nonempty(length);
    return g.rowmax(e, length);
  }

 private:
  std::size_t dim_;
};

// Parallel temporal convolutions with different window sizes, each followed by
// relu and max-over-time; results concatenated in ascending window order.
class ParallelCnnEncoder : public Encoder {
 public:
  ParallelCnnEncoder(ParameterStore& store, const std::string& prefix,
                     std::size_t input_dim, const EncoderConfig& cfg,
                     SeededRng& rng)
      : windows_(cfg.windows), filters_(cfg.filters_per_window) {
    for (std::size_t w : windows_) {
      banks_.push_back(&store.create_glorot(
          prefix + ".conv" + std::to_string(w) + ".filters",
          {filters_, w, input_dim}, w * input_dim, filters_, rng));
      biases_.push_back(&store.create_zeros(
          prefix + ".conv" + std::to_string(w) + ".bias", {filters_}));
    }
  }

  std::size_t output_dim() const override { return windows_.size() * filters_; }

  Var encode(Graph& g, Var e, std::size_t length) const override {
    require_nonempty(length);
    std::vector<Var> parts;
    for (std::size_t i = 0; i < windows_.size(); ++i) {
      parts.push_back(g.conv1d_maxpool(e, length, g.param(*banks_[i]),
                                       g.param(*biases_[i]), windows_[i]));
    }
    return parts.size() == 1 ? parts[0] : g.concat(parts);
  }

 private:
  std::vector<std::size_t> windows_;
  std::size_t filters_;
  std::vector<Parameter*> banks_;
  std::vector<Parameter*> biases_;
};

// Stack of recurrent layers; layer k consumes layer k-1's full output
// sequence. The segment representation concatenates every layer's final-step
// hidden state, in layer order; the bidirectional variant adds a mirrored
// stack over the reversed sequence. Hidden size equals the input dim.
class RecurrentStackEncoder : public Encoder {
 public:
  RecurrentStackEncoder(ParameterStore& store, const std::string& prefix,
                        std::size_t input_dim, const EncoderConfig& cfg,
                        SeededRng& rng)
      : dim_(input_dim), depth_(cfg.depth), cell_kind_(cfg.cell),
        bidirectional_(cfg.bidirectional) {
    auto build_stack = [&](const std::string& dir, std::vector<LstmCell>& lstms,
                           std::vector<GruCell>& grus) {
      for (std::size_t k = 0; k < depth_; ++k) {
        const std::string name = prefix + "." + dir + ".layer" + std::to_string(k);
        if (cell_kind_ == CellKind::kLstm) {
          lstms.push_back(LstmCell::create(store, name, input_dim, input_dim, rng));
        } else {
          grus.push_back(GruCell::create(store, name, input_dim, input_dim, rng));
        }
      }
    };
    build_stack("fwd", fwd_lstm_, fwd_gru_);
    if (bidirectional_) build_stack("bwd", bwd_lstm_, bwd_gru_);
  }

  std::size_t output_dim() const override {
    return (bidirectional_ ? 2 : 1) * depth_ * dim_;
  }

  Var encode(Graph& g, Var e, std::size_t length) const override {
    require_nonempty(length);
    std::vector<Var> finals;
    run_stack(g, e, length, /*reversed=*/false, finals);
    if (bidirectional_) run_stack(g, e, length, /*reversed=*/true, finals);
    return finals.size() == 1 ? finals[0] : g.concat(finals);
  }

 private:
  void run_stack(Graph& g, Var e, std::size_t length, bool reversed,
                 std::vector<Var>& finals) const {
    std::vector<Var> seq;
    for (std::size_t i = 0; i < length; ++i) {
      seq.push_back(g.row(e, reversed ? length - 1 - i : i));
    }
    const auto& lstms = reversed ? bwd_lstm_ : fwd_lstm_;
    const auto& grus = reversed ? bwd_gru_ : fwd_gru_;
    for (std::size_t k = 0; k < depth_; ++k) {
      Var h = g.leaf(Tensor({dim_}));
      Var c = g.leaf(Tensor({dim_}));
      std::vector<Var> out;
      for (Var x : seq) {
        if (cell_kind_ == CellKind::kLstm) {
          auto [hn, cn] = lstms[k].step(g, x, h, c);
          h = hn;
          c = cn;
        } else {
          h = grus[k].step(g, x, h);
        }
        out.push_back(h);
      }
      finals.push_back(h);
      seq = std::move(out);
    }
  }

  std::size_t dim_;
  std::size_t depth_;
  CellKind cell_kind_;
  bool bidirectional_;
  std::vector<LstmCell> fwd_lstm_, bwd_lstm_;
  std::vector<GruCell> fwd_gru_, bwd_gru_;
};

// Recurrent-convolutional encoder: each token embedding is decorated with GRU
// summaries of the strictly preceding and strictly following tokens, projected
// through tanh, and max-pooled over the sequence.
class RcnnEncoder : public Encoder {
 public:
  RcnnEncoder(ParameterStore& store, const std::string& prefix,
              std::size_t input_dim, const EncoderConfig& cfg, SeededRng& rng)
      : context_dim_(cfg.context_dim), proj_dim_(cfg.proj_dim) {
    fwd_ = GruCell::create(store, prefix + ".ctx_fwd", input_dim, context_dim_, rng);
    bwd_ = GruCell::create(store, prefix + ".ctx_bwd", input_dim, context_dim_, rng);
    const std::size_t in = input_dim + 2 * context_dim_;
    proj_w_ = &store.create_glorot(prefix + ".proj.w", {in, proj_dim_}, in,
                                   proj_dim_, rng);
    proj_b_ = &store.create_zeros(prefix + ".proj.b", {proj_dim_});
  }

  std::size_t output_dim() const override { return proj_dim_; }

  Var encode(Graph& g, Var e, std::size_t length) const override {
    require_nonempty(length);
    // left context for token i: forward GRU state after tokens 0..i-1
    std::vector<Var> left(length), right(length);
    Var h = g.leaf(Tensor({context_dim_}));
    for (std::size_t i = 0; i < length; ++i) {
      left[i] = h;
      h = fwd_.step(g, g.row(e, i), h);
    }
    h = g.leaf(Tensor({context_dim_}));
    for (std::size_t i = length; i-- > 0;) {
      right[i] = h;
      h = bwd_.step(g, g.row(e, i), h);
    }
    Var pooled = nullptr;
    for (std::size_t i = 0; i < length; ++i) {
      Var x = g.concat({left[i], g.row(e, i), right[i]});
      Var y = g.tanh_op(g.affine(x, g.param(*proj_w_), g.param(*proj_b_)));
      pooled = pooled ? g.vmax(pooled, y) : y;
    }
    return pooled;
  }

 private:
  std::size_t context_dim_;
  std::size_t proj_dim_;
  GruCell fwd_, bwd_;
  Parameter* proj_w_ = nullptr;
  Parameter* proj_b_ = nullptr;
};

inline std::unique_ptr<Encoder> make_encoder(ParameterStore& store,
                                             const std::string& prefix,
                                             std::size_t input_dim,
                                             const EncoderConfig& cfg,
                                             SeededRng& rng) {
  cfg.validate();
  switch (cfg.kind) {
    case EncoderKind::kMaxPool:
      return std::make_unique<MaxPoolEncoder>(input_dim);
    case EncoderKind::kParallelCnn:
      return std::make_unique<ParallelCnnEncoder>(store, prefix, input_dim, cfg, rng);
    case EncoderKind::kRecurrentStack:
      return std::make_unique<RecurrentStackEncoder>(store, prefix, input_dim, cfg, rng);
    case EncoderKind::kRcnn:
      return std::make_unique<RcnnEncoder>(store, prefix, input_dim, cfg, rng);
  }
  throw ConfigError("unknown encoder kind");
}

}  // namespace dar
