#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "dar/cells.hpp"
#include "dar/common.hpp"
#include "dar/graph.hpp"
#include "dar/optim.hpp"

namespace dar {

enum class ContextSource { kLabelsPreceding, kLabelsFuture, kTurnTaking };
enum class ContextRepr { kFlat, kSummary };

inline constexpr std::size_t kScopeAll = 0;  // scope value meaning "all"

struct ContextConfig {
  ContextSource source = ContextSource::kLabelsPreceding;
  std::size_t scope = 1;  // 1, 3, or kScopeAll
  ContextRepr repr = ContextRepr::kFlat;
  // Flat scope=all histories are right-aligned to this many positions, oldest
  // dropped, so the feature dimension stays bounded on long dialogs.
  std::size_t max_flat_history = 128;
  // Alternative turn-flag semantics: compare the current speaker against each
  // of the i-th preceding instead of consecutive changes. Experimental, off
  // by default.
  bool compare_to_current = false;

  void validate() const {
    if (scope != 1 && scope != 3 && scope != kScopeAll) {
      throw ConfigError("context scope must be 1, 3, or all");
    }
    if (source == ContextSource::kLabelsFuture && repr == ContextRepr::kFlat) {
      throw ConfigError("flat future-label context is not supported");
    }
    if (scope == kScopeAll && repr == ContextRepr::kFlat && max_flat_history == 0) {
      throw ConfigError("flat full-history context requires max_flat_history");
    }
  }

  bool operator==(const ContextConfig& o) const {
    return source == o.source && scope == o.scope && repr == o.repr;
  }
};

// ---- plain feature constructions (flat reprs are non-trainable) ----

// One-hot blocks of the labels at t-1, t-2, ..., most recent first; positions
// before the dialog start are all-zero blocks.
inline Tensor labels_flat(const std::vector<std::size_t>& history, std::size_t t,
                          std::size_t scope, std::size_t num_classes,
                          std::size_t max_flat_history = 128) {
  if (t > history.size()) throw IndexError("labels_flat: position out of range");
  const std::size_t blocks = scope == kScopeAll ? max_flat_history : scope;
  Tensor out({blocks * num_classes});
  for (std::size_t i = 1; i <= blocks; ++i) {
    if (i > t) break;  // before dialog start
    const std::size_t label = history[t - i];
    if (label >= num_classes) throw IndexError("labels_flat: label out of range");
    out.values[(i - 1) * num_classes + label] = 1.0;
  }
  return out;
}

// flag_i = 1 iff speaker(t-i+1) differs from speaker(t-i), for i = 1..scope;
// most recent first. Positions before the dialog start yield 0.
inline Tensor turn_flags(const std::vector<std::string>& speakers, std::size_t t,
                         std::size_t scope, std::size_t max_flat_history = 128,
                         bool compare_to_current = false) {
  if (t >= speakers.size()) throw IndexError("turn_flags: position out of range");
  const std::size_t n = scope == kScopeAll ? max_flat_history : scope;
  Tensor out({n});
  for (std::size_t i = 1; i <= n; ++i) {
    if (i > t) break;
    const bool changed = compare_to_current
                             ? speakers[t] != speakers[t - i]
                             : speakers[t - i + 1] != speakers[t - i];
    out.values[i - 1] = changed ? 1.0 : 0.0;
  }
  return out;
}

// ---- feature builder (summary reprs own a GRU trained with the model) ----

class ContextFeatureBuilder {
 public:
  ContextFeatureBuilder(ParameterStore& store, const std::string& prefix,
                        const ContextConfig& cfg, std::size_t num_classes,
                        SeededRng& rng)
      : cfg_(cfg), num_classes_(num_classes) {
    cfg_.validate();
    if (cfg_.repr == ContextRepr::kSummary) {
      const std::size_t in = input_dim();
      // summary GRU hidden size follows the input one-hot dimensionality
      gru_ = GruCell::create(store, prefix + ".summary_gru", in, in, rng);
    }
  }

  const ContextConfig& config() const { return cfg_; }

  std::size_t dim() const {
    if (cfg_.repr == ContextRepr::kSummary) return input_dim();
    if (cfg_.source == ContextSource::kTurnTaking) {
      return cfg_.scope == kScopeAll ? cfg_.max_flat_history : cfg_.scope;
    }
    return (cfg_.scope == kScopeAll ? cfg_.max_flat_history : cfg_.scope) *
           num_classes_;
  }

  bool uses_future_labels() const {
    return cfg_.source == ContextSource::kLabelsFuture;
  }
  bool uses_labels() const {
    return cfg_.source != ContextSource::kTurnTaking;
  }

  // Builds the context vector for position t of a dialog. `labels` carries
  // per-position label indices (gold or predicted; the builder is agnostic);
  // entries at and after t are only read by future-source configs.
  Var build(Graph& g, const std::vector<std::size_t>& labels,
            const std::vector<std::string>& speakers, std::size_t t) const {
    switch (cfg_.source) {
      case ContextSource::kLabelsPreceding: {
        if (cfg_.repr == ContextRepr::kFlat) {
          return g.leaf(labels_flat(labels, t, cfg_.scope, num_classes_,
                                    cfg_.max_flat_history));
        }
        const std::size_t start =
            cfg_.scope == kScopeAll ? 0 : (t > cfg_.scope ? t - cfg_.scope : 0);
        std::vector<std::size_t> seq(labels.begin() + static_cast<std::ptrdiff_t>(start),
                                     labels.begin() + static_cast<std::ptrdiff_t>(t));
        return summarize_labels(g, seq);
      }
      case ContextSource::kLabelsFuture: {
        // processed backwards: dialog end toward t+1
        const std::size_t end =
            cfg_.scope == kScopeAll
                ? labels.size()
                : std::min(labels.size(), t + 1 + cfg_.scope);
        std::vector<std::size_t> seq;
        for (std::size_t i = end; i-- > t + 1;) seq.push_back(labels[i]);
        return summarize_labels(g, seq);
      }
      case ContextSource::kTurnTaking: {
        Tensor flags = turn_flags(speakers, t, cfg_.scope,
                                  cfg_.max_flat_history, cfg_.compare_to_current);
        if (cfg_.repr == ContextRepr::kFlat) return g.leaf(std::move(flags));
        // summarize chronologically: oldest flag first
        const std::size_t n =
            cfg_.scope == kScopeAll ? std::min(t, cfg_.max_flat_history)
                                    : std::min(t, cfg_.scope);
        Var h = g.leaf(Tensor({input_dim()}));
        for (std::size_t i = n; i >= 1; --i) {
          Var x = g.leaf(Tensor::vector_of({flags.values[i - 1]}));
          h = gru_.step(g, x, h);
        }
        return h;
      }
    }
    throw ConfigError("unknown context source");
  }

  Var zero(Graph& g) const { return g.leaf(Tensor({dim()})); }

 private:
  std::size_t input_dim() const {
    return cfg_.source == ContextSource::kTurnTaking ? 1 : num_classes_;
  }

  Var summarize_labels(Graph& g, const std::vector<std::size_t>& seq) const {
    Var h = g.leaf(Tensor({num_classes_}));  // empty history -> zero state
    for (std::size_t label : seq) {
      if (label >= num_classes_) throw IndexError("label index out of range");
      Tensor onehot({num_classes_});
      onehot.values[label] = 1.0;
      h = gru_.step(g, g.leaf(std::move(onehot)), h);
    }
    return h;
  }

  ContextConfig cfg_;
  std::size_t num_classes_;
  GruCell gru_{};
};

}  // namespace dar
