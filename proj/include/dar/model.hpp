#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dar/common.hpp"
#include "dar/context.hpp"
#include "dar/corpus.hpp"
#include "dar/embeddings.hpp"
#include "dar/encoders.hpp"
#include "dar/graph.hpp"
#include "dar/loss.hpp"
#include "dar/optim.hpp"

namespace dar {

enum class EmbeddingKind { kTrainable, kPretrained, kContextual };

struct ChannelConfig {
  TokenLevel level = TokenLevel::kWords;
  EmbeddingKind embedding = EmbeddingKind::kTrainable;
  // Trainable word/lemma dim; char and POS channels derive their dim from the
  // vocabulary size, lookup variants from the loaded file.
  std::size_t dim = 200;
  std::string path;  // pretrained / contextual vector file
  bool lowercase_on_miss = false;
  EncoderConfig encoder;
};

struct ModelConfig {
  std::vector<ChannelConfig> channels;
  std::vector<ContextConfig> contexts;
  std::size_t reduction_dim = 100;
  Scalar dropout = 0.5;

  void validate() const {
    if (channels.empty()) throw ConfigError("model needs at least one channel");
    std::set<TokenLevel> levels;
    for (const auto& ch : channels) {
      if (!levels.insert(ch.level).second) {
        throw ConfigError("duplicate channel level: " + level_name(ch.level));
      }
      ch.encoder.validate();
      if (ch.embedding != EmbeddingKind::kTrainable && ch.level != TokenLevel::kWords) {
        throw ConfigError("lookup embeddings are word-level only");
      }
      if (ch.embedding != EmbeddingKind::kTrainable && ch.path.empty()) {
        throw ConfigError("lookup embedding channel requires a vector file path");
      }
    }
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      contexts[i].validate();
      for (std::size_t j = 0; j < i; ++j) {
        if (contexts[i] == contexts[j]) {
          throw ConfigError("duplicate context configuration");
        }
      }
    }
    if (reduction_dim == 0) throw ConfigError("reduction_dim must be positive");
    if (dropout < 0.0 || dropout >= 1.0) {
      throw ConfigError("dropout must be in [0, 1)");
    }
  }
};

// Caches external vector files so parallel runs share frozen resources.
class EmbeddingResources {
 public:
  std::shared_ptr<const PretrainedTable> table(const std::string& path) {
    auto it = tables_.find(path);
    if (it == tables_.end()) {
      it = tables_.emplace(path, std::make_shared<PretrainedTable>(
                                     load_pretrained_text(path))).first;
    }
    return it->second;
  }

  std::shared_ptr<const ContextualStore> store(const std::string& path) {
    auto it = stores_.find(path);
    if (it == stores_.end()) {
      it = stores_.emplace(path, std::make_shared<ContextualStore>(
                                     load_contextual_store(path))).first;
    }
    return it->second;
  }

 private:
  std::map<std::string, std::shared_ptr<const PretrainedTable>> tables_;
  std::map<std::string, std::shared_ptr<const ContextualStore>> stores_;
};

// The assembled classifier: per-channel embedding + encoder, context feature
// builders, then concatenation -> relu reduction layer -> dropout -> output
// logits.
class Model {
 public:
  struct ContextInputs {
    const std::vector<std::size_t>* labels = nullptr;    // per-dialog indices
    const std::vector<std::string>* speakers = nullptr;  // per-dialog speakers
    std::size_t t = 0;
    bool zero = false;  // no-context evaluation mode
  };

  Model(ModelConfig cfg, const Vocabularies& vocabs, SeededRng& rng,
        EmbeddingResources& resources)
      : cfg_(std::move(cfg)), vocabs_(vocabs) {
    cfg_.validate();
    std::size_t channel_idx = 0;
    for (const auto& ch : cfg_.channels) {
      const std::string prefix = "channel" + std::to_string(channel_idx++) +
                                 "." + level_name(ch.level);
      std::unique_ptr<EmbeddingProvider> provider;
      switch (ch.embedding) {
        case EmbeddingKind::kTrainable: {
          const auto [vocab, dim] = trainable_vocab_and_dim(ch);
          provider = std::make_unique<TrainableEmbedding>(
              params_, prefix + ".embedding", *vocab, ch.level, dim, rng);
          break;
        }
        case EmbeddingKind::kPretrained:
          provider = std::make_unique<PretrainedLookup>(
              resources.table(ch.path), ch.lowercase_on_miss);
          break;
        case EmbeddingKind::kContextual:
          provider = std::make_unique<ContextualizedPrecomputed>(
              resources.store(ch.path));
          break;
      }
      encoders_.push_back(make_encoder(params_, prefix + ".encoder",
                                       provider->dim(), ch.encoder, rng));
      providers_.push_back(std::move(provider));
    }
    std::size_t ctx_idx = 0;
    for (const auto& ctx : cfg_.contexts) {
      contexts_.emplace_back(params_, "context" + std::to_string(ctx_idx++),
                             ctx, num_classes(), rng);
    }
    const std::size_t in = reduction_input_dim();
    reduction_w_ = &params_.create_glorot("reduction.w", {in, cfg_.reduction_dim},
                                          in, cfg_.reduction_dim, rng);
    reduction_b_ = &params_.create_zeros("reduction.b", {cfg_.reduction_dim});
    output_w_ = &params_.create_glorot("output.w",
                                       {cfg_.reduction_dim, num_classes()},
                                       cfg_.reduction_dim, num_classes(), rng);
    output_b_ = &params_.create_zeros("output.b", {num_classes()});
  }

  const ModelConfig& config() const { return cfg_; }
  const Vocabularies& vocabularies() const { return vocabs_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  std::size_t num_classes() const { return vocabs_.label.size(); }

  bool has_contexts() const { return !contexts_.empty(); }
  bool has_future_contexts() const {
    for (const auto& c : contexts_) {
      if (c.uses_future_labels()) return true;
    }
    return false;
  }
  const std::vector<ContextFeatureBuilder>& context_builders() const {
    return contexts_;
  }

  std::size_t reduction_input_dim() const {
    std::size_t in = 0;
    for (const auto& e : encoders_) in += e->output_dim();
    for (const auto& c : contexts_) in += c.dim();
    return in;
  }

  // Forward pass for one segment; returns the logits node. dropout_rng is
  // only consulted when training is true.
  Var forward(Graph& g, const Segment& segment, const ContextInputs& ctx,
              bool training, SeededRng* dropout_rng) const {
    std::vector<Var> parts;
    for (std::size_t i = 0; i < providers_.size(); ++i) {
      EmbedResult er = providers_[i]->embed(g, segment);
      parts.push_back(encoders_[i]->encode(g, er.matrix, er.length));
    }
    for (const auto& c : contexts_) {
      if (ctx.zero) {
        parts.push_back(c.zero(g));
      } else {
        if (!ctx.labels || !ctx.speakers) {
          throw ConfigError("context features requested but no dialog context given");
        }
        parts.push_back(c.build(g, *ctx.labels, *ctx.speakers, ctx.t));
      }
    }
    Var features = parts.size() == 1 ? parts[0] : g.concat(parts);
    if (features->value.size() != reduction_input_dim()) {
      throw ConfigError("feature dimension mismatch: got " +
                        std::to_string(features->value.size()) + ", expected " +
                        std::to_string(reduction_input_dim()));
    }
    Var reduced = g.relu(g.affine(features, g.param(*reduction_w_),
                                  g.param(*reduction_b_)));
    if (training) {
      if (!dropout_rng) throw ConfigError("training forward requires a dropout rng");
      reduced = g.dropout(reduced, cfg_.dropout, *dropout_rng, true);
    }
    return g.affine(reduced, g.param(*output_w_), g.param(*output_b_));
  }

  // Evaluation-mode prediction; ties resolve to the lowest class index.
  std::size_t predict(const Segment& segment, const ContextInputs& ctx) const {
    Graph g;
    Var logits = forward(g, segment, ctx, false, nullptr);
    return argmax(logits->value);
  }

 private:
  std::pair<const Vocabulary*, std::size_t> trainable_vocab_and_dim(
      const ChannelConfig& ch) const {
    switch (ch.level) {
      case TokenLevel::kWords:
        return {&vocabs_.word, ch.dim};
      case TokenLevel::kChars:
        // one-hot-sized by definition, pad/unk slots included
        return {&vocabs_.chars, vocabs_.chars.size()};
      case TokenLevel::kPosCoarse:
        return {&vocabs_.pos_coarse, vocabs_.pos_coarse.size()};
      case TokenLevel::kPosFine:
        return {&vocabs_.pos_fine, vocabs_.pos_fine.size()};
      case TokenLevel::kLemmas:
        return {&vocabs_.lemma, ch.dim};
    }
    throw ConfigError("unknown token level");
  }

  ModelConfig cfg_;
  const Vocabularies& vocabs_;
  ParameterStore params_;
  std::vector<std::unique_ptr<EmbeddingProvider>> providers_;
  std::vector<std::unique_ptr<Encoder>> encoders_;
  std::vector<ContextFeatureBuilder> contexts_;
  Parameter* reduction_w_ = nullptr;
  Parameter* reduction_b_ = nullptr;
  Parameter* output_w_ = nullptr;
  Parameter* output_b_ = nullptr;
};

}  // namespace dar
