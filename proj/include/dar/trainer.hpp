#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "dar/common.hpp"
#include "dar/corpus.hpp"
#include "dar/model.hpp"

namespace dar {

enum class EvalMode { kNoContext, kGoldContext, kAutoContext };

inline std::string eval_mode_name(EvalMode m) {
  switch (m) {
    case EvalMode::kNoContext: return "none";
    case EvalMode::kGoldContext: return "gold";
    case EvalMode::kAutoContext: return "auto";
  }
  return "?";
}

inline EvalMode parse_eval_mode(const std::string& s) {
  if (s == "none") return EvalMode::kNoContext;
  if (s == "gold") return EvalMode::kGoldContext;
  if (s == "auto") return EvalMode::kAutoContext;
  throw ConfigError("unknown evaluation mode: " + s);
}

struct TrainConfig {
  std::size_t batch_size = 512;
  std::size_t patience = 10;
  std::size_t max_epochs = 500;
  AdamConfig adam;
  std::size_t runs = 10;
  std::uint64_t base_seed = 1;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (runs < 1) throw ConfigError("runs must be >= 1");
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  Scalar train_loss = 0.0;
  Scalar val_accuracy = 0.0;
};

// ---- evaluation ----

inline std::vector<std::size_t> gold_label_indices(const Dialog& dialog,
                                                   const LabelVocabulary& labels) {
  std::vector<std::size_t> out;
  out.reserve(dialog.segments.size());
  for (const auto& s : dialog.segments) out.push_back(labels.lookup(s.label));
  return out;
}

inline std::vector<std::string> dialog_speakers(const Dialog& dialog) {
  std::vector<std::string> out;
  out.reserve(dialog.segments.size());
  for (const auto& s : dialog.segments) out.push_back(s.speaker);
  return out;
}

// Accuracy (percent) of the model on one split. Gold mode builds context
// features from annotations; auto mode processes each dialog chronologically
// and feeds every prediction into the label history of later positions.
inline Scalar evaluate(const Model& model, const Corpus& corpus, Split split,
                       EvalMode mode) {
  if (mode == EvalMode::kAutoContext && model.has_future_contexts()) {
    throw ConfigError(
        "auto-context evaluation is incompatible with future-label contexts");
  }
  std::size_t correct = 0, total = 0;
  for (const Dialog* dialog : corpus.dialogs_in(split)) {
    const auto gold = gold_label_indices(*dialog, model.vocabularies().label);
    const auto speakers = dialog_speakers(*dialog);
    std::vector<std::size_t> history =
        mode == EvalMode::kAutoContext
            ? std::vector<std::size_t>(dialog->segments.size(), 0)
            : gold;
    for (std::size_t t = 0; t < dialog->segments.size(); ++t) {
      Model::ContextInputs ctx;
      ctx.labels = &history;
      ctx.speakers = &speakers;
      ctx.t = t;
      ctx.zero = mode == EvalMode::kNoContext;
      const std::size_t pred = model.predict(dialog->segments[t], ctx);
      if (mode == EvalMode::kAutoContext) history[t] = pred;
      if (pred == gold[t]) ++correct;
      ++total;
    }
  }
  if (total == 0) throw ConfigError("split " + split_name(split) + " is empty");
  return 100.0 * static_cast<Scalar>(correct) / static_cast<Scalar>(total);
}

// ---- training ----

struct TrainRunResult {
  std::unique_ptr<Model> model;
  std::vector<EpochStats> history;
  Scalar best_val_accuracy = 0.0;
  std::size_t best_epoch = 0;
};

// One seeded training run with early stopping. Gold labels feed the context
// features during training (teacher forcing); validation accuracy per epoch
// uses gold-context mode when contexts are configured. Parameters are restored
// to the best-validation epoch before returning.
inline TrainRunResult train_run(const Corpus& corpus,
                                const ModelConfig& model_cfg,
                                const Vocabularies& vocabs,
                                const TrainConfig& train_cfg,
                                std::uint64_t seed,
                                EmbeddingResources& resources) {
  train_cfg.validate();
  SeededRng init_rng(seed);
  SeededRng shuffle_rng(seed ^ 0x9e3779b97f4a7c15ull);
  SeededRng dropout_rng(seed ^ 0x6a09e667f3bcc909ull);

  TrainRunResult result;
  result.model = std::make_unique<Model>(model_cfg, vocabs, init_rng, resources);
  Model& model = *result.model;

  // per-dialog gold label/speaker streams, indexed by dialog id
  std::map<std::string, std::vector<std::size_t>> gold_labels;
  std::map<std::string, std::vector<std::string>> speakers;
  for (const auto& d : corpus.dialogs) {
    gold_labels[d.id] = gold_label_indices(d, vocabs.label);
    speakers[d.id] = dialog_speakers(d);
  }

  const EvalMode val_mode =
      model.has_contexts() ? EvalMode::kGoldContext : EvalMode::kNoContext;
  auto best_params = model.params().snapshot_values();
  Scalar best_val = -1.0;
  std::size_t epochs_without_improvement = 0;

  for (std::size_t epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    Scalar epoch_loss = 0.0;
    std::size_t batch_count = 0;
    for (const Batch& batch :
         batches(corpus, Split::kTrain, train_cfg.batch_size, shuffle_rng)) {
      ++batch_count;
      Graph g;
      std::vector<Var> losses;
      for (const Segment* seg : batch.segments) {
        Model::ContextInputs ctx;
        ctx.labels = &gold_labels.at(seg->dialog_id);
        ctx.speakers = &speakers.at(seg->dialog_id);
        ctx.t = seg->index;
        Var logits = model.forward(g, *seg, ctx, true, &dropout_rng);
        losses.push_back(g.softmax_xent_loss(
            logits, vocabs.label.lookup(seg->label)));
      }
      Var loss = g.mean(losses);
      if (!std::isfinite(loss->value.values[0])) {
        throw NumericError("non-finite training loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batch_count));
      }
      epoch_loss += loss->value.values[0];
      model.params().zero_grads();
      g.backward(loss);
      g.accumulate_param_grads();
      model.params().adam_step_all(train_cfg.adam);
    }
    const Scalar val_acc = evaluate(model, corpus, Split::kValidation, val_mode);
    result.history.push_back(
        {epoch, epoch_loss / static_cast<Scalar>(batch_count), val_acc});
    if (val_acc > best_val) {
      best_val = val_acc;
      best_params = model.params().snapshot_values();
      result.best_epoch = epoch;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= train_cfg.patience) break;
    }
  }
  model.params().restore_values(best_params);
  result.best_val_accuracy = best_val;
  return result;
}

// ---- multi-run reporting ----

struct RunReport {
  std::string name;
  std::vector<Scalar> accuracies;  // percent, one per run
  Scalar mu = 0.0;
  Scalar sigma = 0.0;  // population standard deviation
};

inline Scalar mean_of(const std::vector<Scalar>& xs) {
  Scalar s = 0.0;
  for (Scalar x : xs) s += x;
  return s / static_cast<Scalar>(xs.size());
}

inline Scalar population_stddev(const std::vector<Scalar>& xs) {
  const Scalar mu = mean_of(xs);
  Scalar s = 0.0;
  for (Scalar x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<Scalar>(xs.size()));
}

inline RunReport make_report(std::string name, std::vector<Scalar> accuracies) {
  RunReport r;
  r.name = std::move(name);
  r.accuracies = std::move(accuracies);
  r.mu = mean_of(r.accuracies);
  r.sigma = population_stddev(r.accuracies);
  return r;
}

struct MultiRunResult {
  RunReport report;
  std::vector<TrainRunResult> runs;
};

// n independent train+evaluate executions with seeds base .. base+n-1.
inline MultiRunResult multi_run(const Corpus& corpus,
                                const ModelConfig& model_cfg,
                                const Vocabularies& vocabs,
                                const TrainConfig& train_cfg, Split eval_split,
                                EvalMode eval_mode,
                                EmbeddingResources& resources,
                                const std::string& name = "approach") {
  MultiRunResult out;
  std::vector<Scalar> accuracies;
  for (std::size_t i = 0; i < train_cfg.runs; ++i) {
    TrainRunResult run = train_run(corpus, model_cfg, vocabs, train_cfg,
                                   train_cfg.base_seed + i, resources);
    accuracies.push_back(evaluate(*run.model, corpus, eval_split, eval_mode));
    out.runs.push_back(std::move(run));
  }
  out.report = make_report(name, std::move(accuracies));
  return out;
}

// Non-overlap significance rule: the difference is significant iff
// mu_w + sigma_w < mu_b - sigma_b (strict). Caller orders the operands.
inline bool significant(Scalar mu_worse, Scalar sigma_worse, Scalar mu_better,
                        Scalar sigma_better) {
  if (mu_worse > mu_better) {
    throw ParameterError("significant: operands must be ordered worse, better");
  }
  return mu_worse + sigma_worse < mu_better - sigma_better;
}

}  // namespace dar
