#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dar/common.hpp"
#include "dar/context.hpp"
#include "dar/corpus.hpp"
#include "dar/encoders.hpp"
#include "dar/model.hpp"
#include "dar/trainer.hpp"

namespace dar {

using nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

// ---- encoder ----

inline json encoder_to_json(const EncoderConfig& c) {
  json j;
  switch (c.kind) {
    case EncoderKind::kMaxPool: j["type"] = "maxpool"; break;
    case EncoderKind::kParallelCnn:
      j["type"] = "cnn";
      j["windows"] = c.windows;
      j["filters"] = c.filters_per_window;
      break;
    case EncoderKind::kRecurrentStack:
      j["type"] = "rnn_stack";
      j["depth"] = c.depth;
      j["cell"] = c.cell == CellKind::kLstm ? "lstm" : "gru";
      j["bidirectional"] = c.bidirectional;
      break;
    case EncoderKind::kRcnn:
      j["type"] = "rcnn";
      j["context_dim"] = c.context_dim;
      j["proj_dim"] = c.proj_dim;
      break;
  }
  return j;
}

inline EncoderConfig encoder_from_json(const json& j) {
  check_keys(j, {"type", "windows", "filters", "depth", "cell", "bidirectional",
                 "context_dim", "proj_dim"},
             "encoder");
  EncoderConfig c;
  const std::string type = j.at("type").get<std::string>();
  if (type == "maxpool") {
    c.kind = EncoderKind::kMaxPool;
  } else if (type == "cnn") {
    c.kind = EncoderKind::kParallelCnn;
    if (j.contains("windows")) c.windows = j["windows"].get<std::vector<std::size_t>>();
    if (j.contains("filters")) c.filters_per_window = j["filters"].get<std::size_t>();
  } else if (type == "rnn_stack") {
    c.kind = EncoderKind::kRecurrentStack;
    if (j.contains("depth")) c.depth = j["depth"].get<std::size_t>();
    if (j.contains("cell")) {
      const std::string cell = j["cell"].get<std::string>();
      if (cell == "lstm") c.cell = CellKind::kLstm;
      else if (cell == "gru") c.cell = CellKind::kGru;
      else throw ConfigError("unknown cell kind: " + cell);
    }
    if (j.contains("bidirectional")) c.bidirectional = j["bidirectional"].get<bool>();
  } else if (type == "rcnn") {
    c.kind = EncoderKind::kRcnn;
    if (j.contains("context_dim")) c.context_dim = j["context_dim"].get<std::size_t>();
    if (j.contains("proj_dim")) c.proj_dim = j["proj_dim"].get<std::size_t>();
  } else {
    throw ConfigError("unknown encoder type: " + type);
  }
  c.validate();
  return c;
}

// ---- context ----

inline json context_to_json(const ContextConfig& c) {
  json j;
  switch (c.source) {
    case ContextSource::kLabelsPreceding: j["source"] = "labels_preceding"; break;
    case ContextSource::kLabelsFuture: j["source"] = "labels_future"; break;
    case ContextSource::kTurnTaking: j["source"] = "turn_taking"; break;
  }
  if (c.scope == kScopeAll) j["scope"] = "all";
  else j["scope"] = c.scope;
  j["repr"] = c.repr == ContextRepr::kFlat ? "flat" : "summary";
  j["max_flat_history"] = c.max_flat_history;
  if (c.compare_to_current) j["compare_to_current"] = true;
  return j;
}

inline ContextConfig context_from_json(const json& j) {
  check_keys(j, {"source", "scope", "repr", "max_flat_history", "compare_to_current"},
             "context");
  ContextConfig c;
  const std::string source = j.at("source").get<std::string>();
  if (source == "labels_preceding") c.source = ContextSource::kLabelsPreceding;
  else if (source == "labels_future") c.source = ContextSource::kLabelsFuture;
  else if (source == "turn_taking") c.source = ContextSource::kTurnTaking;
  else throw ConfigError("unknown context source: " + source);
  const json& scope = j.at("scope");
  if (scope.is_string() && scope.get<std::string>() == "all") c.scope = kScopeAll;
  else c.scope = scope.get<std::size_t>();
  const std::string repr = j.at("repr").get<std::string>();
  if (repr == "flat") c.repr = ContextRepr::kFlat;
  else if (repr == "summary") c.repr = ContextRepr::kSummary;
  else throw ConfigError("unknown context repr: " + repr);
  if (j.contains("max_flat_history")) c.max_flat_history = j["max_flat_history"].get<std::size_t>();
  if (j.contains("compare_to_current")) c.compare_to_current = j["compare_to_current"].get<bool>();
  c.validate();
  return c;
}

// ---- model ----

inline json channel_to_json(const ChannelConfig& c) {
  json j;
  j["level"] = level_name(c.level);
  switch (c.embedding) {
    case EmbeddingKind::kTrainable: j["embedding"] = "trainable"; break;
    case EmbeddingKind::kPretrained: j["embedding"] = "pretrained"; break;
    case EmbeddingKind::kContextual: j["embedding"] = "contextual"; break;
  }
  j["dim"] = c.dim;
  if (!c.path.empty()) j["path"] = c.path;
  if (c.lowercase_on_miss) j["lowercase_on_miss"] = true;
  j["encoder"] = encoder_to_json(c.encoder);
  return j;
}

inline ChannelConfig channel_from_json(const json& j) {
  check_keys(j, {"level", "embedding", "dim", "path", "lowercase_on_miss", "encoder"},
             "channel");
  ChannelConfig c;
  c.level = parse_level(j.at("level").get<std::string>());
  const std::string emb = j.value("embedding", std::string("trainable"));
  if (emb == "trainable" || emb == "random") c.embedding = EmbeddingKind::kTrainable;
  else if (emb == "pretrained") c.embedding = EmbeddingKind::kPretrained;
  else if (emb == "contextual") c.embedding = EmbeddingKind::kContextual;
  else throw ConfigError("unknown embedding kind: " + emb);
  if (j.contains("dim")) c.dim = j["dim"].get<std::size_t>();
  if (j.contains("path")) c.path = j["path"].get<std::string>();
  if (j.contains("lowercase_on_miss")) c.lowercase_on_miss = j["lowercase_on_miss"].get<bool>();
  c.encoder = encoder_from_json(j.at("encoder"));
  return c;
}

inline json model_to_json(const ModelConfig& c) {
  json j;
  j["channels"] = json::array();
  for (const auto& ch : c.channels) j["channels"].push_back(channel_to_json(ch));
  j["contexts"] = json::array();
  for (const auto& ctx : c.contexts) j["contexts"].push_back(context_to_json(ctx));
  j["reduction_dim"] = c.reduction_dim;
  j["dropout"] = c.dropout;
  return j;
}

inline ModelConfig model_from_json(const json& j) {
  check_keys(j, {"channels", "contexts", "reduction_dim", "dropout"}, "model");
  ModelConfig c;
  for (const auto& ch : j.at("channels")) c.channels.push_back(channel_from_json(ch));
  if (j.contains("contexts")) {
    for (const auto& ctx : j["contexts"]) c.contexts.push_back(context_from_json(ctx));
  }
  if (j.contains("reduction_dim")) c.reduction_dim = j["reduction_dim"].get<std::size_t>();
  if (j.contains("dropout")) c.dropout = j["dropout"].get<Scalar>();
  c.validate();
  return c;
}

// ---- train ----

inline json train_to_json(const TrainConfig& c) {
  json j;
  j["batch_size"] = c.batch_size;
  j["patience"] = c.patience;
  j["max_epochs"] = c.max_epochs;
  j["runs"] = c.runs;
  j["seed"] = c.base_seed;
  j["lr"] = c.adam.lr;
  j["beta1"] = c.adam.beta1;
  j["beta2"] = c.adam.beta2;
  j["eps"] = c.adam.eps;
  return j;
}

inline TrainConfig train_from_json(const json& j) {
  check_keys(j, {"batch_size", "patience", "max_epochs", "runs", "seed", "lr",
                 "beta1", "beta2", "eps"},
             "train");
  TrainConfig c;
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("patience")) c.patience = j["patience"].get<std::size_t>();
  if (j.contains("max_epochs")) c.max_epochs = j["max_epochs"].get<std::size_t>();
  if (j.contains("runs")) c.runs = j["runs"].get<std::size_t>();
  if (j.contains("seed")) c.base_seed = j["seed"].get<std::uint64_t>();
  if (j.contains("lr")) c.adam.lr = j["lr"].get<Scalar>();
  if (j.contains("beta1")) c.adam.beta1 = j["beta1"].get<Scalar>();
  if (j.contains("beta2")) c.adam.beta2 = j["beta2"].get<Scalar>();
  if (j.contains("eps")) c.adam.eps = j["eps"].get<Scalar>();
  c.validate();
  return c;
}

// ---- experiment ----

struct ExperimentConfig {
  std::string name = "approach";
  std::string segments_path;
  std::string partition_path;
  std::string variant = "none";  // 44|43|42|41|mrda5|none
  std::string mapping_table;     // optional from->to override
  ModelConfig model;
  TrainConfig train;
  Split eval_split = Split::kTest;
  EvalMode eval_mode = EvalMode::kGoldContext;
  std::string output_dir;
};

inline ExperimentConfig experiment_from_json(const json& j) {
  check_keys(j, {"name", "corpus", "model", "train", "eval", "output"},
             "experiment config");
  ExperimentConfig c;
  if (j.contains("name")) c.name = j["name"].get<std::string>();
  const json& corpus = j.at("corpus");
  check_keys(corpus, {"segments", "partition", "variant", "mapping_table"}, "corpus");
  c.segments_path = corpus.at("segments").get<std::string>();
  c.partition_path = corpus.at("partition").get<std::string>();
  c.variant = corpus.at("variant").get<std::string>();
  if (corpus.contains("mapping_table")) c.mapping_table = corpus["mapping_table"].get<std::string>();
  c.model = model_from_json(j.at("model"));
  c.train = train_from_json(j.value("train", json::object()));
  if (j.contains("eval")) {
    check_keys(j["eval"], {"split", "mode"}, "eval");
    if (j["eval"].contains("split")) c.eval_split = parse_split(j["eval"]["split"].get<std::string>());
    if (j["eval"].contains("mode")) c.eval_mode = parse_eval_mode(j["eval"]["mode"].get<std::string>());
  }
  if (j.contains("output")) c.output_dir = j["output"].get<std::string>();
  return c;
}

// Applies the configured label-set reduction to a freshly loaded corpus.
inline Corpus apply_variant(const Corpus& corpus, const std::string& variant,
                            const std::string& mapping_table = "") {
  Corpus out = corpus;
  if (variant == "44" || variant == "43" || variant == "42" || variant == "41") {
    out = map_swda_labels(out, std::stoi(variant));
  } else if (variant == "mrda5") {
    out = filter_mrda(out);
  } else if (variant != "none") {
    throw ConfigError("unknown label variant: " + variant);
  }
  if (!mapping_table.empty()) out = map_labels_from_table(out, mapping_table);
  return out;
}

}  // namespace dar
