#pragma once

#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dar/common.hpp"
#include "dar/config.hpp"
#include "dar/model.hpp"

namespace dar {

constexpr int kCheckpointFormat = 1;

inline json vocabulary_to_json(const Vocabulary& v) {
  // Reserved slots are implied by position; store the full token list.
  return json(v.tokens());
}

inline Vocabulary vocabulary_from_json(const json& j) {
  const auto tokens = j.get<std::vector<std::string>>();
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw FormatError("vocabulary must start with <pad>, <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) v.add(tokens[i]);
  if (v.size() != tokens.size()) throw FormatError("duplicate vocabulary token");
  return v;
}

inline json vocabularies_to_json(const Vocabularies& v) {
  json j;
  j["word"] = vocabulary_to_json(v.word);
  j["chars"] = vocabulary_to_json(v.chars);
  j["pos_coarse"] = vocabulary_to_json(v.pos_coarse);
  j["pos_fine"] = vocabulary_to_json(v.pos_fine);
  j["lemma"] = vocabulary_to_json(v.lemma);
  j["label"] = json(v.label.labels());
  return j;
}

inline Vocabularies vocabularies_from_json(const json& j) {
  check_keys(j, {"word", "chars", "pos_coarse", "pos_fine", "lemma", "label"},
             "vocabularies");
  Vocabularies v;
  v.word = vocabulary_from_json(j.at("word"));
  v.chars = vocabulary_from_json(j.at("chars"));
  v.pos_coarse = vocabulary_from_json(j.at("pos_coarse"));
  v.pos_fine = vocabulary_from_json(j.at("pos_fine"));
  v.lemma = vocabulary_from_json(j.at("lemma"));
  for (const auto& l : j.at("label").get<std::vector<std::string>>()) v.label.add(l);
  if (v.label.size() != j.at("label").size()) throw FormatError("duplicate label");
  return v;
}

inline void save_checkpoint(const std::string& path, const Model& model) {
  json j;
  j["format"] = kCheckpointFormat;
  j["model"] = model_to_json(model.config());
  j["vocabularies"] = vocabularies_to_json(model.vocabularies());
  json params = json::object();
  for (const auto& name : model.params().names()) {
    const Parameter& p = model.params().get(name);
    params[name] = {{"shape", p.value.shape}, {"values", p.value.values}};
  }
  j["parameters"] = params;
  std::ofstream out(path);
  if (!out) throw FileError("cannot write checkpoint: " + path);
  out << j.dump(1) << '\n';
  if (!out) throw FileError("write failed: " + path);
}

struct LoadedModel {
  std::unique_ptr<Vocabularies> vocabs;
  std::unique_ptr<Model> model;
};

// Rebuilds the model from its stored configuration, then overwrites every
// parameter with the stored values. All shapes are checked before any value
// is assigned, so a bad file never leaves a half-loaded model behind.
inline LoadedModel load_checkpoint(const std::string& path,
                                   EmbeddingResources& resources) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint parse error in " + path + ": " + e.what());
  }
  check_keys(j, {"format", "model", "vocabularies", "parameters"}, "checkpoint");
  if (j.at("format").get<int>() != kCheckpointFormat) {
    throw FormatError("unsupported checkpoint format");
  }
  LoadedModel loaded;
  loaded.vocabs = std::make_unique<Vocabularies>(
      vocabularies_from_json(j.at("vocabularies")));
  ModelConfig cfg = model_from_json(j.at("model"));
  SeededRng rng(0);  // values are overwritten below; init draws are discarded
  loaded.model = std::make_unique<Model>(cfg, *loaded.vocabs, rng, resources);

  const json& params = j.at("parameters");
  ParameterStore& store = loaded.model->params();
  for (const auto& name : store.names()) {
    if (!params.contains(name)) throw FormatError("checkpoint missing parameter: " + name);
  }
  if (params.size() != store.names().size()) {
    for (auto it = params.begin(); it != params.end(); ++it) {
      bool known = false;
      for (const auto& name : store.names()) known = known || name == it.key();
      if (!known) throw FormatError("checkpoint has unknown parameter: " + it.key());
    }
  }
  for (const auto& name : store.names()) {
    const json& entry = params.at(name);
    check_keys(entry, {"shape", "values"}, "parameter " + name);
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    const auto values = entry.at("values").get<std::vector<Scalar>>();
    const Parameter& p = store.get(name);
    if (shape != p.value.shape || values.size() != p.value.size()) {
      throw DimensionError("shape mismatch for parameter " + name);
    }
  }
  for (const auto& name : store.names()) {
    store.get(name).value.values = params.at(name).at("values").get<std::vector<Scalar>>();
  }
  return loaded;
}

}  // namespace dar
