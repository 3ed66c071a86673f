#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dar/common.hpp"
#include "dar/rng.hpp"

namespace dar {

enum class Split { kTrain, kValidation, kTest };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split name: " + s);
}

// One annotated unit of a dialog: a speaker's token sequence with one label.
struct Segment {
  std::string dialog_id;
  std::size_t index = 0;
  std::string speaker;
  std::vector<std::string> words;
  std::vector<std::string> lemmas;      // optional, parallel to words
  std::vector<std::string> pos_coarse;  // optional, parallel to words
  std::vector<std::string> pos_fine;    // optional, parallel to words
  std::string label;

  bool has_lemmas() const { return !lemmas.empty(); }
  bool has_pos_coarse() const { return !pos_coarse.empty(); }
  bool has_pos_fine() const { return !pos_fine.empty(); }

  // Character stream: words joined by single spaces.
  std::string char_stream() const {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) out += ' ';
      out += words[i];
    }
    return out;
  }
};

struct Dialog {
  std::string id;
  std::vector<Segment> segments;
};

struct Corpus {
  std::vector<Dialog> dialogs;
  std::map<std::string, Split> split_of;  // dialog_id -> split
  std::string label_variant;              // e.g. "44", "42", "mrda5", "raw"

  const Dialog* find_dialog(const std::string& id) const {
    for (const auto& d : dialogs) {
      if (d.id == id) return &d;
    }
    return nullptr;
  }

  std::vector<const Dialog*> dialogs_in(Split s) const {
    std::vector<const Dialog*> out;
    for (const auto& d : dialogs) {
      if (split_of.at(d.id) == s) out.push_back(&d);
    }
    return out;
  }

  std::vector<const Segment*> segments_in(Split s) const {
    std::vector<const Segment*> out;
    for (const Dialog* d : dialogs_in(s)) {
      for (const Segment& seg : d->segments) out.push_back(&seg);
    }
    return out;
  }

  std::size_t total_segments() const {
    std::size_t n = 0;
    for (const auto& d : dialogs) n += d.segments.size();
    return n;
  }

  std::map<std::string, std::size_t> label_distribution() const {
    std::map<std::string, std::size_t> out;
    for (const auto& d : dialogs) {
      for (const auto& s : d.segments) ++out[s.label];
    }
    return out;
  }
};

// ---- serialization ----

inline nlohmann::json segment_to_json(const Segment& s) {
  nlohmann::json j;
  j["dialog_id"] = s.dialog_id;
  j["index"] = s.index;
  j["speaker"] = s.speaker;
  j["words"] = s.words;
  j["label"] = s.label;
  if (s.has_lemmas()) j["lemmas"] = s.lemmas;
  if (s.has_pos_coarse()) j["pos_coarse"] = s.pos_coarse;
  if (s.has_pos_fine()) j["pos_fine"] = s.pos_fine;
  return j;
}

inline void save_segments(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  for (const auto& d : corpus.dialogs) {
    for (const auto& s : d.segments) {
      out << segment_to_json(s).dump() << "\n";
    }
  }
}

inline void save_partition(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  for (const auto& d : corpus.dialogs) {
    out << d.id << "\t" << split_name(corpus.split_of.at(d.id)) << "\n";
  }
}

// Segments file: UTF-8, one JSON object per line. Partition file: lines of
// "dialog_id <tab-or-space> train|validation|test".
inline Corpus load_corpus(const std::string& segments_path,
                          const std::string& partition_path) {
  std::ifstream in(segments_path);
  if (!in) throw FormatError("cannot open segments file: " + segments_path);

  std::map<std::string, std::map<std::size_t, Segment>> by_dialog;
  std::vector<std::string> dialog_order;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(segments_path + ":" + std::to_string(line_no) +
                        ": invalid JSON: " + e.what());
    }
    Segment s;
    try {
      s.dialog_id = j.at("dialog_id").get<std::string>();
      s.index = j.at("index").get<std::size_t>();
      s.speaker = j.at("speaker").get<std::string>();
      s.words = j.at("words").get<std::vector<std::string>>();
      s.label = j.at("label").get<std::string>();
      if (j.contains("lemmas")) s.lemmas = j["lemmas"].get<std::vector<std::string>>();
      if (j.contains("pos_coarse")) s.pos_coarse = j["pos_coarse"].get<std::vector<std::string>>();
      if (j.contains("pos_fine")) s.pos_fine = j["pos_fine"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(segments_path + ":" + std::to_string(line_no) +
                        ": missing or mistyped field: " + e.what());
    }
    auto check_parallel = [&](const std::vector<std::string>& v, const char* name) {
      if (!v.empty() && v.size() != s.words.size()) {
        throw FormatError(segments_path + ":" + std::to_string(line_no) + ": " +
                          name + " length " + std::to_string(v.size()) +
                          " does not match words length " +
                          std::to_string(s.words.size()));
      }
    };
    check_parallel(s.lemmas, "lemmas");
    check_parallel(s.pos_coarse, "pos_coarse");
    check_parallel(s.pos_fine, "pos_fine");
    if (!by_dialog.count(s.dialog_id)) dialog_order.push_back(s.dialog_id);
    auto& dlg = by_dialog[s.dialog_id];
    if (dlg.count(s.index)) {
      throw FormatError(segments_path + ":" + std::to_string(line_no) +
                        ": duplicate segment (" + s.dialog_id + ", " +
                        std::to_string(s.index) + ")");
    }
    dlg.emplace(s.index, std::move(s));
  }

  Corpus corpus;
  for (const auto& id : dialog_order) {
    Dialog d;
    d.id = id;
    std::size_t expect = 0;
    for (auto& [idx, seg] : by_dialog[id]) {
      if (idx != expect) {
        throw FormatError("dialog " + id + ": segment indices not consecutive (expected " +
                          std::to_string(expect) + ", found " + std::to_string(idx) + ")");
      }
      ++expect;
      d.segments.push_back(std::move(seg));
    }
    if (d.segments.empty()) throw FormatError("dialog " + id + " is empty");
    corpus.dialogs.push_back(std::move(d));
  }

  std::ifstream part(partition_path);
  if (!part) throw FormatError("cannot open partition file: " + partition_path);
  line_no = 0;
  while (std::getline(part, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string id, split;
    if (!(is >> id >> split)) {
      throw FormatError(partition_path + ":" + std::to_string(line_no) +
                        ": expected 'dialog_id split'");
    }
    if (!by_dialog.count(id)) {
      throw FormatError(partition_path + ":" + std::to_string(line_no) +
                        ": partition references unknown dialog " + id);
    }
    if (corpus.split_of.count(id)) {
      throw FormatError(partition_path + ":" + std::to_string(line_no) +
                        ": dialog " + id + " assigned to multiple splits");
    }
    corpus.split_of[id] = parse_split(split);
  }
  for (const auto& d : corpus.dialogs) {
    if (!corpus.split_of.count(d.id)) {
      throw FormatError("dialog " + d.id + " has no split assignment");
    }
  }
  corpus.label_variant = "raw";
  return corpus;
}

// ---- label mappings ----

// The 44-tag SWBD-DAMSL clustered set: the 43 distribution-table labels plus
// the continuation tag.
inline const std::vector<std::string>& swda_44_labels() {
  static const std::vector<std::string> labels = {
      "Statement-Non-Opinion", "Acknowledgement", "Statement-Opinion",
      "Agreement", "Abandoned", "Appreciation", "Yes-No-Question",
      "Non-Verbal", "Yes Answer", "Conventional Closing", "Uninterpretable",
      "Wh-Question", "No Answer", "Response Acknowledgement", "Hedge",
      "Declarative Yes-No-Question", "Other", "Backchannel-Question",
      "Quotation", "Summarization", "Affirmative Non-Yes Answer",
      "Action Directive", "Collaborative Completion", "Repeat-Phrase",
      "Open-Question", "Rhetorical-Question", "Hold", "Reject",
      "Negative Non-No Answer", "Non-understanding", "Other Answer",
      "Conventional Opening", "Or-Clause", "Dispreferred Answers",
      "3rd-Party-Talk", "Offers / Options", "Self-talk", "Downplayer",
      "Maybe", "Tag-Question", "Declarative Wh-Question", "Apology",
      "Thanking", "Segment"};
  return labels;
}

inline constexpr const char* kDisruptionLabel = "Disruption";
inline constexpr const char* kMergedStatementLabel = "Statement";
inline constexpr const char* kContinuationLabel = "Segment";

// SwDA tag-set reductions. 44 = identity; 43 merges Abandoned and
// Uninterpretable into a single disruption class; 42 additionally merges each
// continuation segment into the nearest preceding same-speaker segment; 41
// additionally merges the two statement classes. A dialog-initial continuation
// with no preceding same-speaker segment is kept and relabeled to the
// disruption class.
inline Corpus map_swda_labels(const Corpus& corpus, int variant) {
  if (variant != 44 && variant != 43 && variant != 42 && variant != 41) {
    throw ConfigError("unknown SwDA label variant: " + std::to_string(variant));
  }
  static const std::set<std::string> known(swda_44_labels().begin(),
                                           swda_44_labels().end());
  Corpus out = corpus;
  out.label_variant = std::to_string(variant);
  for (auto& d : out.dialogs) {
    for (auto& s : d.segments) {
      if (!known.count(s.label) && s.label != kDisruptionLabel &&
          s.label != kMergedStatementLabel) {
        throw FormatError("segment (" + s.dialog_id + ", " +
                          std::to_string(s.index) +
                          "): label not in the 44-tag set: " + s.label);
      }
    }
  }
  if (variant == 44) return out;

  auto relabel = [&](const std::string& from, const std::string& to) {
    for (auto& d : out.dialogs) {
      for (auto& s : d.segments) {
        if (s.label == from) s.label = to;
      }
    }
  };
  relabel("Abandoned", kDisruptionLabel);
  relabel("Uninterpretable", kDisruptionLabel);
  if (variant == 43) return out;

  // variant <= 42: merge continuation segments into the nearest preceding
  // same-speaker segment; words and optional streams are concatenated and the
  // earlier segment keeps its label.
  for (auto& d : out.dialogs) {
    std::vector<Segment> merged;
    for (auto& s : d.segments) {
      if (s.label == kContinuationLabel) {
        Segment* target = nullptr;
        for (auto it = merged.rbegin(); it != merged.rend(); ++it) {
          if (it->speaker == s.speaker) {
            target = &*it;
            break;
          }
        }
        if (target) {
          auto append = [](std::vector<std::string>& dst,
                           const std::vector<std::string>& src) {
            dst.insert(dst.end(), src.begin(), src.end());
          };
          append(target->words, s.words);
          if (target->has_lemmas() || s.has_lemmas()) append(target->lemmas, s.lemmas);
          if (target->has_pos_coarse() || s.has_pos_coarse()) append(target->pos_coarse, s.pos_coarse);
          if (target->has_pos_fine() || s.has_pos_fine()) append(target->pos_fine, s.pos_fine);
          continue;
        }
        // dialog-initial continuation: keep as its own segment, relabeled
        s.label = kDisruptionLabel;
      }
      merged.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < merged.size(); ++i) merged[i].index = i;
    d.segments = std::move(merged);
  }
  if (variant == 42) return out;

  relabel("Statement-Opinion", kMergedStatementLabel);
  relabel("Statement-Non-Opinion", kMergedStatementLabel);
  return out;
}

inline const std::vector<std::string>& mrda_5_labels() {
  static const std::vector<std::string> labels = {
      "Statement", "Disruption", "Backchannel", "Filler", "Question"};
  return labels;
}

// Drops unlabeled segments (empty label or "Unlabeled"), re-sequences indices
// and removes dialogs left empty.
inline Corpus filter_mrda(const Corpus& corpus) {
  static const std::set<std::string> known(mrda_5_labels().begin(),
                                           mrda_5_labels().end());
  Corpus out;
  out.label_variant = "mrda5";
  for (const auto& d : corpus.dialogs) {
    Dialog nd;
    nd.id = d.id;
    for (const auto& s : d.segments) {
      if (s.label.empty() || s.label == "Unlabeled") continue;
      if (!known.count(s.label)) {
        throw FormatError("segment (" + s.dialog_id + ", " +
                          std::to_string(s.index) +
                          "): unknown MRDA label: " + s.label);
      }
      Segment ns = s;
      ns.index = nd.segments.size();
      nd.segments.push_back(std::move(ns));
    }
    if (!nd.segments.empty()) {
      out.split_of[nd.id] = corpus.split_of.at(nd.id);
      out.dialogs.push_back(std::move(nd));
    }
  }
  return out;
}

// Generic two-column from -> to relabeling; lines "from<TAB>to".
inline Corpus map_labels_from_table(const Corpus& corpus,
                                    const std::string& table_path) {
  std::ifstream in(table_path);
  if (!in) throw FormatError("cannot open mapping table: " + table_path);
  std::map<std::string, std::string> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(table_path + ":" + std::to_string(line_no) +
                        ": expected 'from<TAB>to'");
    }
    table[line.substr(0, tab)] = line.substr(tab + 1);
  }
  Corpus out = corpus;
  out.label_variant = "custom";
  for (auto& d : out.dialogs) {
    for (auto& s : d.segments) {
      auto it = table.find(s.label);
      if (it != table.end()) s.label = it->second;
    }
  }
  return out;
}

// ---- vocabularies ----

inline constexpr std::size_t kPadIndex = 0;
inline constexpr std::size_t kUnkIndex = 1;

// Token <-> index bijection with reserved padding (0) and unknown (1) slots.
class Vocabulary {
 public:
  Vocabulary() {
    tokens_ = {"<pad>", "<unk>"};
    index_["<pad>"] = kPadIndex;
    index_["<unk>"] = kUnkIndex;
  }

  static Vocabulary from_tokens(const std::set<std::string>& tokens) {
    Vocabulary v;
    for (const auto& t : tokens) v.add(t);
    return v;
  }

  void add(const std::string& token) {
    if (index_.count(token)) return;
    index_[token] = tokens_.size();
    tokens_.push_back(token);
  }

  std::size_t size() const { return tokens_.size(); }

  std::size_t lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkIndex : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Label <-> index bijection; no reserved slots. C defines the one-hot
// dimensionality used by context features.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;

  static LabelVocabulary from_labels(const std::set<std::string>& labels) {
    LabelVocabulary v;
    for (const auto& l : labels) v.add(l);
    return v;
  }

  void add(const std::string& label) {
    if (index_.count(label)) return;
    index_[label] = labels_.size();
    labels_.push_back(label);
  }

  std::size_t size() const { return labels_.size(); }

  std::size_t lookup(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw LookupError("unknown label: " + label);
    return it->second;
  }

  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Vocabularies {
  Vocabulary word;
  Vocabulary chars;
  Vocabulary pos_coarse;
  Vocabulary pos_fine;
  Vocabulary lemma;
  LabelVocabulary label;
};

// Token vocabularies come from the training split only (sorted, so a rerun on
// the same inputs is byte-identical); the label vocabulary spans all splits.
inline Vocabularies build_vocabularies(const Corpus& corpus) {
  auto train = corpus.segments_in(Split::kTrain);
  if (train.empty()) throw FormatError("empty training split");
  std::set<std::string> words, chars, coarse, fine, lemmas, labels;
  for (const Segment* s : train) {
    for (const auto& w : s->words) words.insert(w);
    for (char c : s->char_stream()) chars.insert(std::string(1, c));
    for (const auto& t : s->pos_coarse) coarse.insert(t);
    for (const auto& t : s->pos_fine) fine.insert(t);
    for (const auto& l : s->lemmas) lemmas.insert(l);
  }
  for (const auto& d : corpus.dialogs) {
    for (const auto& s : d.segments) labels.insert(s.label);
  }
  Vocabularies v;
  v.word = Vocabulary::from_tokens(words);
  v.chars = Vocabulary::from_tokens(chars);
  v.pos_coarse = Vocabulary::from_tokens(coarse);
  v.pos_fine = Vocabulary::from_tokens(fine);
  v.lemma = Vocabulary::from_tokens(lemmas);
  v.label = LabelVocabulary::from_labels(labels);
  return v;
}

// ---- batches ----

enum class TokenLevel { kWords, kChars, kLemmas, kPosCoarse, kPosFine };

inline std::string level_name(TokenLevel l) {
  switch (l) {
    case TokenLevel::kWords: return "words";
    case TokenLevel::kChars: return "chars";
    case TokenLevel::kLemmas: return "lemmas";
    case TokenLevel::kPosCoarse: return "pos_coarse";
    case TokenLevel::kPosFine: return "pos_fine";
  }
  return "?";
}

inline TokenLevel parse_level(const std::string& s) {
  if (s == "words") return TokenLevel::kWords;
  if (s == "chars") return TokenLevel::kChars;
  if (s == "lemmas") return TokenLevel::kLemmas;
  if (s == "pos_coarse") return TokenLevel::kPosCoarse;
  if (s == "pos_fine") return TokenLevel::kPosFine;
  throw ConfigError("unknown token level: " + s);
}

// Tokens of a segment at a given level, as strings.
inline std::vector<std::string> level_tokens(const Segment& s, TokenLevel level) {
  switch (level) {
    case TokenLevel::kWords:
      return s.words;
    case TokenLevel::kChars: {
      std::vector<std::string> out;
      for (char c : s.char_stream()) out.emplace_back(1, c);
      return out;
    }
    case TokenLevel::kLemmas:
      if (!s.has_lemmas()) {
        throw ConfigError("segment (" + s.dialog_id + ", " +
                          std::to_string(s.index) + ") has no lemmas");
      }
      return s.lemmas;
    case TokenLevel::kPosCoarse:
      if (!s.has_pos_coarse()) {
        throw ConfigError("segment (" + s.dialog_id + ", " +
                          std::to_string(s.index) + ") has no pos_coarse");
      }
      return s.pos_coarse;
    case TokenLevel::kPosFine:
      if (!s.has_pos_fine()) {
        throw ConfigError("segment (" + s.dialog_id + ", " +
                          std::to_string(s.index) + ") has no pos_fine");
      }
      return s.pos_fine;
  }
  throw ConfigError("unknown token level");
}

// One level of a padded batch: right-padded index rows plus masks and true
// lengths.
struct PaddedLevel {
  std::vector<std::vector<std::size_t>> indices;  // batch x max_len
  std::vector<std::vector<bool>> mask;            // batch x max_len
  std::vector<std::size_t> lengths;
  std::size_t max_len = 0;
};

inline PaddedLevel pad_level(const std::vector<const Segment*>& segments,
                             TokenLevel level, const Vocabulary& vocab) {
  PaddedLevel out;
  std::vector<std::vector<std::size_t>> rows;
  for (const Segment* s : segments) {
    std::vector<std::size_t> row;
    for (const auto& t : level_tokens(*s, level)) row.push_back(vocab.lookup(t));
    out.max_len = std::max(out.max_len, row.size());
    out.lengths.push_back(row.size());
    rows.push_back(std::move(row));
  }
  for (auto& row : rows) {
    std::vector<bool> m(out.max_len, false);
    for (std::size_t i = 0; i < row.size(); ++i) m[i] = true;
    row.resize(out.max_len, kPadIndex);
    out.indices.push_back(std::move(row));
    out.mask.push_back(std::move(m));
  }
  return out;
}

struct Batch {
  std::vector<const Segment*> segments;
  std::map<TokenLevel, PaddedLevel> levels;
};

// Deterministically shuffled padded batches over one split. The shuffle order
// is a pure function of the rng state. Levels are padded only when requested.
inline std::vector<Batch> batches(const Corpus& corpus, Split split,
                                  std::size_t batch_size, SeededRng& rng,
                                  const Vocabularies* vocabs = nullptr,
                                  const std::vector<TokenLevel>& levels = {}) {
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  auto segments = corpus.segments_in(split);
  rng.shuffle(segments);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < segments.size(); start += batch_size) {
    Batch b;
    const std::size_t end = std::min(start + batch_size, segments.size());
    b.segments.assign(segments.begin() + static_cast<std::ptrdiff_t>(start),
                      segments.begin() + static_cast<std::ptrdiff_t>(end));
    if (vocabs) {
      for (TokenLevel lvl : levels) {
        const Vocabulary* v = nullptr;
        switch (lvl) {
          case TokenLevel::kWords: v = &vocabs->word; break;
          case TokenLevel::kChars: v = &vocabs->chars; break;
          case TokenLevel::kLemmas: v = &vocabs->lemma; break;
          case TokenLevel::kPosCoarse: v = &vocabs->pos_coarse; break;
          case TokenLevel::kPosFine: v = &vocabs->pos_fine; break;
        }
        b.levels[lvl] = pad_level(b.segments, lvl, *v);
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace dar
