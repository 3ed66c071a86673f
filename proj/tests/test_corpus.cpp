#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dar/corpus.hpp"

using namespace dar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dar-corpus-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& content) const {
    const std::string p = (path / name).string();
    std::ofstream f(p);
    f << content;
    return p;
  }
};

std::string seg_line(const std::string& dialog, std::size_t index,
                     const std::string& speaker,
                     const std::vector<std::string>& words,
                     const std::string& label) {
  nlohmann::json j;
  j["dialog_id"] = dialog;
  j["index"] = index;
  j["speaker"] = speaker;
  j["words"] = words;
  j["label"] = label;
  return j.dump() + "\n";
}

Corpus tiny_corpus(const TempDir& dir) {
  std::string segs;
  segs += seg_line("d1", 0, "A", {"hello", "there"}, "Greeting");
  segs += seg_line("d1", 1, "B", {"hi"}, "Greeting");
  segs += seg_line("d1", 2, "A", {"how", "are", "you"}, "Question");
  segs += seg_line("d2", 0, "C", {"fine", "thanks"}, "Answer");
  segs += seg_line("d3", 0, "A", {"bye"}, "Closing");
  const std::string part = "d1\ttrain\nd2 validation\nd3\ttest\n";
  return load_corpus(dir.file("segs.jsonl", segs), dir.file("part.txt", part));
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("load_corpus parses dialogs, splits and optional streams") {
  TempDir dir;
  Corpus c = tiny_corpus(dir);
  REQUIRE(c.dialogs.size() == 3);
  REQUIRE(c.dialogs[0].segments.size() == 3);
  REQUIRE(c.split_of.at("d1") == Split::kTrain);
  REQUIRE(c.split_of.at("d2") == Split::kValidation);
  REQUIRE(c.split_of.at("d3") == Split::kTest);
  REQUIRE(c.total_segments() == 5);
  REQUIRE(c.dialogs[0].segments[2].words ==
          std::vector<std::string>{"how", "are", "you"});
  REQUIRE(c.dialogs[0].segments[2].char_stream() == "how are you");
  REQUIRE(c.label_distribution().at("Greeting") == 2);
}

TEST_CASE("load_corpus rejects malformed input with file and line") {
  TempDir dir;
  const std::string part = "d1\ttrain\n";

  SECTION("invalid JSON") {
    const std::string p = dir.file("bad.jsonl", "{not json\n");
    try {
      load_corpus(p, dir.file("p1.txt", part));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      REQUIRE(std::string(e.what()).find(":1:") != std::string::npos);
    }
  }
  SECTION("missing field") {
    REQUIRE_THROWS_AS(
        load_corpus(dir.file("m.jsonl", "{\"dialog_id\":\"d1\",\"index\":0}\n"),
                    dir.file("p2.txt", part)),
        FormatError);
  }
  SECTION("non-consecutive indices") {
    std::string segs = seg_line("d1", 0, "A", {"a"}, "X") +
                       seg_line("d1", 2, "A", {"b"}, "X");
    REQUIRE_THROWS_AS(
        load_corpus(dir.file("nc.jsonl", segs), dir.file("p3.txt", part)),
        FormatError);
  }
  SECTION("duplicate segment") {
    std::string segs = seg_line("d1", 0, "A", {"a"}, "X") +
                       seg_line("d1", 0, "A", {"b"}, "X");
    REQUIRE_THROWS_AS(
        load_corpus(dir.file("dup.jsonl", segs), dir.file("p4.txt", part)),
        FormatError);
  }
  SECTION("mismatched parallel stream") {
    nlohmann::json j;
    j["dialog_id"] = "d1";
    j["index"] = 0;
    j["speaker"] = "A";
    j["words"] = {"a", "b"};
    j["label"] = "X";
    j["lemmas"] = {"a"};
    REQUIRE_THROWS_AS(load_corpus(dir.file("par.jsonl", j.dump() + "\n"),
                                  dir.file("p5.txt", part)),
                      FormatError);
  }
  SECTION("partition names unknown dialog") {
    std::string segs = seg_line("d1", 0, "A", {"a"}, "X");
    REQUIRE_THROWS_AS(load_corpus(dir.file("u.jsonl", segs),
                                  dir.file("p6.txt", "d1\ttrain\nzz\ttest\n")),
                      FormatError);
  }
  SECTION("dialog without split assignment") {
    std::string segs = seg_line("d1", 0, "A", {"a"}, "X") +
                       seg_line("d2", 0, "B", {"b"}, "X");
    REQUIRE_THROWS_AS(
        load_corpus(dir.file("n.jsonl", segs), dir.file("p7.txt", part)),
        FormatError);
  }
}

TEST_CASE("save and reload round-trips the corpus byte-identically") {
  TempDir dir;
  Corpus c = tiny_corpus(dir);
  const std::string s1 = (dir.path / "out1.jsonl").string();
  const std::string p1 = (dir.path / "out1.txt").string();
  save_segments(c, s1);
  save_partition(c, p1);
  Corpus c2 = load_corpus(s1, p1);
  const std::string s2 = (dir.path / "out2.jsonl").string();
  const std::string p2 = (dir.path / "out2.txt").string();
  save_segments(c2, s2);
  save_partition(c2, p2);
  REQUIRE(slurp(s1) == slurp(s2));
  REQUIRE(slurp(p1) == slurp(p2));
}

TEST_CASE("the clustered tag list holds 44 labels including the continuation tag") {
  REQUIRE(swda_44_labels().size() == 44);
  REQUIRE(std::count(swda_44_labels().begin(), swda_44_labels().end(),
                     "Segment") == 1);
  REQUIRE(mrda_5_labels().size() == 5);
}

namespace {

Corpus label_corpus(const TempDir& dir, const std::vector<std::string>& labels,
                    const std::vector<std::string>& speakers) {
  std::string segs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    segs += seg_line("d", i, speakers[i], {"w" + std::to_string(i)}, labels[i]);
  }
  return load_corpus(dir.file("lab.jsonl", segs), dir.file("lab.txt", "d\ttrain\n"));
}

}  // namespace

TEST_CASE("swda mapping variant 44 is the identity") {
  TempDir dir;
  Corpus c = label_corpus(dir, {"Abandoned", "Hedge"}, {"A", "B"});
  Corpus m = map_swda_labels(c, 44);
  REQUIRE(m.dialogs[0].segments[0].label == "Abandoned");
  REQUIRE(m.label_variant == "44");
}

TEST_CASE("variant 43 merges the two disruption-like tags") {
  TempDir dir;
  Corpus c = label_corpus(dir, {"Abandoned", "Uninterpretable", "Hedge"},
                          {"A", "B", "A"});
  Corpus m = map_swda_labels(c, 43);
  REQUIRE(m.dialogs[0].segments[0].label == "Disruption");
  REQUIRE(m.dialogs[0].segments[1].label == "Disruption");
  REQUIRE(m.dialogs[0].segments[2].label == "Hedge");
}

TEST_CASE("variant 42 merges continuations into the nearest preceding same-speaker segment") {
  TempDir dir;
  Corpus c = label_corpus(
      dir, {"Statement-Opinion", "Hedge", "Segment"}, {"A", "B", "A"});
  Corpus m = map_swda_labels(c, 42);
  REQUIRE(m.dialogs[0].segments.size() == 2);
  // the continuation's words joined onto the speaker-A segment, label kept
  REQUIRE(m.dialogs[0].segments[0].words ==
          std::vector<std::string>{"w0", "w2"});
  REQUIRE(m.dialogs[0].segments[0].label == "Statement-Opinion");
  REQUIRE(m.dialogs[0].segments[1].index == 1);  // re-sequenced
}

TEST_CASE("a dialog-initial continuation becomes a disruption segment") {
  TempDir dir;
  Corpus c = label_corpus(dir, {"Segment", "Hedge"}, {"A", "B"});
  Corpus m = map_swda_labels(c, 42);
  REQUIRE(m.dialogs[0].segments.size() == 2);
  REQUIRE(m.dialogs[0].segments[0].label == "Disruption");
}

TEST_CASE("variant 41 additionally merges both statement tags") {
  TempDir dir;
  Corpus c = label_corpus(
      dir, {"Statement-Opinion", "Statement-Non-Opinion", "Hedge"},
      {"A", "B", "A"});
  Corpus m = map_swda_labels(c, 41);
  REQUIRE(m.dialogs[0].segments[0].label == "Statement");
  REQUIRE(m.dialogs[0].segments[1].label == "Statement");
  REQUIRE(m.dialogs[0].segments[2].label == "Hedge");
}

TEST_CASE("swda mapping rejects labels outside the tag set") {
  TempDir dir;
  Corpus c = label_corpus(dir, {"NotATag"}, {"A"});
  REQUIRE_THROWS_AS(map_swda_labels(c, 43), FormatError);
  REQUIRE_THROWS_AS(map_swda_labels(c, 40), ConfigError);
}

TEST_CASE("mrda filter drops unlabeled segments and re-sequences") {
  TempDir dir;
  std::string segs;
  segs += seg_line("d", 0, "A", {"a"}, "Statement");
  segs += seg_line("d", 1, "B", {"b"}, "Unlabeled");
  segs += seg_line("d", 2, "A", {"c"}, "Question");
  segs += seg_line("e", 0, "A", {"x"}, "Unlabeled");
  Corpus c = load_corpus(dir.file("m.jsonl", segs),
                         dir.file("m.txt", "d\ttrain\ne\ttest\n"));
  Corpus f = filter_mrda(c);
  REQUIRE(f.dialogs.size() == 1);  // dialog e became empty and was dropped
  REQUIRE(f.dialogs[0].segments.size() == 2);
  REQUIRE(f.dialogs[0].segments[1].words == std::vector<std::string>{"c"});
  REQUIRE(f.dialogs[0].segments[1].index == 1);
  REQUIRE(f.label_variant == "mrda5");
}

TEST_CASE("generic mapping table relabels listed tags only") {
  TempDir dir;
  Corpus c = label_corpus(dir, {"Foo", "Hedge"}, {"A", "B"});
  const std::string table = dir.file("map.tsv", "Foo\tBar\n");
  Corpus m = map_labels_from_table(c, table);
  REQUIRE(m.dialogs[0].segments[0].label == "Bar");
  REQUIRE(m.dialogs[0].segments[1].label == "Hedge");
}

TEST_CASE("vocabularies come from the training split, labels from all splits") {
  TempDir dir;
  Corpus c = tiny_corpus(dir);
  Vocabularies v = build_vocabularies(c);
  // reserved slots
  REQUIRE(v.word.token(kPadIndex) == "<pad>");
  REQUIRE(v.word.token(kUnkIndex) == "<unk>");
  // train-split words are present, validation/test words are unknown
  REQUIRE(v.word.contains("hello"));
  REQUIRE_FALSE(v.word.contains("fine"));
  REQUIRE(v.word.lookup("fine") == kUnkIndex);
  // sorted insertion order after the reserved slots
  for (std::size_t i = 3; i < v.word.size(); ++i) {
    REQUIRE(v.word.token(i - 1) < v.word.token(i));
  }
  // labels span every split
  REQUIRE_NOTHROW(v.label.lookup("Answer"));
  REQUIRE_NOTHROW(v.label.lookup("Closing"));
  REQUIRE(v.label.size() == 4);
  // char vocabulary covers the train characters plus reserved slots
  REQUIRE(v.chars.contains("h"));
  REQUIRE(v.chars.contains(" "));
}

TEST_CASE("vocabulary construction is reproducible") {
  TempDir dir;
  Corpus c = tiny_corpus(dir);
  Vocabularies v1 = build_vocabularies(c);
  Vocabularies v2 = build_vocabularies(c);
  REQUIRE(v1.word.tokens() == v2.word.tokens());
  REQUIRE(v1.label.labels() == v2.label.labels());
}

TEST_CASE("pad_level right-pads with the padding index and records lengths") {
  TempDir dir;
  Corpus c = tiny_corpus(dir);
  Vocabularies v = build_vocabularies(c);
  auto segs = c.segments_in(Split::kTrain);
  PaddedLevel p = pad_level(segs, TokenLevel::kWords, v.word);
  REQUIRE(p.max_len == 3);
  REQUIRE(p.lengths == std::vector<std::size_t>{2, 1, 3});
  REQUIRE(p.indices[1][1] == kPadIndex);
  REQUIRE(p.indices[1][2] == kPadIndex);
  REQUIRE(p.mask[1] == std::vector<bool>{true, false, false});
  REQUIRE(p.indices[0][0] == v.word.lookup("hello"));
}

TEST_CASE("batches cover the split once and shuffle deterministically per seed") {
  TempDir dir;
  Corpus c = tiny_corpus(dir);
  SeededRng r1(5), r2(5), r3(6);
  auto b1 = batches(c, Split::kTrain, 2, r1);
  auto b2 = batches(c, Split::kTrain, 2, r2);
  REQUIRE(b1.size() == 2);
  REQUIRE(b1[0].segments.size() == 2);
  REQUIRE(b1[1].segments.size() == 1);
  std::size_t total = 0;
  for (const auto& b : b1) total += b.segments.size();
  REQUIRE(total == 3);
  for (std::size_t i = 0; i < b1.size(); ++i) {
    for (std::size_t j = 0; j < b1[i].segments.size(); ++j) {
      REQUIRE(b1[i].segments[j] == b2[i].segments[j]);
    }
  }
  auto b3 = batches(c, Split::kTrain, 1, r3);
  REQUIRE(b3.size() == 3);
}

TEST_CASE("level access errors distinguish missing streams") {
  Segment s;
  s.dialog_id = "d";
  s.words = {"a"};
  REQUIRE_THROWS_AS(level_tokens(s, TokenLevel::kLemmas), ConfigError);
  REQUIRE_THROWS_AS(level_tokens(s, TokenLevel::kPosCoarse), ConfigError);
  REQUIRE(level_tokens(s, TokenLevel::kWords) == std::vector<std::string>{"a"});
}
