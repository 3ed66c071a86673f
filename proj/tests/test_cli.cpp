#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "dar/checkpoint.hpp"
#include "dar/cli.hpp"

using namespace dar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("dar-cli-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    const std::string p = (path / name).string();
    std::ofstream f(p);
    f << content;
    return p;
  }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string seg_line(const std::string& dialog, std::size_t index,
                     const std::string& speaker,
                     const std::vector<std::string>& words,
                     const std::string& label) {
  json j;
  j["dialog_id"] = dialog;
  j["index"] = index;
  j["speaker"] = speaker;
  j["words"] = words;
  if (!label.empty()) j["label"] = label;
  return j.dump() + "\n";
}

std::string toy_segments() {
  std::string s;
  for (const char* id : {"tr", "va", "te"}) {
    s += seg_line(id, 0, "A", {"yes"}, "Pos");
    s += seg_line(id, 1, "B", {"no"}, "Neg");
    s += seg_line(id, 2, "A", {"yes", "yes"}, "Pos");
  }
  return s;
}

std::string toy_partition() { return "tr\ttrain\nva\tvalidation\nte\ttest\n"; }

std::string toy_config(const TempDir& dir, const std::string& segments,
                       const std::string& partition, const std::string& out_dir,
                       const std::string& extra_model = "") {
  std::string contexts = "[]";
  std::ostringstream cfg;
  cfg << R"({
  "name": "toy",
  "corpus": {"segments": ")" << segments << R"(", "partition": ")" << partition
      << R"(", "variant": "none"},
  "model": {
    "channels": [{"level": "words", "embedding": "trainable", "dim": 4,
                  "encoder": {"type": "maxpool"}}],
    "contexts": )" << (extra_model.empty() ? "[]" : extra_model) << R"(,
    "reduction_dim": 4,
    "dropout": 0.0
  },
  "train": {"batch_size": 8, "patience": 5, "max_epochs": 30, "runs": 1,
            "seed": 1, "lr": 0.05},
  "eval": {"split": "test", "mode": "none"},
  "output": ")" << out_dir << R"("
})";
  return dir.file("exp.json", cfg.str());
}

int run(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("experiment configs reject unknown keys everywhere") {
  json good = json::parse(R"({
    "corpus": {"segments": "s", "partition": "p", "variant": "none"},
    "model": {"channels": [{"level": "words", "encoder": {"type": "maxpool"}}]}
  })");
  REQUIRE_NOTHROW(experiment_from_json(good));

  json top = good;
  top["surprise"] = 1;
  REQUIRE_THROWS_AS(experiment_from_json(top), ConfigError);

  json nested = good;
  nested["model"]["channels"][0]["encoder"]["windoes"] = {1, 2};
  REQUIRE_THROWS_AS(experiment_from_json(nested), ConfigError);

  json ctx = good;
  ctx["model"]["contexts"] = {{{"source", "labels_preceding"}, {"scope", 1},
                               {"repr", "flat"}, {"scpoe", 2}}};
  REQUIRE_THROWS_AS(experiment_from_json(ctx), ConfigError);
}

TEST_CASE("model and context configs round-trip through json") {
  ModelConfig m;
  ChannelConfig ch;
  ch.level = TokenLevel::kChars;
  ch.encoder.kind = EncoderKind::kParallelCnn;
  ch.encoder.windows = {3, 5, 7};
  m.channels.push_back(ch);
  ChannelConfig wd;
  wd.level = TokenLevel::kWords;
  wd.encoder.kind = EncoderKind::kRcnn;
  m.channels.push_back(wd);
  ContextConfig ctx;
  ctx.source = ContextSource::kTurnTaking;
  ctx.scope = kScopeAll;
  ctx.repr = ContextRepr::kSummary;
  m.contexts.push_back(ctx);
  ModelConfig back = model_from_json(model_to_json(m));
  REQUIRE(back.channels.size() == 2);
  REQUIRE(back.channels[0].encoder.windows == std::vector<std::size_t>{3, 5, 7});
  REQUIRE(back.channels[1].encoder.kind == EncoderKind::kRcnn);
  REQUIRE(back.contexts[0].scope == kScopeAll);
  REQUIRE(back.contexts[0].repr == ContextRepr::kSummary);
}

TEST_CASE("checkpoints restore an equivalent model atomically") {
  TempDir dir;
  Corpus c = load_corpus(dir.file("s.jsonl", toy_segments()),
                         dir.file("p.txt", toy_partition()));
  Vocabularies v = build_vocabularies(c);
  EmbeddingResources res;
  ModelConfig cfg;
  ChannelConfig ch;
  ch.dim = 4;
  ch.encoder.kind = EncoderKind::kMaxPool;
  cfg.channels.push_back(ch);
  cfg.reduction_dim = 4;
  SeededRng rng(7);
  Model model(cfg, v, rng, res);

  const std::string path = dir.sub("m.checkpoint.json");
  save_checkpoint(path, model);
  LoadedModel loaded = load_checkpoint(path, res);
  REQUIRE(loaded.model->num_classes() == model.num_classes());
  for (const auto& name : model.params().names()) {
    REQUIRE(loaded.model->params().get(name).value.values ==
            model.params().get(name).value.values);
  }
  // identical predictions
  Model::ContextInputs no_ctx;
  no_ctx.zero = true;
  const Segment& seg = c.dialogs[0].segments[0];
  REQUIRE(loaded.model->predict(seg, no_ctx) == model.predict(seg, no_ctx));

  // corrupting one shape fails the load without partial state
  json j = json::parse(slurp(path));
  j["parameters"]["reduction.b"]["shape"] = {5};
  dir.file("bad.checkpoint.json", j.dump());
  REQUIRE_THROWS_AS(load_checkpoint(dir.sub("bad.checkpoint.json"), res),
                    DimensionError);
  json missing = json::parse(slurp(path));
  missing["parameters"].erase("output.w");
  dir.file("miss.checkpoint.json", missing.dump());
  REQUIRE_THROWS_AS(load_checkpoint(dir.sub("miss.checkpoint.json"), res),
                    FormatError);
}

TEST_CASE("prepare writes mapped corpus, vocabularies and a distribution summary") {
  TempDir dir;
  const std::string segs = dir.file("s.jsonl", toy_segments());
  const std::string part = dir.file("p.txt", toy_partition());
  std::string out_text;
  const int code = run({"prepare", "--segments", segs, "--partition", part,
                        "--variant", "none", "--out", dir.sub("prep")},
                       &out_text);
  REQUIRE(code == 0);
  REQUIRE(fs::exists(dir.sub("prep") + "/segments.jsonl"));
  REQUIRE(fs::exists(dir.sub("prep") + "/vocab.words.txt"));
  REQUIRE(fs::exists(dir.sub("prep") + "/labels.txt"));
  const std::string summary = slurp(dir.sub("prep") + "/summary.tsv");
  REQUIRE(summary.find("label\tcount\tpercent") != std::string::npos);
  REQUIRE(summary.find("Pos\t6\t66.67") != std::string::npos);
  REQUIRE(out_text.find("2 classes") != std::string::npos);

  // rerun is byte-identical
  const std::string first = slurp(dir.sub("prep") + "/segments.jsonl") +
                            slurp(dir.sub("prep") + "/summary.tsv") +
                            slurp(dir.sub("prep") + "/vocab.words.txt");
  REQUIRE(run({"prepare", "--segments", segs, "--partition", part, "--variant",
               "none", "--out", dir.sub("prep")}) == 0);
  const std::string second = slurp(dir.sub("prep") + "/segments.jsonl") +
                             slurp(dir.sub("prep") + "/summary.tsv") +
                             slurp(dir.sub("prep") + "/vocab.words.txt");
  REQUIRE(first == second);
}

TEST_CASE("prepare with variant mrda5 yields the five-class summary") {
  TempDir dir;
  std::string segs;
  const std::vector<std::string> labels{"Statement", "Disruption", "Backchannel",
                                        "Filler", "Question", "Unlabeled"};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    segs += seg_line("d", i, i % 2 ? "A" : "B", {"w" + std::to_string(i)}, labels[i]);
  }
  const std::string p = dir.file("p.txt", "d\ttrain\n");
  std::string out_text;
  const int code = run({"prepare", "--segments", dir.file("s.jsonl", segs),
                        "--partition", p, "--variant", "mrda5", "--out",
                        dir.sub("prep")},
                       &out_text);
  REQUIRE(code == 0);
  REQUIRE(out_text.find("5 classes") != std::string::npos);
  REQUIRE(out_text.find("Unlabeled") == std::string::npos);
}

TEST_CASE("prepare with a missing partition file exits 2 and names the path") {
  TempDir dir;
  const std::string segs = dir.file("s.jsonl", toy_segments());
  std::string err_text;
  const int code = run({"prepare", "--segments", segs, "--partition",
                        dir.sub("nope.txt"), "--variant", "none", "--out",
                        dir.sub("prep")},
                       nullptr, &err_text);
  REQUIRE(code == 2);
  REQUIRE(err_text.find("nope.txt") != std::string::npos);
}

TEST_CASE("train produces checkpoints, metrics and a report; evaluate reuses them") {
  TempDir dir;
  const std::string segs = dir.file("s.jsonl", toy_segments());
  const std::string part = dir.file("p.txt", toy_partition());
  const std::string cfg = toy_config(dir, segs, part, dir.sub("runs"));

  std::string out_text;
  REQUIRE(run({"train", "--config", cfg, "--runs", "1", "--seed", "7"},
              &out_text) == 0);
  REQUIRE(fs::exists(dir.sub("runs") + "/run0.checkpoint.json"));
  REQUIRE(fs::exists(dir.sub("runs") + "/run0.metrics.tsv"));
  REQUIRE(fs::exists(dir.sub("runs") + "/toy.report.json"));
  REQUIRE(fs::exists(dir.sub("runs") + "/report.tsv"));
  const std::string metrics = slurp(dir.sub("runs") + "/run0.metrics.tsv");
  REQUIRE(metrics.find("epoch\ttrain_loss\tval_accuracy") != std::string::npos);
  REQUIRE(out_text.find("toy") != std::string::npos);

  // gold-mode evaluation is pure: two invocations agree byte for byte
  std::string e1, e2;
  REQUIRE(run({"evaluate", "--checkpoint", dir.sub("runs") + "/run0.checkpoint.json",
               "--config", cfg, "--split", "test", "--mode", "gold"},
              &e1) == 0);
  REQUIRE(run({"evaluate", "--checkpoint", dir.sub("runs") + "/run0.checkpoint.json",
               "--config", cfg, "--split", "test", "--mode", "gold"},
              &e2) == 0);
  REQUIRE(e1 == e2);
  REQUIRE(e1.find("accuracy\ttest\tgold") != std::string::npos);
}

TEST_CASE("training twice with the same seed gives identical reports") {
  TempDir dir;
  const std::string segs = dir.file("s.jsonl", toy_segments());
  const std::string part = dir.file("p.txt", toy_partition());
  const std::string cfg = toy_config(dir, segs, part, dir.sub("r1"));
  REQUIRE(run({"train", "--config", cfg, "--seed", "3"}) == 0);
  const std::string report1 = slurp(dir.sub("r1") + "/toy.report.json");
  REQUIRE(run({"train", "--config", cfg, "--seed", "3", "--out", dir.sub("r2")}) == 0);
  const std::string report2 = slurp(dir.sub("r2") + "/toy.report.json");
  REQUIRE(report1 == report2);
}

TEST_CASE("an unknown config key aborts training before any output") {
  TempDir dir;
  const std::string segs = dir.file("s.jsonl", toy_segments());
  const std::string part = dir.file("p.txt", toy_partition());
  std::string cfg_text = slurp(toy_config(dir, segs, part, dir.sub("runs")));
  json j = json::parse(cfg_text);
  j["train"]["learning_rate_schedule"] = "cosine";
  const std::string bad = dir.file("bad.json", j.dump());
  std::string err_text;
  REQUIRE(run({"train", "--config", bad}, nullptr, &err_text) == 2);
  REQUIRE(err_text.find("learning_rate_schedule") != std::string::npos);
  REQUIRE_FALSE(fs::exists(dir.sub("runs")));
}

TEST_CASE("auto-mode evaluation of a future-context model exits 2") {
  TempDir dir;
  const std::string segs = dir.file("s.jsonl", toy_segments());
  const std::string part = dir.file("p.txt", toy_partition());
  const std::string contexts =
      R"([{"source": "labels_future", "scope": 1, "repr": "summary"}])";
  const std::string cfg = toy_config(dir, segs, part, dir.sub("runs"), contexts);
  REQUIRE(run({"train", "--config", cfg}) == 0);
  std::string err_text;
  REQUIRE(run({"evaluate", "--checkpoint", dir.sub("runs") + "/run0.checkpoint.json",
               "--config", cfg, "--split", "test", "--mode", "auto"},
              nullptr, &err_text) == 2);
  REQUIRE(err_text.find("future") != std::string::npos);
}

TEST_CASE("predict labels a dialog file chronologically") {
  TempDir dir;
  const std::string segs = dir.file("s.jsonl", toy_segments());
  const std::string part = dir.file("p.txt", toy_partition());
  const std::string cfg = toy_config(dir, segs, part, dir.sub("runs"));
  REQUIRE(run({"train", "--config", cfg}) == 0);

  std::string unlabeled;
  unlabeled += seg_line("new", 0, "A", {"yes"}, "");
  unlabeled += seg_line("new", 1, "B", {"no"}, "");
  const std::string in = dir.file("new.jsonl", unlabeled);
  REQUIRE(run({"predict", "--checkpoint", dir.sub("runs") + "/run0.checkpoint.json",
               "--segments", in, "--out", dir.sub("labels.tsv")}) == 0);
  const std::string labels = slurp(dir.sub("labels.tsv"));
  REQUIRE(labels == "new\t0\tPos\nnew\t1\tNeg\n");

  // empty input: empty output, success
  const std::string empty = dir.file("empty.jsonl", "");
  REQUIRE(run({"predict", "--checkpoint", dir.sub("runs") + "/run0.checkpoint.json",
               "--segments", empty, "--out", dir.sub("none.tsv")}) == 0);
  REQUIRE(slurp(dir.sub("none.tsv")).empty());
}

TEST_CASE("predict reports a missing configured level by name") {
  TempDir dir;
  const std::string segs = dir.file("s.jsonl", toy_segments());
  const std::string part = dir.file("p.txt", toy_partition());
  // lemma-channel model over a corpus without lemmas fails at training time;
  // build the checkpoint from a corpus with lemmas instead
  std::string lemd;
  for (auto id : {"tr", "va", "te"}) {
    for (int i = 0; i < 2; ++i) {
      json s = json::parse(seg_line(id, i, i % 2 ? "B" : "A",
                                    {i % 2 ? "no" : "yes"}, i % 2 ? "Neg" : "Pos"));
      s["lemmas"] = s["words"];
      lemd += s.dump() + "\n";
    }
  }
  const std::string lem_segs = dir.file("lem.jsonl", lemd);
  std::string cfg_text = slurp(toy_config(dir, lem_segs, part, dir.sub("runs")));
  json cfg = json::parse(cfg_text);
  cfg["model"]["channels"][0]["level"] = "lemmas";
  const std::string cfg_path = dir.file("lem.json", cfg.dump());
  REQUIRE(run({"train", "--config", cfg_path}) == 0);

  const std::string in = dir.file("nolem.jsonl", seg_line("x", 0, "A", {"yes"}, ""));
  std::string err_text;
  REQUIRE(run({"predict", "--checkpoint", dir.sub("runs") + "/run0.checkpoint.json",
               "--segments", in, "--out", dir.sub("out.tsv")},
              nullptr, &err_text) == 2);
  REQUIRE(err_text.find("lemmas") != std::string::npos);
}

TEST_CASE("report aggregates run reports with a significance matrix") {
  TempDir dir;
  fs::create_directories(dir.sub("agg"));
  write_report_json(make_report("baseline", {79.03, 79.35}),
                    dir.sub("agg") + "/baseline.report.json");
  write_report_json(make_report("improved", {79.46, 79.64}),
                    dir.sub("agg") + "/improved.report.json");
  std::string out_text;
  REQUIRE(run({"report", "--runs-dir", dir.sub("agg")}, &out_text) == 0);
  REQUIRE(out_text.find("approach\tmu\tsigma\truns") != std::string::npos);
  REQUIRE(out_text.find("baseline\t79.19\t0.16") != std::string::npos);
  REQUIRE(out_text.find("improved\t79.55\t0.09") != std::string::npos);
  REQUIRE(out_text.find("significant") != std::string::npos);
  REQUIRE(out_text.find("yes") != std::string::npos);

  // single approach: no matrix
  fs::create_directories(dir.sub("single"));
  write_report_json(make_report("only", {50.0, 52.0}),
                    dir.sub("single") + "/only.report.json");
  std::string single_text;
  REQUIRE(run({"report", "--runs-dir", dir.sub("single")}, &single_text) == 0);
  REQUIRE(single_text.find("significant") == std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
  std::string err_text;
  REQUIRE(run({"train"}, nullptr, &err_text) == 2);  // missing --config
  REQUIRE(run({"frobnicate"}, nullptr, &err_text) == 2);
  REQUIRE(run({"prepare", "--segments", "s", "--partition", "p", "--variant",
               "45", "--out", "o"},
              nullptr, &err_text) == 2);
}
