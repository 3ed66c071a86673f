#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dar/checkpoint.hpp"
#include "dar/common.hpp"
#include "dar/config.hpp"
#include "dar/corpus.hpp"
#include "dar/trainer.hpp"

namespace dar {

namespace fs = std::filesystem;

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  try {
    return experiment_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError("config error in " + path + ": " + e.what());
  }
}

// Fixed-point formatting for the human-readable tables.
inline std::string fixed2(Scalar v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

// Round-trip formatting for machine-readable rows.
inline std::string full_precision(Scalar v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// ---- prepare ----

inline int cmd_prepare(const std::string& segments_path,
                       const std::string& partition_path,
                       const std::string& variant,
                       const std::string& mapping_table,
                       const std::string& out_dir, std::ostream& out) {
  Corpus corpus = load_corpus(segments_path, partition_path);
  corpus = apply_variant(corpus, variant, mapping_table);
  const Vocabularies vocabs = build_vocabularies(corpus);

  fs::create_directories(out_dir);
  save_segments(corpus, out_dir + "/segments.jsonl");
  save_partition(corpus, out_dir + "/partition.txt");
  auto write_lines = [&](const std::string& name,
                         const std::vector<std::string>& lines) {
    std::ofstream f(out_dir + "/" + name);
    if (!f) throw FileError("cannot write " + out_dir + "/" + name);
    for (const auto& l : lines) f << l << "\n";
  };
  write_lines("vocab.words.txt", vocabs.word.tokens());
  write_lines("vocab.chars.txt", vocabs.chars.tokens());
  write_lines("vocab.lemmas.txt", vocabs.lemma.tokens());
  write_lines("vocab.pos_coarse.txt", vocabs.pos_coarse.tokens());
  write_lines("vocab.pos_fine.txt", vocabs.pos_fine.tokens());
  write_lines("labels.txt", vocabs.label.labels());

  // class distribution, most frequent first
  const auto dist = corpus.label_distribution();
  std::vector<std::pair<std::string, std::size_t>> rows(dist.begin(), dist.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  const Scalar total = static_cast<Scalar>(corpus.total_segments());
  std::ostringstream table;
  table << "label\tcount\tpercent\n";
  for (const auto& [label, count] : rows) {
    table << label << "\t" << count << "\t"
          << fixed2(100.0 * static_cast<Scalar>(count) / total) << "\n";
  }
  std::ofstream summary(out_dir + "/summary.tsv");
  if (!summary) throw FileError("cannot write " + out_dir + "/summary.tsv");
  summary << table.str();
  out << "variant " << corpus.label_variant << ": " << corpus.dialogs.size()
      << " dialogs, " << corpus.total_segments() << " segments, "
      << rows.size() << " classes\n"
      << table.str();
  return 0;
}

// ---- report formatting ----

inline void write_report_json(const RunReport& r, const std::string& path) {
  json j;
  j["name"] = r.name;
  j["accuracies"] = r.accuracies;
  j["mu"] = r.mu;
  j["sigma"] = r.sigma;
  std::ofstream f(path);
  if (!f) throw FileError("cannot write report: " + path);
  f << j.dump(1) << "\n";
}

inline RunReport read_report_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FileError("cannot open report: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw FormatError("report parse error in " + path + ": " + e.what());
  }
  check_keys(j, {"name", "accuracies", "mu", "sigma"}, "report " + path);
  return make_report(j.at("name").get<std::string>(),
                     j.at("accuracies").get<std::vector<Scalar>>());
}

// One delimited row per approach (name, mu, sigma, per-run accuracies at full
// precision), then a pairwise significance matrix when there is more than one
// approach.
inline void print_report_table(const std::vector<RunReport>& reports,
                               std::ostream& out) {
  out << "approach\tmu\tsigma\truns\n";
  for (const auto& r : reports) {
    out << r.name << "\t" << fixed2(r.mu) << "\t" << fixed2(r.sigma) << "\t";
    for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
      if (i) out << " ";
      out << full_precision(r.accuracies[i]);
    }
    out << "\n";
  }
  if (reports.size() < 2) return;
  out << "\nsignificant\t";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out << reports[i].name << (i + 1 < reports.size() ? "\t" : "\n");
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out << reports[i].name;
    for (std::size_t j = 0; j < reports.size(); ++j) {
      if (i == j) {
        out << "\t-";
        continue;
      }
      const RunReport& a = reports[i];
      const RunReport& b = reports[j];
      const RunReport& worse = a.mu <= b.mu ? a : b;
      const RunReport& better = a.mu <= b.mu ? b : a;
      out << "\t"
          << (significant(worse.mu, worse.sigma, better.mu, better.sigma)
                  ? "yes"
                  : "no");
    }
    out << "\n";
  }
}

// ---- train ----

inline int cmd_train(const std::string& config_path, std::size_t runs_override,
                     std::uint64_t seed_override, bool has_seed,
                     const std::string& out_override, std::ostream& out) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (runs_override > 0) cfg.train.runs = runs_override;
  if (has_seed) cfg.train.base_seed = seed_override;
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (cfg.output_dir.empty()) throw ConfigError("no output directory configured");

  Corpus corpus = load_corpus(cfg.segments_path, cfg.partition_path);
  corpus = apply_variant(corpus, cfg.variant, cfg.mapping_table);
  const Vocabularies vocabs = build_vocabularies(corpus);
  EmbeddingResources resources;

  fs::create_directories(cfg.output_dir);
  MultiRunResult result =
      multi_run(corpus, cfg.model, vocabs, cfg.train, cfg.eval_split,
                cfg.eval_mode, resources, cfg.name);
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const std::string stem = cfg.output_dir + "/run" + std::to_string(i);
    save_checkpoint(stem + ".checkpoint.json", *result.runs[i].model);
    std::ofstream metrics(stem + ".metrics.tsv");
    if (!metrics) throw FileError("cannot write " + stem + ".metrics.tsv");
    metrics << "epoch\ttrain_loss\tval_accuracy\n";
    for (const auto& e : result.runs[i].history) {
      metrics << e.epoch << "\t" << full_precision(e.train_loss) << "\t"
              << full_precision(e.val_accuracy) << "\n";
    }
  }
  write_report_json(result.report,
                    cfg.output_dir + "/" + cfg.name + ".report.json");
  std::ofstream table(cfg.output_dir + "/report.tsv");
  if (!table) throw FileError("cannot write " + cfg.output_dir + "/report.tsv");
  print_report_table({result.report}, table);
  print_report_table({result.report}, out);
  return 0;
}

// ---- evaluate ----

inline int cmd_evaluate(const std::string& checkpoint_path,
                        const std::string& config_path, const std::string& split,
                        const std::string& mode, const std::string& out_path,
                        std::ostream& out) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  Corpus corpus = load_corpus(cfg.segments_path, cfg.partition_path);
  corpus = apply_variant(corpus, cfg.variant, cfg.mapping_table);
  EmbeddingResources resources;
  LoadedModel loaded = load_checkpoint(checkpoint_path, resources);
  const Split s = split.empty() ? cfg.eval_split : parse_split(split);
  const EvalMode m = mode.empty() ? cfg.eval_mode : parse_eval_mode(mode);
  const Scalar acc = evaluate(*loaded.model, corpus, s, m);
  std::ostringstream line;
  line << "accuracy\t" << split_name(s) << "\t" << eval_mode_name(m) << "\t"
       << full_precision(acc) << "\n";
  out << line.str();
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw FileError("cannot write " + out_path);
    f << line.str();
  }
  return 0;
}

// ---- predict ----

// Dialog file for inference: same line format as the corpus, label optional.
inline std::vector<Dialog> load_unlabeled_dialogs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open dialog file: " + path);
  std::vector<Dialog> dialogs;
  std::map<std::string, std::size_t> pos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": invalid JSON: " + e.what());
    }
    Segment s;
    try {
      s.dialog_id = j.at("dialog_id").get<std::string>();
      s.index = j.at("index").get<std::size_t>();
      s.speaker = j.at("speaker").get<std::string>();
      s.words = j.at("words").get<std::vector<std::string>>();
      if (j.contains("label")) s.label = j["label"].get<std::string>();
      if (j.contains("lemmas")) s.lemmas = j["lemmas"].get<std::vector<std::string>>();
      if (j.contains("pos_coarse")) s.pos_coarse = j["pos_coarse"].get<std::vector<std::string>>();
      if (j.contains("pos_fine")) s.pos_fine = j["pos_fine"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": missing or mistyped field: " + e.what());
    }
    auto it = pos.find(s.dialog_id);
    if (it == pos.end()) {
      pos[s.dialog_id] = dialogs.size();
      dialogs.push_back({s.dialog_id, {}});
      it = pos.find(s.dialog_id);
    }
    Dialog& d = dialogs[it->second];
    if (s.index != d.segments.size()) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": segment indices of dialog " + s.dialog_id +
                        " must be consecutive from 0");
    }
    d.segments.push_back(std::move(s));
  }
  return dialogs;
}

// Chronological autoregressive labeling: the label history at position t holds
// the model's own predictions for positions < t.
inline int cmd_predict(const std::string& checkpoint_path,
                       const std::string& segments_path,
                       const std::string& out_path, std::ostream& out) {
  EmbeddingResources resources;
  LoadedModel loaded = load_checkpoint(checkpoint_path, resources);
  if (loaded.model->has_future_contexts()) {
    throw ConfigError(
        "prediction is incompatible with future-label contexts");
  }
  const auto dialogs = load_unlabeled_dialogs(segments_path);
  std::ofstream f(out_path);
  if (!f) throw FileError("cannot write " + out_path);
  const LabelVocabulary& labels = loaded.model->vocabularies().label;
  std::size_t n = 0;
  for (const Dialog& d : dialogs) {
    std::vector<std::size_t> history(d.segments.size(), 0);
    const auto speakers = dialog_speakers(d);
    for (std::size_t t = 0; t < d.segments.size(); ++t) {
      Model::ContextInputs ctx;
      ctx.labels = &history;
      ctx.speakers = &speakers;
      ctx.t = t;
      history[t] = loaded.model->predict(d.segments[t], ctx);
      f << d.id << "\t" << t << "\t" << labels.label(history[t]) << "\n";
      ++n;
    }
  }
  out << "labeled " << n << " segments from " << dialogs.size()
      << " dialogs -> " << out_path << "\n";
  return 0;
}

// ---- report ----

inline int cmd_report(const std::string& runs_dir, const std::string& out_path,
                      std::ostream& out) {
  if (!fs::is_directory(runs_dir)) {
    throw FileError("not a directory: " + runs_dir);
  }
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(runs_dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 12 &&
        name.compare(name.size() - 12, 12, ".report.json") == 0) {
      files.push_back(e.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw FileError("no *.report.json files in " + runs_dir);
  }
  std::vector<RunReport> reports;
  for (const auto& f : files) reports.push_back(read_report_json(f));
  print_report_table(reports, out);
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw FileError("cannot write " + out_path);
    print_report_table(reports, f);
  }
  return 0;
}

// ---- driver ----

inline int run_cli(std::vector<std::string> args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"dialog-act recognition toolkit"};
  app.require_subcommand(1);

  std::string segments, partition, variant = "none", mapping_table, out_dir;
  auto* prepare = app.add_subcommand("prepare", "map labels and build vocabularies");
  prepare->add_option("--segments", segments)->required();
  prepare->add_option("--partition", partition)->required();
  prepare->add_option("--variant", variant)
      ->check(CLI::IsMember({"44", "43", "42", "41", "mrda5", "none"}))
      ->required();
  prepare->add_option("--mapping-table", mapping_table);
  prepare->add_option("--out", out_dir)->required();

  std::string config_path;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  bool has_seed = false;
  auto* train = app.add_subcommand("train", "run seeded training runs");
  train->add_option("--config", config_path)->required();
  train->add_option("--runs", runs);
  auto* seed_opt = train->add_option("--seed", seed);
  train->add_option("--out", out_dir);

  std::string checkpoint, split, mode, out_file;
  auto* evaluate = app.add_subcommand("evaluate", "accuracy of a checkpoint");
  evaluate->add_option("--checkpoint", checkpoint)->required();
  evaluate->add_option("--config", config_path)->required();
  evaluate->add_option("--split", split)
      ->check(CLI::IsMember({"train", "validation", "test"}));
  evaluate->add_option("--mode", mode)
      ->check(CLI::IsMember({"none", "gold", "auto"}));
  evaluate->add_option("--out", out_file);

  auto* predict = app.add_subcommand("predict", "label a dialog file");
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("--segments", segments)->required();
  predict->add_option("--out", out_file)->required();

  std::string runs_dir;
  auto* report = app.add_subcommand("report", "aggregate run reports");
  report->add_option("--runs-dir", runs_dir)->required();
  report->add_option("--out", out_file);

  try {
    std::reverse(args.begin(), args.end());  // CLI11 parses back to front
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  has_seed = seed_opt->count() > 0;

  try {
    if (prepare->parsed()) {
      return cmd_prepare(segments, partition, variant, mapping_table, out_dir, out);
    }
    if (train->parsed()) {
      return cmd_train(config_path, runs, seed, has_seed, out_dir, out);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(checkpoint, config_path, split, mode, out_file, out);
    }
    if (predict->parsed()) {
      return cmd_predict(checkpoint, segments, out_file, out);
    }
    if (report->parsed()) {
      return cmd_report(runs_dir, out_file, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FileError& e) {
    err << "file error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace dar
