#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "depcar/classify.hpp"
#include "depcar/corpus.hpp"
#include "depcar/error.hpp"
#include "depcar/eval.hpp"
#include "depcar/featsel.hpp"
#include "depcar/parallel.hpp"
#include "depcar/rulemine.hpp"
#include "depcar/textio.hpp"

namespace depcar::cli {

enum ExitCode : int { kOk = 0, kDataViolation = 1, kUsage = 2 };

// Resolved settings shared by all subcommands. Defaults here are the
// documented defaults.
struct Options {
  std::string corpus;
  std::string format = "native";  // native | conllu
  std::string tau = "stem";       // stem | root
  std::string strategy = "head-nouns:2";
  std::string classifier = "car";  // car | svm | both
  std::string level = "document";  // document | sentence
  std::string average = "weighted";  // weighted | macro
  std::size_t rule_budget = 10000;
  std::optional<double> min_support;
  std::optional<double> min_confidence;
  std::vector<double> support_grid;     // empty: default log grid
  std::vector<double> confidence_grid;  // empty: default linear grid
  std::optional<std::size_t> max_itemset_size;
  double lambda = 1e-4;
  int epochs = 20;
  std::size_t folds = 10;
  bool stratified = true;
  std::uint64_t seed = 1;
  std::size_t workers = default_workers();
  std::string pos_map;
  std::string out_dir;
  std::string transactions;  // mine: read a transaction dump instead of a corpus
  std::string sweep = "tfidf-n";  // tfidf-n | rule-count
  int n_min = 1;
  int n_max = 20;
};

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + exact(v[i]);
  return out;
}

// Comment header echoing the resolved configuration. Worker count and output
// directory are left out: they never change the content.
inline std::string config_header(const std::string& command, const Options& o) {
  std::ostringstream h;
  auto opt = [](const std::optional<double>& v) { return v ? exact(*v) : std::string("tuned"); };
  h << "# depcar " << command << "\n";
  h << "# corpus = " << o.corpus << "\n";
  h << "# format = " << o.format << "\n";
  h << "# tau = " << o.tau << "\n";
  h << "# strategy = " << o.strategy << "\n";
  h << "# classifier = " << o.classifier << "\n";
  h << "# level = " << o.level << "\n";
  h << "# average = " << o.average << "\n";
  h << "# rule-budget = " << o.rule_budget << "\n";
  h << "# min-support = " << opt(o.min_support) << "\n";
  h << "# min-confidence = " << opt(o.min_confidence) << "\n";
  h << "# support-grid = " << join(o.support_grid.empty() ? default_support_grid() : o.support_grid) << "\n";
  h << "# confidence-grid = " << join(o.confidence_grid.empty() ? default_confidence_grid() : o.confidence_grid)
    << "\n";
  h << "# max-itemset-size = " << (o.max_itemset_size ? std::to_string(*o.max_itemset_size) : "auto") << "\n";
  h << "# lambda = " << exact(o.lambda) << "\n";
  h << "# epochs = " << o.epochs << "\n";
  h << "# folds = " << o.folds << "\n";
  h << "# stratified = " << (o.stratified ? "true" : "false") << "\n";
  h << "# seed = " << o.seed << "\n";
  h << "# pos-map = " << (o.pos_map.empty() ? "default" : o.pos_map) << "\n";
  if (!o.transactions.empty()) h << "# transactions = " << o.transactions << "\n";
  if (command == "sweep") {
    h << "# sweep = " << o.sweep << "\n";
    h << "# n-range = " << o.n_min << "-" << o.n_max << "\n";
  }
  return h.str();
}

inline CorpusFormat parse_format(const std::string& s) {
  if (s == "native") return CorpusFormat::Native;
  if (s == "conllu") return CorpusFormat::Conllu;
  throw UsageError("unknown corpus format '" + s + "' (expected native or conllu)");
}

inline TauMode parse_tau(const std::string& s) {
  if (s == "stem") return TauMode::Stem;
  if (s == "root") return TauMode::Root;
  throw UsageError("unknown tau mode '" + s + "' (expected stem or root)");
}

inline std::vector<ClassifierKind> parse_classifiers(const std::string& s) {
  if (s == "car") return {ClassifierKind::Car};
  if (s == "svm") return {ClassifierKind::Svm};
  if (s == "both") return {ClassifierKind::Car, ClassifierKind::Svm};
  throw UsageError("unknown classifier '" + s + "' (expected car, svm or both)");
}

inline PosTable pos_table(const Options& o) {
  return o.pos_map.empty() ? PosTable::defaults() : PosTable::from_file(o.pos_map);
}

inline Corpus read_corpus(const Options& o) {
  if (o.corpus.empty()) throw UsageError("--corpus is required");
  return load_corpus(o.corpus, parse_format(o.format), pos_table(o), parse_tau(o.tau));
}

inline EvalConfig eval_config(const Options& o) {
  EvalConfig cfg;
  cfg.strategy = parse_strategy(o.strategy);
  cfg.tau = parse_tau(o.tau);
  if (o.level == "document") {
    cfg.level = EvalLevel::Document;
  } else if (o.level == "sentence") {
    cfg.level = EvalLevel::Sentence;
  } else {
    throw UsageError("unknown level '" + o.level + "'");
  }
  if (o.average == "weighted") {
    cfg.average = Average::Weighted;
  } else if (o.average == "macro") {
    cfg.average = Average::Macro;
  } else {
    throw UsageError("unknown average '" + o.average + "'");
  }
  if (o.rule_budget == 0) throw UsageError("--rule-budget must be positive");
  cfg.rule_budget = o.rule_budget;
  cfg.min_support = o.min_support;
  cfg.min_confidence = o.min_confidence;
  if (!o.support_grid.empty()) cfg.support_grid = o.support_grid;
  if (!o.confidence_grid.empty()) cfg.confidence_grid = o.confidence_grid;
  cfg.max_itemset_size = o.max_itemset_size;
  cfg.linear.lambda = o.lambda;
  cfg.linear.epochs = o.epochs;
  cfg.seed = o.seed;
  cfg.workers = o.workers;
  return cfg;
}

// Writes `body` (prefixed by the header) to out_dir/name, or to `fallback`
// when no output directory is set.
inline void write_artifact(const Options& o, const std::string& name, const std::string& header,
                           const std::string& body, std::ostream& fallback) {
  if (o.out_dir.empty()) {
    fallback << header << body;
    return;
  }
  std::filesystem::create_directories(o.out_dir);
  auto path = std::filesystem::path(o.out_dir) / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << header << body;
}

// ---------------------------------------------------------------------------

inline int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.corpus.empty()) throw UsageError("--corpus is required");
  Corpus c = parse_corpus_file(o.corpus, parse_format(o.format), pos_table(o), parse_tau(o.tau));
  auto report = validate(c);
  if (!report.empty()) {
    err << describe(report);
    err << report.size() << " violation(s)\n";
    return kDataViolation;
  }
  out << "ok: " << c.documents.size() << " documents, " << c.sentence_count() << " sentences, " << c.classes.size()
      << " classes\n";
  return kOk;
}

inline int cmd_features(const Options& o, std::ostream& out, std::ostream& err) {
  Corpus c = read_corpus(o);
  auto spec = parse_strategy(o.strategy);
  auto ts = corpus_to_transactions(c, spec, parse_tau(o.tau), o.workers);
  std::ostringstream dump;
  write_transactions(dump, ts.transactions);
  write_artifact(o, "transactions.tsv", config_header("features", o), dump.str(), out);
  std::ostream& summary = o.out_dir.empty() ? err : out;
  summary << "AvgTransSize=" << fixed(ts.avg_transaction_size, 2) << " transactions=" << ts.transactions.size()
          << " skipped=" << ts.skipped << "\n";
  return kOk;
}

inline int cmd_mine(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<Transaction> ts;
  if (!o.transactions.empty()) {
    std::ifstream in(o.transactions);
    if (!in) throw IoError("cannot open transactions '" + o.transactions + "'");
    ts = read_transactions(in, o.transactions);
    if (ts.empty()) throw DataError(o.transactions + ": no transactions");
  } else {
    Corpus c = read_corpus(o);
    ts = corpus_to_transactions(c, parse_strategy(o.strategy), parse_tau(o.tau), o.workers).transactions;
  }
  if (o.rule_budget == 0) throw UsageError("--rule-budget must be positive");
  MineConfig cfg{o.min_support.value_or(0.01), o.min_confidence.value_or(0.5), o.rule_budget, o.max_itemset_size};
  auto rules = generate_cars(ts, cfg, o.workers);
  Options resolved = o;
  resolved.min_support = cfg.min_support;
  resolved.min_confidence = cfg.min_confidence;
  std::ostringstream body;
  write_rules(body, rules);
  if (rules.empty()) {
    err << "no rules at min-support " << exact(cfg.min_support) << " and min-confidence "
        << exact(cfg.min_confidence) << "; try a lower --min-support\n";
    return kDataViolation;
  }
  write_artifact(resolved, "rules.tsv", config_header("mine", resolved), body.str(), out);
  (o.out_dir.empty() ? err : out) << rules.size() << " rules\n";
  return kOk;
}

inline int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& /*err*/) {
  Corpus c = read_corpus(o);
  EvalConfig cfg = eval_config(o);
  auto kinds = parse_classifiers(o.classifier);
  auto plan = kfold_split(c, o.folds, o.seed, o.stratified);
  auto ts = corpus_to_transactions(c, cfg.strategy, cfg.tau, cfg.workers);

  std::vector<Metrics> blocks;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  std::string csv;
  for (auto kind : kinds) {
    cfg.classifier = kind;
    auto r = run_experiment(c, ts, cfg, plan);
    csv += emit_csv(r.metrics);
    auto j = metrics_json(r.metrics);
    nlohmann::ordered_json folds = nlohmann::ordered_json::array();
    for (const auto& f : r.folds) {
      nlohmann::ordered_json fj;
      fj["min_support"] = f.min_support ? nlohmann::ordered_json(*f.min_support) : nlohmann::ordered_json(nullptr);
      fj["min_confidence"] =
          f.min_confidence ? nlohmann::ordered_json(*f.min_confidence) : nlohmann::ordered_json(nullptr);
      fj["rule_count"] = f.rule_count;
      folds.push_back(fj);
    }
    j["folds"] = folds;
    j["abstentions"] = r.abstentions;
    runs.push_back(j);
    blocks.push_back(r.metrics);
  }
  const std::string header = config_header("evaluate", o);
  const std::string table = emit_paper_table(blocks, cfg.average);
  nlohmann::ordered_json doc;
  doc["config"] = header;
  doc["transactions"] = ts.transactions.size();
  doc["skipped_sentences"] = ts.skipped;
  doc["runs"] = runs;
  if (o.out_dir.empty()) {
    out << header << table;
    return kOk;
  }
  write_artifact(o, "table.txt", header, table, out);
  write_artifact(o, "metrics.csv", header, csv, out);
  std::filesystem::create_directories(o.out_dir);
  std::ofstream(std::filesystem::path(o.out_dir) / "metrics.json", std::ios::binary) << doc.dump(2) << "\n";
  out << table;
  return kOk;
}

inline int cmd_sweep(const Options& o, std::ostream& out, std::ostream& /*err*/) {
  Corpus c = read_corpus(o);
  EvalConfig cfg = eval_config(o);
  auto kinds = parse_classifiers(o.classifier);
  auto plan = kfold_split(c, o.folds, o.seed, o.stratified);
  std::string body;
  std::string name;
  if (o.sweep == "tfidf-n") {
    if (o.n_min < 1 || o.n_max < o.n_min) throw UsageError("bad --n-min/--n-max range");
    std::vector<int> ns;
    for (int n = o.n_min; n <= o.n_max; ++n) ns.push_back(n);
    for (auto kind : kinds) {
      cfg.classifier = kind;
      auto curve = sweep_tfidf_n(c, cfg, ns, plan);
      body += emit_curve("tfidf_n_" + to_string(kind), curve);
    }
    name = "sweep_tfidf_n.csv";
  } else if (o.sweep == "rule-count") {
    double kappa = o.min_confidence.value_or(0.68);
    std::vector<double> grid = o.support_grid.empty() ? default_support_grid() : o.support_grid;
    auto curve = rule_count_curve(c, cfg, plan, kappa, grid);
    for (auto& p : curve) p.x = static_cast<double>(p.rules);
    body = emit_curve("rule_count", curve);
    for (const auto& p : curve)
      if (p.abstained) body += "# min-support " + exact(grid[&p - curve.data()]) + ": no rules, F reported as 0\n";
    name = "sweep_rule_count.csv";
  } else {
    throw UsageError("unknown sweep '" + o.sweep + "' (expected tfidf-n or rule-count)");
  }
  write_artifact(o, name, config_header("sweep", o), body, out);
  return kOk;
}

}  // namespace depcar::cli
