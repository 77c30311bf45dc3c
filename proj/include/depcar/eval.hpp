#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "depcar/classify.hpp"
#include "depcar/corpus.hpp"
#include "depcar/error.hpp"
#include "depcar/featsel.hpp"
#include "depcar/parallel.hpp"
#include "depcar/rulemine.hpp"
#include "depcar/textio.hpp"

namespace depcar {

enum class ClassifierKind { Car, Svm };
enum class EvalLevel { Sentence, Document };
enum class Average { Weighted, Macro };

inline std::string to_string(ClassifierKind k) { return k == ClassifierKind::Car ? "CAR" : "SVM"; }
inline std::string to_string(EvalLevel l) { return l == EvalLevel::Document ? "document" : "sentence"; }

// ---------------------------------------------------------------------------
// Folds

struct FoldPlan {
  std::size_t k = 10;
  std::uint64_t seed = 1;
  bool stratified = true;
  std::vector<std::size_t> assignment;  // document index -> fold

  std::size_t fold_of(std::size_t doc) const { return assignment.at(doc); }
  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> n(k, 0);
    for (auto f : assignment) ++n[f];
    return n;
  }
};

namespace detail {

inline void shuffle_indices(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace detail

// Splits document indices (labels[i] is the class of document i) into k
// folds. Stratified plans deal each class round-robin, continuing the fold
// cursor from one class to the next so fold sizes stay balanced.
inline FoldPlan kfold_split(std::span<const std::string> labels, std::size_t k, std::uint64_t seed, bool stratified) {
  if (k < 2) throw DataError("k-fold split needs k >= 2");
  if (labels.size() < k) throw DataError("fewer documents than folds");
  FoldPlan plan{k, seed, stratified, std::vector<std::size_t>(labels.size(), 0)};
  std::mt19937_64 rng(seed);
  if (!stratified) {
    std::vector<std::size_t> idx(labels.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    detail::shuffle_indices(idx, rng);
    for (std::size_t i = 0; i < idx.size(); ++i) plan.assignment[idx[i]] = i % k;
    return plan;
  }
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [cls, docs] : by_class)
    if (docs.size() < k)
      throw DataError("class '" + cls + "' has " + std::to_string(docs.size()) + " documents, fewer than " +
                      std::to_string(k) + " folds");
  std::size_t cursor = 0;
  for (auto& [cls, docs] : by_class) {
    detail::shuffle_indices(docs, rng);
    for (auto d : docs) plan.assignment[d] = cursor++ % k;
  }
  return plan;
}

inline FoldPlan kfold_split(const Corpus& c, std::size_t k, std::uint64_t seed, bool stratified) {
  std::vector<std::string> labels;
  for (const auto& d : c.documents) labels.push_back(d.label);
  return kfold_split(labels, k, seed, stratified);
}

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  std::vector<std::string> classes;
  std::vector<double> precision, recall, f1;
  std::vector<std::size_t> support;  // gold count per class
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
  double accuracy = 0;

  // annotations
  std::string classifier = "CAR";
  EvalLevel level = EvalLevel::Document;
  std::optional<double> min_support, min_confidence;
  double avg_transaction_size = 0;
  double abstention_rate = 0;

  double avg_precision(Average a) const { return a == Average::Weighted ? weighted_precision : macro_precision; }
  double avg_recall(Average a) const { return a == Average::Weighted ? weighted_recall : macro_recall; }
  double avg_f1(Average a) const { return a == Average::Weighted ? weighted_f1 : macro_f1; }
};

inline double f_measure(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

inline Metrics compute_metrics(std::span<const std::string> gold, std::span<const std::string> predicted,
                               std::vector<std::string> classes) {
  if (gold.size() != predicted.size()) throw DataError("gold and predicted label lists differ in length");
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const std::size_t k = classes.size();
  auto index = [&](const std::string& s) {
    auto it = std::lower_bound(classes.begin(), classes.end(), s);
    if (it == classes.end() || *it != s) throw DataError("label '" + s + "' not in class set");
    return static_cast<std::size_t>(it - classes.begin());
  };
  Metrics m;
  m.classes = classes;
  m.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) ++m.confusion[index(gold[i])][index(predicted[i])];

  m.precision.assign(k, 0);
  m.recall.assign(k, 0);
  m.f1.assign(k, 0);
  m.support.assign(k, 0);
  std::size_t correct = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = m.confusion[c][c], predicted_c = 0, gold_c = 0;
    for (std::size_t o = 0; o < k; ++o) {
      predicted_c += m.confusion[o][c];
      gold_c += m.confusion[c][o];
    }
    correct += tp;
    m.support[c] = gold_c;
    m.precision[c] = predicted_c ? static_cast<double>(tp) / static_cast<double>(predicted_c) : 0.0;
    m.recall[c] = gold_c ? static_cast<double>(tp) / static_cast<double>(gold_c) : 0.0;
    m.f1[c] = f_measure(m.precision[c], m.recall[c]);
  }
  if (k > 0) {
    for (std::size_t c = 0; c < k; ++c) {
      m.macro_precision += m.precision[c];
      m.macro_recall += m.recall[c];
      m.macro_f1 += m.f1[c];
    }
    m.macro_precision /= static_cast<double>(k);
    m.macro_recall /= static_cast<double>(k);
    m.macro_f1 /= static_cast<double>(k);
  }
  if (!gold.empty()) {
    const double n = static_cast<double>(gold.size());
    for (std::size_t c = 0; c < k; ++c) {
      const double w = static_cast<double>(m.support[c]) / n;
      m.weighted_precision += w * m.precision[c];
      m.weighted_recall += w * m.recall[c];
      m.weighted_f1 += w * m.f1[c];
    }
    m.accuracy = static_cast<double>(correct) / n;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Experiments

struct EvalConfig {
  StrategySpec strategy = StrategySpec::head_plus_nouns(2);
  TauMode tau = TauMode::Stem;
  ClassifierKind classifier = ClassifierKind::Car;
  EvalLevel level = EvalLevel::Document;
  Average average = Average::Weighted;

  // CAR
  std::size_t rule_budget = 10000;
  std::optional<double> min_support;     // set: no tuning on this axis
  std::optional<double> min_confidence;  // set: no tuning on this axis
  std::vector<double> support_grid = default_support_grid();
  std::vector<double> confidence_grid = default_confidence_grid();
  std::optional<std::size_t> max_itemset_size;  // nullopt: derived from AvgTransSize
  double holdout_fraction = 0.2;

  // SVM
  LinearHyper linear;

  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

// Uncapped below this average transaction size, capped at 4 items above it.
inline std::optional<std::size_t> effective_max_size(const EvalConfig& cfg, double avg_transaction_size) {
  if (cfg.max_itemset_size) return cfg.max_itemset_size;
  if (avg_transaction_size > 7.0) return std::size_t{4};
  return std::nullopt;
}

struct FoldOutcome {
  std::optional<double> min_support, min_confidence;
  std::size_t rule_count = 0;
};

struct ExperimentResult {
  Metrics metrics;
  std::vector<FoldOutcome> folds;
  std::size_t abstentions = 0;
  std::size_t units = 0;
};

namespace detail {

// Transactions of a corpus grouped by document.
struct DocTransactions {
  const TransactionSet* set = nullptr;
  std::vector<std::vector<std::size_t>> by_doc;

  DocTransactions(const TransactionSet& ts, std::size_t docs) : set(&ts), by_doc(docs) {
    for (std::size_t i = 0; i < ts.transactions.size(); ++i) by_doc[ts.transactions[i].doc_index].push_back(i);
  }

  std::vector<Transaction> gather(std::span<const std::size_t> docs) const {
    std::vector<Transaction> out;
    for (auto d : docs)
      for (auto i : by_doc[d]) out.push_back(set->transactions[i]);
    return out;
  }

  std::vector<Itemset> itemsets(std::size_t doc) const {
    std::vector<Itemset> out;
    for (auto i : by_doc[doc]) out.push_back(set->transactions[i].items);
    return out;
  }
};

struct Labelled {
  std::vector<std::string> gold, predicted;
  std::size_t abstained = 0;
};

template <typename Classify>  // Classify(span<const Itemset>) -> (class, abstained)
Labelled label_units(const DocTransactions& dt, std::span<const std::size_t> docs, const Corpus& c, EvalLevel level,
                     Classify&& classify) {
  Labelled out;
  for (auto d : docs) {
    auto sets = dt.itemsets(d);
    if (level == EvalLevel::Document) {
      auto [cls, abstained] = classify(std::span<const Itemset>(sets));
      out.gold.push_back(c.documents[d].label);
      out.predicted.push_back(cls);
      out.abstained += abstained ? 1 : 0;
    } else {
      for (const auto& s : sets) {
        auto [cls, abstained] = classify(std::span<const Itemset>(&s, 1));
        out.gold.push_back(c.documents[d].label);
        out.predicted.push_back(cls);
        out.abstained += abstained ? 1 : 0;
      }
    }
  }
  return out;
}

inline Labelled label_with_rules(const RuleClassifier& rc, const DocTransactions& dt,
                                 std::span<const std::size_t> docs, const Corpus& c, EvalLevel level) {
  return label_units(dt, docs, c, level, [&](std::span<const Itemset> sets) {
    auto p = classify_document(sets, rc);
    return std::pair{p.cls, p.abstained};
  });
}

inline Labelled label_with_model(const LinearModel& m, const DocTransactions& dt, std::span<const std::size_t> docs,
                                 const Corpus& c, EvalLevel level) {
  return label_units(dt, docs, c, level, [&](std::span<const Itemset> sets) {
    return std::pair{predict_linear_document(sets, m).cls, false};
  });
}

inline double average_f(const Labelled& l, const std::vector<std::string>& classes, Average avg) {
  return compute_metrics(l.gold, l.predicted, classes).avg_f1(avg);
}

// Holdout split of training documents for threshold tuning.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout(const Corpus& c,
                                                                               std::span<const std::size_t> docs,
                                                                               double fraction, std::uint64_t seed) {
  std::size_t k = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(1.0 / fraction)));
  std::vector<std::string> labels;
  for (auto d : docs) labels.push_back(c.documents[d].label);
  if (labels.size() < k) throw DataError("too few training documents for the tuning holdout");
  std::map<std::string, std::size_t> per_class;
  for (const auto& l : labels) ++per_class[l];
  bool can_stratify = std::all_of(per_class.begin(), per_class.end(), [&](auto& kv) { return kv.second >= k; });
  auto plan = kfold_split(labels, k, seed, can_stratify);
  std::vector<std::size_t> inner, validation;
  for (std::size_t i = 0; i < docs.size(); ++i) (plan.assignment[i] == 0 ? validation : inner).push_back(docs[i]);
  return {inner, validation};
}

}  // namespace detail

inline FoldOutcome train_rules_for_fold(const Corpus& c, const detail::DocTransactions& dt,
                                        std::span<const std::size_t> train_docs, const EvalConfig& cfg,
                                        std::optional<std::size_t> max_size, std::uint64_t fold_seed,
                                        std::vector<Rule>& rules_out) {
  auto train = dt.gather(train_docs);
  if (train.empty()) throw DataError("training split has no transactions");
  FoldOutcome out;
  double sigma = 0, kappa = 0;
  if (cfg.min_support && cfg.min_confidence) {
    sigma = *cfg.min_support;
    kappa = *cfg.min_confidence;
  } else {
    auto [inner_docs, val_docs] = detail::holdout(c, train_docs, cfg.holdout_fraction, fold_seed);
    auto inner = dt.gather(inner_docs);
    if (inner.empty()) throw DataError("tuning split has no transactions");
    std::vector<double> sg = cfg.min_support ? std::vector<double>{*cfg.min_support} : cfg.support_grid;
    std::vector<double> kg = cfg.min_confidence ? std::vector<double>{*cfg.min_confidence} : cfg.confidence_grid;
    std::string fallback = majority_class(inner);
    auto scorer = [&](const std::vector<Rule>& rules) {
      RuleClassifier rc(rules, c.classes, fallback);
      return detail::average_f(detail::label_with_rules(rc, dt, val_docs, c, cfg.level), c.classes, cfg.average);
    };
    auto best = tune(inner, cfg.rule_budget, sg, kg, scorer, max_size);
    sigma = best.min_support;
    kappa = best.min_confidence;
  }
  rules_out = generate_cars(train, {sigma, kappa, cfg.rule_budget, max_size});
  out.min_support = sigma;
  out.min_confidence = kappa;
  out.rule_count = rules_out.size();
  return out;
}

// Cross-validated run: per fold, build the classifier from training
// documents only, predict the held-out documents, then pool predictions.
inline ExperimentResult run_experiment(const Corpus& c, const TransactionSet& ts, const EvalConfig& cfg,
                                       const FoldPlan& plan) {
  if (plan.assignment.size() != c.documents.size()) throw DataError("fold plan does not match corpus");
  detail::DocTransactions dt(ts, c.documents.size());
  auto max_size = effective_max_size(cfg, ts.avg_transaction_size);

  struct FoldWork {
    std::vector<std::size_t> test_docs;
    detail::Labelled labels;
    FoldOutcome outcome;
  };
  std::vector<FoldWork> work(plan.k);
  std::vector<std::vector<std::size_t>> train_docs(plan.k);
  for (std::size_t d = 0; d < c.documents.size(); ++d)
    for (std::size_t f = 0; f < plan.k; ++f) (plan.fold_of(d) == f ? work[f].test_docs : train_docs[f]).push_back(d);

  parallel_for(plan.k, cfg.workers, [&](std::size_t f) {
    const std::uint64_t fold_seed = detail::mix_seed(cfg.seed, f);
    if (cfg.classifier == ClassifierKind::Car) {
      std::vector<Rule> rules;
      work[f].outcome = train_rules_for_fold(c, dt, train_docs[f], cfg, max_size, fold_seed, rules);
      RuleClassifier rc(std::move(rules), c.classes, majority_class(dt.gather(train_docs[f])));
      work[f].labels = detail::label_with_rules(rc, dt, work[f].test_docs, c, cfg.level);
    } else {
      LinearHyper h = cfg.linear;
      h.seed = fold_seed;
      auto model = train_linear(dt.gather(train_docs[f]), c.classes, h);
      work[f].labels = detail::label_with_model(model, dt, work[f].test_docs, c, cfg.level);
    }
  });

  ExperimentResult r;
  std::vector<std::string> gold, predicted;
  for (auto& w : work) {
    gold.insert(gold.end(), w.labels.gold.begin(), w.labels.gold.end());
    predicted.insert(predicted.end(), w.labels.predicted.begin(), w.labels.predicted.end());
    r.abstentions += w.labels.abstained;
    r.folds.push_back(w.outcome);
  }
  r.units = gold.size();
  r.metrics = compute_metrics(gold, predicted, c.classes);
  r.metrics.classifier = to_string(cfg.classifier);
  r.metrics.level = cfg.level;
  r.metrics.avg_transaction_size = ts.avg_transaction_size;
  r.metrics.abstention_rate = r.units ? static_cast<double>(r.abstentions) / static_cast<double>(r.units) : 0.0;
  if (cfg.classifier == ClassifierKind::Car) {
    // most common tuned pair across folds; ties prefer larger thresholds
    std::map<std::pair<double, double>, std::size_t> votes;
    for (const auto& f : r.folds) ++votes[{*f.min_support, *f.min_confidence}];
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it)
      if (it->second >= best->second) best = it;
    r.metrics.min_support = best->first.first;
    r.metrics.min_confidence = best->first.second;
  }
  return r;
}

inline ExperimentResult run_experiment(const Corpus& c, const EvalConfig& cfg, const FoldPlan& plan) {
  auto ts = corpus_to_transactions(c, cfg.strategy, cfg.tau, cfg.workers);
  return run_experiment(c, ts, cfg, plan);
}

struct CurvePoint {
  double x = 0;
  double value = 0;
  std::size_t rules = 0;
  bool abstained = false;
};

// One cross-validated run per N of the tfidf top-N strategy.
inline std::vector<CurvePoint> sweep_tfidf_n(const Corpus& c, EvalConfig cfg, std::span<const int> n_range,
                                             const FoldPlan& plan) {
  std::vector<CurvePoint> out;
  for (int n : n_range) {
    cfg.strategy = StrategySpec::tfidf_top_n(n);
    auto r = run_experiment(c, cfg, plan);
    out.push_back({static_cast<double>(n), r.metrics.avg_f1(cfg.average), 0, false});
  }
  return out;
}

// Support sweep at fixed confidence, trained on every fold but `eval_fold`
// and scored on `eval_fold`.
inline std::vector<CurvePoint> rule_count_curve(const Corpus& c, const EvalConfig& cfg, const FoldPlan& plan,
                                                double kappa, std::span<const double> sigma_grid,
                                                std::size_t eval_fold = 0) {
  auto ts = corpus_to_transactions(c, cfg.strategy, cfg.tau, cfg.workers);
  detail::DocTransactions dt(ts, c.documents.size());
  std::vector<std::size_t> train_docs, eval_docs;
  for (std::size_t d = 0; d < c.documents.size(); ++d)
    (plan.fold_of(d) == eval_fold ? eval_docs : train_docs).push_back(d);
  auto train = dt.gather(train_docs);
  std::string fallback = majority_class(train);
  auto scorer = [&](const std::vector<Rule>& rules) {
    RuleClassifier rc(rules, c.classes, fallback);
    return detail::average_f(detail::label_with_rules(rc, dt, eval_docs, c, cfg.level), c.classes, cfg.average);
  };
  auto points = rule_count_curve(train, kappa, sigma_grid, scorer, effective_max_size(cfg, ts.avg_transaction_size),
                                 cfg.workers);
  std::vector<CurvePoint> out;
  for (const auto& p : points) out.push_back({p.min_support, p.f_measure, p.rule_count, p.abstained});
  return out;
}

// ---------------------------------------------------------------------------
// Output

enum class TableLayout { PaperTable, Csv, Json };

namespace detail {

inline std::string pct(double v) { return fixed(100.0 * v, 2); }

inline std::string annotation(const Metrics& m) {
  std::string out;
  if (m.min_support) out += "MinSupp=" + exact(*m.min_support) + ", ";
  if (m.min_confidence) out += "MinConf=" + trimmed(100.0 * *m.min_confidence, 1) + ", ";
  out += "AvgTransSize=" + fixed(m.avg_transaction_size, 2);
  return out;
}

inline void paper_block(std::ostringstream& out, const Metrics& m, Average avg) {
  auto row = [&](const std::string& name, const std::vector<double>& v, double a) {
    out << m.classifier << ' ' << name;
    for (double x : v) out << '\t' << pct(x);
    out << '\t' << pct(a) << '\n';
  };
  row("Recall", m.recall, m.avg_recall(avg));
  row("Precision", m.precision, m.avg_precision(avg));
  row("F-measure", m.f1, m.avg_f1(avg));
}

}  // namespace detail

// Paper-style table: class columns plus AVG, Recall/Precision/F-measure rows
// per classifier, two-decimal percentages. The annotation line follows each
// block carrying thresholds, or the table when no block has any.
inline std::string emit_paper_table(std::span<const Metrics> blocks, Average avg = Average::Weighted) {
  std::ostringstream out;
  if (blocks.empty()) return {};
  for (const auto& cls : blocks.front().classes) out << '\t' << cls;
  out << "\tAVG\n";
  // annotation line padded to the table width
  const std::string pad(blocks.front().classes.size() + 1, '\t');
  bool annotated = false;
  for (const auto& m : blocks) {
    detail::paper_block(out, m, avg);
    if (m.min_support || m.min_confidence) {
      out << detail::annotation(m) << pad << '\n';
      annotated = true;
    }
  }
  if (!annotated) out << detail::annotation(blocks.front()) << pad << '\n';
  return out.str();
}

inline nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["classifier"] = m.classifier;
  j["level"] = to_string(m.level);
  j["classes"] = m.classes;
  auto& per = j["per_class"];
  per = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < m.classes.size(); ++c)
    per[m.classes[c]] = {{"precision", m.precision[c]},
                         {"recall", m.recall[c]},
                         {"f1", m.f1[c]},
                         {"support", m.support[c]}};
  j["macro"] = {{"precision", m.macro_precision}, {"recall", m.macro_recall}, {"f1", m.macro_f1}};
  j["weighted"] = {{"precision", m.weighted_precision}, {"recall", m.weighted_recall}, {"f1", m.weighted_f1}};
  j["accuracy"] = m.accuracy;
  j["confusion"] = m.confusion;
  auto& a = j["annotations"];
  a = nlohmann::ordered_json::object();
  a["min_support"] = m.min_support ? nlohmann::ordered_json(*m.min_support) : nlohmann::ordered_json(nullptr);
  a["min_confidence"] = m.min_confidence ? nlohmann::ordered_json(*m.min_confidence) : nlohmann::ordered_json(nullptr);
  a["avg_transaction_size"] = m.avg_transaction_size;
  a["abstention_rate"] = m.abstention_rate;
  return j;
}

// metric,<classes...>,AVG_WEIGHTED,AVG_MACRO with fractional values.
inline std::string emit_csv(const Metrics& m) {
  std::ostringstream out;
  out << "metric";
  for (const auto& c : m.classes) out << ',' << escape_field(c);
  out << ",AVG_WEIGHTED,AVG_MACRO\n";
  auto row = [&](const std::string& name, const std::vector<double>& v, double w, double mac) {
    out << m.classifier << '_' << name;
    for (double x : v) out << ',' << exact(x);
    out << ',' << exact(w) << ',' << exact(mac) << '\n';
  };
  row("recall", m.recall, m.weighted_recall, m.macro_recall);
  row("precision", m.precision, m.weighted_precision, m.macro_precision);
  row("f_measure", m.f1, m.weighted_f1, m.macro_f1);
  return out.str();
}

inline std::string emit_table(const Metrics& m, TableLayout layout, Average avg = Average::Weighted) {
  switch (layout) {
    case TableLayout::PaperTable: return emit_paper_table(std::span<const Metrics>(&m, 1), avg);
    case TableLayout::Csv: return emit_csv(m);
    case TableLayout::Json: return metrics_json(m).dump(2) + "\n";
  }
  return {};
}

inline std::string emit_curve(std::string_view x_name, std::span<const CurvePoint> points) {
  std::ostringstream out;
  out << x_name << ",f_measure\n";
  for (const auto& p : points) out << exact(p.x) << ',' << fixed(p.value, 6) << '\n';
  return out.str();
}

}  // namespace depcar
