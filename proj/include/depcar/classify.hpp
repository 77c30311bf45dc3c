#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "depcar/error.hpp"
#include "depcar/featsel.hpp"
#include "depcar/parallel.hpp"
#include "depcar/rulemine.hpp"
#include "depcar/textio.hpp"

namespace depcar {

// Majority class of a transaction list; ties go to the smaller name.
inline std::string majority_class(std::span<const Transaction> ts) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : ts) ++counts[t.cls];
  std::string best;
  std::size_t best_n = 0;
  for (const auto& [cls, n] : counts)
    if (n > best_n) {
      best = cls;
      best_n = n;
    }
  return best;
}

inline std::size_t argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

// ---------------------------------------------------------------------------
// Class association rule classifier

enum class Aggregation { ConfidenceSum };

struct SentencePrediction {
  std::string cls;
  std::vector<double> scores;  // per class, in RuleClassifier::classes() order
  bool abstained = false;
};

using DocumentPrediction = SentencePrediction;

class RuleClassifier {
 public:
  // `classes` is the full class set; rule classes and the fallback must be
  // members. Rules are kept in global order.
  RuleClassifier(std::vector<Rule> rules, std::vector<std::string> classes, std::string fallback,
                 Aggregation aggregation = Aggregation::ConfidenceSum)
      : rules_(std::move(rules)), classes_(std::move(classes)), fallback_(std::move(fallback)),
        aggregation_(aggregation) {
    std::sort(classes_.begin(), classes_.end());
    classes_.erase(std::unique(classes_.begin(), classes_.end()), classes_.end());
    std::stable_sort(rules_.begin(), rules_.end(), rule_before);
    fallback_index_ = class_index(fallback_);
    rule_class_.reserve(rules_.size());
    encoded_.reserve(rules_.size());
    for (std::size_t r = 0; r < rules_.size(); ++r) {
      if (rules_[r].items.empty()) throw DataError("rule with empty itemset");
      rule_class_.push_back(class_index(rules_[r].cls));
      std::vector<std::uint32_t> ids;
      for (const auto& f : rules_[r].items) {
        auto [it, fresh] = feature_id_.try_emplace(f.str(), static_cast<std::uint32_t>(feature_id_.size()));
        ids.push_back(it->second);
      }
      std::sort(ids.begin(), ids.end());
      encoded_.push_back(std::move(ids));
    }
    by_first_.resize(feature_id_.size());
    for (std::size_t r = 0; r < rules_.size(); ++r) by_first_[encoded_[r].front()].push_back(r);
  }

  const std::vector<Rule>& rules() const { return rules_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::string& fallback() const { return fallback_; }
  Aggregation aggregation() const { return aggregation_; }

  std::size_t class_index(const std::string& cls) const {
    auto it = std::lower_bound(classes_.begin(), classes_.end(), cls);
    if (it == classes_.end() || *it != cls) throw DataError("class '" + cls + "' not in classifier class set");
    return static_cast<std::size_t>(it - classes_.begin());
  }

  // Indices of rules whose itemset is contained in `items`, in rule order.
  std::vector<std::size_t> match_indices(const Itemset& items) const {
    std::vector<std::uint32_t> ids;
    ids.reserve(items.size());
    for (const auto& f : items)
      if (auto it = feature_id_.find(f.str()); it != feature_id_.end()) ids.push_back(it->second);
    std::sort(ids.begin(), ids.end());
    std::vector<std::size_t> hits;
    for (auto id : ids)
      for (auto r : by_first_[id])
        if (std::includes(ids.begin(), ids.end(), encoded_[r].begin(), encoded_[r].end())) hits.push_back(r);
    std::sort(hits.begin(), hits.end());
    return hits;
  }

  SentencePrediction classify(const Itemset& items) const {
    SentencePrediction p;
    p.scores.assign(classes_.size(), 0.0);
    auto hits = match_indices(items);
    if (hits.empty()) {
      p.cls = fallback_;
      p.abstained = true;
      return p;
    }
    for (auto r : hits) p.scores[rule_class_[r]] += rules_[r].confidence;
    p.cls = classes_[argmax(p.scores)];
    return p;
  }

 private:
  std::vector<Rule> rules_;
  std::vector<std::string> classes_;
  std::string fallback_;
  Aggregation aggregation_;
  std::size_t fallback_index_ = 0;
  std::vector<std::size_t> rule_class_;
  std::vector<std::vector<std::uint32_t>> encoded_;
  std::unordered_map<std::string, std::uint32_t> feature_id_;
  std::vector<std::vector<std::size_t>> by_first_;  // rules keyed by their smallest item id
};

inline std::vector<Rule> match_rules(const Itemset& items, const RuleClassifier& rc) {
  std::vector<Rule> out;
  for (auto r : rc.match_indices(items)) out.push_back(rc.rules()[r]);
  return out;
}

inline SentencePrediction classify_sentence(const Itemset& items, const RuleClassifier& rc) {
  return rc.classify(items);
}

// Weighted vote: each non-abstaining sentence adds its class scores.
inline DocumentPrediction classify_document(std::span<const Itemset> sentences, const RuleClassifier& rc) {
  DocumentPrediction d;
  d.scores.assign(rc.classes().size(), 0.0);
  bool any = false;
  for (const auto& s : sentences) {
    auto p = rc.classify(s);
    if (p.abstained) continue;
    any = true;
    for (std::size_t c = 0; c < d.scores.size(); ++c) d.scores[c] += p.scores[c];
  }
  if (!any) {
    d.cls = rc.fallback();
    d.abstained = true;
  } else {
    d.cls = rc.classes()[argmax(d.scores)];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Linear one-vs-rest SVM

struct LinearHyper {
  double lambda = 1e-4;  // L2 regularization strength
  int epochs = 20;
  std::uint64_t seed = 1;

  friend bool operator==(const LinearHyper&, const LinearHyper&) = default;
};

struct LinearModel {
  std::vector<std::string> classes;
  std::vector<Feature> vocabulary;  // sorted
  std::vector<std::vector<double>> weights;  // [class][feature]
  std::vector<double> bias;
  LinearHyper hyper;

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

namespace detail {

// splitmix64 finalizer over (seed, stream)
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Pegasos: step 1/(lambda t) on the L2-regularized hinge loss, weights kept
// as scale * v so that the shrink step is O(1). The bias is treated as an
// always-on feature.
inline void pegasos_binary(const std::vector<std::vector<std::uint32_t>>& rows, const std::vector<int>& labels,
                           std::size_t dims, const LinearHyper& h, std::uint64_t seed, std::vector<double>& w,
                           double& b) {
  std::vector<double> v(dims, 0.0);
  double vb = 0.0;
  double scale = 1.0;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < h.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (auto idx : order) {
      ++t;
      const double eta = 1.0 / (h.lambda * static_cast<double>(t));
      const auto& x = rows[idx];
      const double y = labels[idx];
      double margin = vb;
      for (auto j : x) margin += v[j];
      margin *= scale;
      scale *= 1.0 - 1.0 / static_cast<double>(t);
      if (scale == 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        vb = 0.0;
        scale = 1.0;
      }
      if (y * margin < 1.0) {
        const double step = eta * y / scale;
        for (auto j : x) v[j] += step;
        vb += step;
      }
      if (scale < 1e-9) {
        for (auto& vj : v) vj *= scale;
        vb *= scale;
        scale = 1.0;
      }
    }
  }
  w.resize(dims);
  for (std::size_t j = 0; j < dims; ++j) w[j] = v[j] * scale;
  b = vb * scale;
}

}  // namespace detail

inline LinearModel train_linear(std::span<const Transaction> train, std::vector<std::string> classes,
                                const LinearHyper& hyper = {}, std::size_t workers = 1) {
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (train.empty()) throw DataError("cannot train on an empty transaction list");
  {
    std::vector<std::string> present;
    for (const auto& t : train) present.push_back(t.cls);
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    if (present.size() < 2) throw DataError("linear training needs at least two classes in the data");
  }
  if (hyper.lambda <= 0.0 || hyper.epochs <= 0) throw DataError("lambda and epochs must be positive");

  LinearModel m;
  m.classes = classes;
  m.hyper = hyper;
  for (const auto& t : train) m.vocabulary.insert(m.vocabulary.end(), t.items.begin(), t.items.end());
  normalize(m.vocabulary);
  std::unordered_map<std::string, std::uint32_t> id;
  for (std::uint32_t i = 0; i < m.vocabulary.size(); ++i) id.emplace(m.vocabulary[i].str(), i);

  std::vector<std::vector<std::uint32_t>> rows;
  rows.reserve(train.size());
  for (const auto& t : train) {
    std::vector<std::uint32_t> r;
    for (const auto& f : t.items) r.push_back(id.at(f.str()));
    rows.push_back(std::move(r));
  }
  m.weights.resize(classes.size());
  m.bias.assign(classes.size(), 0.0);
  parallel_for(classes.size(), workers, [&](std::size_t c) {
    std::vector<int> labels;
    labels.reserve(train.size());
    for (const auto& t : train) labels.push_back(t.cls == classes[c] ? 1 : -1);
    detail::pegasos_binary(rows, labels, m.vocabulary.size(), hyper, detail::mix_seed(hyper.seed, c), m.weights[c],
                           m.bias[c]);
  });
  return m;
}

inline std::vector<double> linear_margins(const Itemset& items, const LinearModel& m) {
  std::vector<double> out = m.bias;
  for (const auto& f : items) {
    auto it = std::lower_bound(m.vocabulary.begin(), m.vocabulary.end(), f);
    if (it == m.vocabulary.end() || *it != f) continue;
    auto j = static_cast<std::size_t>(it - m.vocabulary.begin());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += m.weights[c][j];
  }
  return out;
}

struct LinearPrediction {
  std::string cls;
  std::vector<double> margins;
};

inline LinearPrediction predict_linear(const Itemset& items, const LinearModel& m) {
  auto margins = linear_margins(items, m);
  return {m.classes[argmax(margins)], std::move(margins)};
}

// Document decision: per-class margins summed over sentences; a document
// without sentences falls back to the biases.
inline LinearPrediction predict_linear_document(std::span<const Itemset> sentences, const LinearModel& m) {
  if (sentences.empty()) return predict_linear({}, m);
  std::vector<double> total(m.classes.size(), 0.0);
  for (const auto& s : sentences) {
    auto mg = linear_margins(s, m);
    for (std::size_t c = 0; c < total.size(); ++c) total[c] += mg[c];
  }
  return {m.classes[argmax(total)], std::move(total)};
}

// Versioned text format:
//   depcar-linear 1
//   hyper <lambda> <epochs> <seed>
//   classes <k> then k lines
//   vocabulary <v> then v lines
//   w TAB <class> TAB <bias> TAB <w_0> ... per class
inline void save_linear(std::ostream& out, const LinearModel& m) {
  out << "depcar-linear 1\n";
  out << "hyper " << exact(m.hyper.lambda) << ' ' << m.hyper.epochs << ' ' << m.hyper.seed << '\n';
  out << "classes " << m.classes.size() << '\n';
  for (const auto& c : m.classes) out << escape_field(c) << '\n';
  out << "vocabulary " << m.vocabulary.size() << '\n';
  for (const auto& f : m.vocabulary) out << escape_field(f.str()) << '\n';
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    out << "w\t" << escape_field(m.classes[c]) << '\t' << exact(m.bias[c]);
    for (double w : m.weights[c]) out << '\t' << exact(w);
    out << '\n';
  }
}

inline LinearModel load_linear(std::istream& in, const std::string& origin) {
  auto fail = [&](const std::string& what) -> LinearModel { throw DataError(origin + ": " + what); };
  std::string line, word;
  LinearModel m;
  if (!std::getline(in, line) || line != "depcar-linear 1") return fail("unsupported model header");
  if (!(in >> word >> m.hyper.lambda >> m.hyper.epochs >> m.hyper.seed) || word != "hyper") return fail("bad hyper line");
  std::size_t n = 0;
  if (!(in >> word >> n) || word != "classes") return fail("bad classes line");
  std::getline(in, line);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) return fail("truncated class list");
    m.classes.push_back(unescape_field(line));
  }
  if (!(in >> word >> n) || word != "vocabulary") return fail("bad vocabulary line");
  std::getline(in, line);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) return fail("truncated vocabulary");
    auto f = Feature::parse(unescape_field(line));
    if (!f) return fail("malformed feature '" + line + "'");
    m.vocabulary.push_back(*f);
  }
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    if (!std::getline(in, line)) return fail("missing weights for class " + m.classes[c]);
    auto fields = detail::split(line, '\t');
    if (fields.size() != m.vocabulary.size() + 3 || fields[0] != "w" || unescape_field(fields[1]) != m.classes[c])
      return fail("bad weight line for class " + m.classes[c]);
    m.bias.push_back(std::stod(fields[2]));
    std::vector<double> w;
    w.reserve(m.vocabulary.size());
    for (std::size_t j = 3; j < fields.size(); ++j) w.push_back(std::stod(fields[j]));
    m.weights.push_back(std::move(w));
  }
  // vocabulary may come in any order; restore the sorted layout
  std::vector<std::size_t> order(m.vocabulary.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m.vocabulary[a] < m.vocabulary[b]; });
  for (std::size_t j = 1; j < order.size(); ++j)
    if (m.vocabulary[order[j]] == m.vocabulary[order[j - 1]]) return fail("duplicate vocabulary entry");
  LinearModel sorted = m;
  for (std::size_t j = 0; j < order.size(); ++j) {
    sorted.vocabulary[j] = m.vocabulary[order[j]];
    for (std::size_t c = 0; c < m.weights.size(); ++c) sorted.weights[c][j] = m.weights[c][order[j]];
  }
  return sorted;
}

}  // namespace depcar
