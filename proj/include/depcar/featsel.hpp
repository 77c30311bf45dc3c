#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "depcar/corpus.hpp"
#include "depcar/error.hpp"
#include "depcar/parallel.hpp"
#include "depcar/textio.hpp"

namespace depcar {

// Sorted, duplicate-free feature list.
using Itemset = std::vector<Feature>;

inline void normalize(Itemset& items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
}

inline bool contains_all(const Itemset& haystack, const Itemset& needle) {
  return std::includes(haystack.begin(), haystack.end(), needle.begin(), needle.end());
}

// ---------------------------------------------------------------------------
// Strategies

enum class StrategyKind { TfidfTopN, HeadOnly, NounsDist1, HeadPlusNouns, HeadAllNouns, HeadAllNounsVerbs };

struct StrategySpec {
  StrategyKind kind = StrategyKind::HeadOnly;
  int param = 0;  // N for TfidfTopN, max distance for HeadPlusNouns

  static StrategySpec tfidf_top_n(int n) { return {StrategyKind::TfidfTopN, n}; }
  static StrategySpec head_only() { return {StrategyKind::HeadOnly, 0}; }
  static StrategySpec nouns_dist_1() { return {StrategyKind::NounsDist1, 0}; }
  static StrategySpec head_plus_nouns(int max_dist) { return {StrategyKind::HeadPlusNouns, max_dist}; }
  static StrategySpec head_all_nouns() { return {StrategyKind::HeadAllNouns, 0}; }
  static StrategySpec head_all_nouns_verbs() { return {StrategyKind::HeadAllNounsVerbs, 0}; }

  friend bool operator==(const StrategySpec&, const StrategySpec&) = default;
};

inline std::string to_string(const StrategySpec& s) {
  switch (s.kind) {
    case StrategyKind::TfidfTopN: return "tfidf:" + std::to_string(s.param);
    case StrategyKind::HeadOnly: return "head-only";
    case StrategyKind::NounsDist1: return "nouns-dist1";
    case StrategyKind::HeadPlusNouns: return "head-nouns:" + std::to_string(s.param);
    case StrategyKind::HeadAllNouns: return "head-all-nouns";
    case StrategyKind::HeadAllNounsVerbs: return "head-all-nouns-verbs";
  }
  return "?";
}

// Accepts the canonical names above plus the roman-numeral shorthands
// I, II, III1..III3, IV and IV'.
inline StrategySpec parse_strategy(std::string_view name) {
  auto positive = [&](std::string_view digits) {
    int v = 0;
    if (digits.empty() || digits.size() > 6) throw UsageError("bad strategy parameter in '" + std::string(name) + "'");
    for (char ch : digits) {
      if (ch < '0' || ch > '9') throw UsageError("bad strategy parameter in '" + std::string(name) + "'");
      v = v * 10 + (ch - '0');
    }
    if (v <= 0) throw UsageError("strategy parameter must be positive in '" + std::string(name) + "'");
    return v;
  };
  if (name.starts_with("tfidf:")) return StrategySpec::tfidf_top_n(positive(name.substr(6)));
  if (name.starts_with("head-nouns:")) return StrategySpec::head_plus_nouns(positive(name.substr(11)));
  if (name.starts_with("III") && name.size() > 3 && name != "III") return StrategySpec::head_plus_nouns(positive(name.substr(3)));
  if (name == "head-only" || name == "I") return StrategySpec::head_only();
  if (name == "nouns-dist1" || name == "II") return StrategySpec::nouns_dist_1();
  if (name == "head-all-nouns" || name == "IV") return StrategySpec::head_all_nouns();
  if (name == "head-all-nouns-verbs" || name == "IV'") return StrategySpec::head_all_nouns_verbs();
  throw UsageError("unknown strategy '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// tfidf over sentences

// Sentence frequency of every feature image in a corpus.
class TfidfIndex {
 public:
  TfidfIndex(const Corpus& c, TauMode tau) : tau_(tau) {
    for (const auto& d : c.documents)
      for (const auto& s : d.sentences) {
        ++sentences_;
        Itemset seen;
        seen.reserve(s.tokens.size());
        for (const auto& t : s.tokens) seen.push_back(make_feature(t, tau));
        normalize(seen);
        for (const auto& f : seen) ++sentence_freq_[f.str()];
      }
  }

  TauMode tau() const { return tau_; }
  std::size_t sentences() const { return sentences_; }

  std::size_t sentence_frequency(const Feature& f) const {
    auto it = sentence_freq_.find(f.str());
    return it == sentence_freq_.end() ? 0 : it->second;
  }

  double idf(const Feature& f) const {
    std::size_t df = sentence_frequency(f);
    if (df == 0) return 0.0;
    return std::log(static_cast<double>(sentences_) / static_cast<double>(df));
  }

 private:
  TauMode tau_;
  std::size_t sentences_ = 0;
  std::unordered_map<std::string, std::size_t> sentence_freq_;
};

inline std::size_t occurrences(const Feature& f, const Sentence& s, TauMode tau) {
  return static_cast<std::size_t>(
      std::count_if(s.tokens.begin(), s.tokens.end(), [&](const Token& t) { return make_feature(t, tau) == f; }));
}

// (count of tau(w) in tau(s) / |s|) * ln(|C| / |{S in C : tau(w) in tau(S)}|)
inline double tfidf(const Token& w, const Sentence& s, const TfidfIndex& index) {
  Feature f = make_feature(w, index.tau());
  double tf = static_cast<double>(occurrences(f, s, index.tau())) / static_cast<double>(s.tokens.size());
  return tf * index.idf(f);
}

inline double tfidf(const Token& w, const Sentence& s, const Corpus& c, TauMode tau) {
  return tfidf(w, s, TfidfIndex(c, tau));
}

struct RankedFeature {
  Feature feature;
  double score = 0.0;
  std::size_t count = 0;
};

// Distinct feature images of s, best first: tfidf desc, in-sentence count
// desc, serialized feature asc.
inline std::vector<RankedFeature> rank_tfidf(const Sentence& s, const TfidfIndex& index) {
  std::vector<RankedFeature> ranked;
  if (s.tokens.empty()) return ranked;
  Itemset all;
  for (const auto& t : s.tokens) all.push_back(make_feature(t, index.tau()));
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j] == all[i]) ++j;
    double tf = static_cast<double>(j - i) / static_cast<double>(s.tokens.size());
    ranked.push_back({all[i], tf * index.idf(all[i]), j - i});
    i = j;
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedFeature& a, const RankedFeature& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.count > b.count;
  });
  return ranked;
}

inline Itemset select_tfidf_top_n(const Sentence& s, const TfidfIndex& index, std::size_t n) {
  auto ranked = rank_tfidf(s, index);
  Itemset out;
  for (std::size_t i = 0; i < ranked.size() && i < n; ++i) out.push_back(ranked[i].feature);
  normalize(out);
  return out;
}

inline Itemset select_tfidf_top_n(const Sentence& s, const Corpus& c, std::size_t n, TauMode tau) {
  return select_tfidf_top_n(s, TfidfIndex(c, tau), n);
}

// ---------------------------------------------------------------------------
// Dependency-tree strategies

// Edge distance from the sentence head for every token (index i-1 for token
// i). Expects a valid tree.
inline std::vector<int> head_depths(const Sentence& s) {
  const std::size_t n = s.tokens.size();
  std::vector<int> depth(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    // climb until a token of known depth (or the head) is reached
    std::vector<std::size_t> path;
    std::size_t cur = i;
    while (depth[cur] < 0) {
      int h = s.tokens[cur].head;
      if (h == 0) {
        depth[cur] = 0;
        break;
      }
      path.push_back(cur);
      cur = static_cast<std::size_t>(h - 1);
      if (path.size() > n) throw DataError("dependency cycle");
    }
    int d = depth[cur];
    for (auto it = path.rbegin(); it != path.rend(); ++it) depth[*it] = ++d;
  }
  return depth;
}

inline int depth_from_head(const Sentence& s, const Token& t) {
  int d = 0;
  for (int cur = t.index; s.token(cur).head != 0; cur = s.token(cur).head) {
    if (++d > static_cast<int>(s.tokens.size())) throw DataError("dependency cycle");
  }
  return d;
}

inline bool head_is_content(const Token& head) { return head.cpos != CoarsePos::Other; }

// Items selected from one sentence. The head contributes only when it is a
// noun, proper noun or verb; this applies to every head-based strategy.
inline Itemset extract_strategy(const Sentence& s, const StrategySpec& spec, const TfidfIndex* index, TauMode tau) {
  if (spec.kind == StrategyKind::TfidfTopN) {
    if (!index) throw DataError("tfidf strategy requires a corpus index");
    return select_tfidf_top_n(s, *index, static_cast<std::size_t>(spec.param));
  }
  Itemset out;
  const Token* head = s.head_token();
  if (!head) return out;
  bool with_head = spec.kind != StrategyKind::NounsDist1;
  if (with_head && head_is_content(*head)) out.push_back(make_feature(*head, tau));
  if (spec.kind == StrategyKind::HeadOnly) return out;

  auto depth = head_depths(s);
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const Token& t = s.tokens[i];
    if (t.head == 0) continue;
    bool take = false;
    switch (spec.kind) {
      case StrategyKind::NounsDist1: take = is_nominal(t.cpos) && depth[i] == 1; break;
      case StrategyKind::HeadPlusNouns: take = is_nominal(t.cpos) && depth[i] <= spec.param; break;
      case StrategyKind::HeadAllNouns: take = is_nominal(t.cpos); break;
      case StrategyKind::HeadAllNounsVerbs: take = is_nominal(t.cpos) || t.cpos == CoarsePos::Verb; break;
      default: break;
    }
    if (take) out.push_back(make_feature(t, tau));
  }
  normalize(out);
  return out;
}

inline Itemset extract_strategy(const Sentence& s, const StrategySpec& spec, const Corpus& c, TauMode tau) {
  if (spec.kind == StrategyKind::TfidfTopN) {
    TfidfIndex index(c, tau);
    return extract_strategy(s, spec, &index, tau);
  }
  return extract_strategy(s, spec, nullptr, tau);
}

// ---------------------------------------------------------------------------
// Transactions

struct Transaction {
  Itemset items;
  std::string cls;
  std::size_t doc_index = 0;  // position in Corpus::documents
  std::string doc_id;
  std::size_t sentence_index = 0;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct TransactionSet {
  std::vector<Transaction> transactions;
  std::size_t skipped = 0;  // sentences with an empty itemset
  double avg_transaction_size = 0.0;
};

inline double mean_size(const std::vector<Transaction>& ts) {
  if (ts.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& t : ts) total += t.items.size();
  return static_cast<double>(total) / static_cast<double>(ts.size());
}

// One transaction per sentence with a non-empty itemset, in corpus order.
inline TransactionSet corpus_to_transactions(const Corpus& c, const StrategySpec& spec, TauMode tau,
                                             std::size_t workers = 1) {
  std::optional<TfidfIndex> index;
  if (spec.kind == StrategyKind::TfidfTopN) index.emplace(c, tau);

  struct Ref {
    std::size_t doc, sent;
  };
  std::vector<Ref> refs;
  for (std::size_t d = 0; d < c.documents.size(); ++d)
    for (std::size_t s = 0; s < c.documents[d].sentences.size(); ++s) refs.push_back({d, s});

  std::vector<Itemset> items(refs.size());
  parallel_for(refs.size(), workers, [&](std::size_t i) {
    items[i] = extract_strategy(c.documents[refs[i].doc].sentences[refs[i].sent], spec,
                                index ? &*index : nullptr, tau);
  });

  TransactionSet out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (items[i].empty()) {
      ++out.skipped;
      continue;
    }
    const Document& d = c.documents[refs[i].doc];
    out.transactions.push_back(Transaction{std::move(items[i]), d.label, refs[i].doc, d.id, refs[i].sent});
  }
  if (out.transactions.empty()) throw DataError("strategy yields empty corpus");
  out.avg_transaction_size = mean_size(out.transactions);
  return out;
}

// <class>TAB<item>TAB<item>... with items in lexicographic order.
inline void write_transactions(std::ostream& out, const std::vector<Transaction>& ts) {
  for (const auto& t : ts) {
    out << escape_field(t.cls);
    for (const auto& f : t.items) out << '\t' << escape_field(f.str());
    out << '\n';
  }
}

// Reads the dump format back. Each line becomes its own document.
inline std::vector<Transaction> read_transactions(std::istream& in, const std::string& origin) {
  std::vector<Transaction> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = detail::split(line, '\t');
    Transaction t;
    t.cls = unescape_field(fields[0]);
    if (t.cls.empty()) throw DataError(origin + ":" + std::to_string(lineno) + ": field class: empty");
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto f = Feature::parse(unescape_field(fields[i]));
      if (!f) throw DataError(origin + ":" + std::to_string(lineno) + ": field item: malformed '" + fields[i] + "'");
      t.items.push_back(*f);
    }
    normalize(t.items);
    if (t.items.empty()) throw DataError(origin + ":" + std::to_string(lineno) + ": empty transaction");
    t.doc_index = out.size();
    t.doc_id = "t" + std::to_string(lineno);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace depcar
