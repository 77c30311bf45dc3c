#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "depcar/error.hpp"

namespace depcar {

// Coarse part of speech. Only these four tags ever reach a feature.
enum class CoarsePos { Noun, ProperNoun, Verb, Other };

inline std::string_view to_string(CoarsePos p) {
  switch (p) {
    case CoarsePos::Noun: return "n";
    case CoarsePos::ProperNoun: return "np";
    case CoarsePos::Verb: return "v";
    case CoarsePos::Other: return "x";
  }
  return "x";
}

inline std::optional<CoarsePos> parse_coarse_pos(std::string_view s) {
  if (s == "n") return CoarsePos::Noun;
  if (s == "np") return CoarsePos::ProperNoun;
  if (s == "v") return CoarsePos::Verb;
  if (s == "x") return CoarsePos::Other;
  return std::nullopt;
}

inline bool is_nominal(CoarsePos p) { return p == CoarsePos::Noun || p == CoarsePos::ProperNoun; }

// Word-to-feature reduction: light stemming or rootification.
enum class TauMode { Stem, Root };

inline std::string_view to_string(TauMode t) { return t == TauMode::Stem ? "stem" : "root"; }

inline constexpr std::string_view kRootMark = "\xE2\x88\x9A";  // U+221A

struct Token {
  int index = 0;  // 1-based position
  std::string surface;
  std::string stem;
  std::optional<std::string> root;
  CoarsePos cpos = CoarsePos::Other;
  std::string fpos;
  int head = 0;  // 0 marks the sentence head
  std::string deprel;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Sentence {
  std::vector<Token> tokens;
  int root_index = 0;  // 1-based index of the token with head 0, 0 if none

  const Token& token(int index) const { return tokens.at(static_cast<std::size_t>(index - 1)); }
  const Token* head_token() const { return root_index > 0 ? &token(root_index) : nullptr; }

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

inline int find_root_index(const Sentence& s) {
  for (const auto& t : s.tokens)
    if (t.head == 0) return t.index;
  return 0;
}

struct Document {
  std::string id;
  std::string label;
  std::vector<Sentence> sentences;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::vector<Document> documents;
  std::vector<std::string> classes;  // sorted, distinct
  TauMode tau_mode = TauMode::Stem;

  std::size_t sentence_count() const {
    std::size_t n = 0;
    for (const auto& d : documents) n += d.sentences.size();
    return n;
  }

  std::size_t class_index(std::string_view label) const {
    auto it = std::lower_bound(classes.begin(), classes.end(), label);
    if (it == classes.end() || *it != label) throw DataError("unknown class '" + std::string(label) + "'");
    return static_cast<std::size_t>(it - classes.begin());
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Sorted distinct document labels.
inline std::vector<std::string> derive_classes(const std::vector<Document>& docs) {
  std::set<std::string> s;
  for (const auto& d : docs) s.insert(d.label);
  return {s.begin(), s.end()};
}

// A (coarse POS, stem-or-root) pair. Ordering and equality follow the
// serialized form "cpos:" + ("√" if root) + text.
class Feature {
 public:
  Feature() = default;
  Feature(CoarsePos cpos, std::string text, bool is_root)
      : cpos_(cpos), text_(std::move(text)), is_root_(is_root) {
    key_.reserve(text_.size() + 6);
    key_.append(to_string(cpos_));
    key_.push_back(':');
    if (is_root_) key_.append(kRootMark);
    key_.append(text_);
  }

  static std::optional<Feature> parse(std::string_view s) {
    auto colon = s.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    auto cpos = parse_coarse_pos(s.substr(0, colon));
    if (!cpos) return std::nullopt;
    std::string_view rest = s.substr(colon + 1);
    bool root = rest.starts_with(kRootMark);
    if (root) rest.remove_prefix(kRootMark.size());
    if (rest.empty()) return std::nullopt;
    return Feature(*cpos, std::string(rest), root);
  }

  CoarsePos cpos() const { return cpos_; }
  const std::string& text() const { return text_; }
  bool is_root() const { return is_root_; }
  const std::string& str() const { return key_; }

  friend bool operator==(const Feature& a, const Feature& b) { return a.key_ == b.key_; }
  friend auto operator<=>(const Feature& a, const Feature& b) { return a.key_ <=> b.key_; }

 private:
  CoarsePos cpos_ = CoarsePos::Other;
  std::string text_;
  bool is_root_ = false;
  std::string key_;
};

inline Feature make_feature(const Token& t, TauMode tau) {
  if (tau == TauMode::Root && t.root && !t.root->empty()) return Feature(t.cpos, *t.root, true);
  return Feature(t.cpos, t.stem, false);
}

// Fine-to-coarse POS mapping. Exact entries win over prefix rules; anything
// unmatched maps to x.
class PosTable {
 public:
  static PosTable defaults() {
    PosTable t;
    t.prefixes_ = {{"DTNNP", CoarsePos::ProperNoun}, {"NNP", CoarsePos::ProperNoun},
                   {"DTNN", CoarsePos::Noun},        {"NN", CoarsePos::Noun},
                   {"VB", CoarsePos::Verb}};
    t.exact_ = {{"NOUN", CoarsePos::Noun}, {"PROPN", CoarsePos::ProperNoun}, {"VERB", CoarsePos::Verb}};
    return t;
  }

  void set(std::string fine, CoarsePos coarse) { exact_[std::move(fine)] = coarse; }

  CoarsePos map(std::string_view fine) const {
    if (auto it = exact_.find(std::string(fine)); it != exact_.end()) return it->second;
    for (const auto& [prefix, coarse] : prefixes_)
      if (fine.starts_with(prefix)) return coarse;
    return CoarsePos::Other;
  }

  // Overlays FINE<TAB>COARSE lines onto the table. Blank lines and lines
  // starting with '#' are skipped.
  void load(std::istream& in, const std::string& origin) {
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw DataError(origin + ":" + std::to_string(lineno) + ": expected FINE<TAB>COARSE");
      auto coarse = parse_coarse_pos(std::string_view(line).substr(tab + 1));
      if (!coarse)
        throw DataError(origin + ":" + std::to_string(lineno) + ": field COARSE: unknown coarse tag '" +
                        line.substr(tab + 1) + "'");
      set(line.substr(0, tab), *coarse);
    }
  }

  static PosTable from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open POS map '" + path + "'");
    PosTable t = defaults();
    t.load(in, path);
    return t;
  }

 private:
  std::unordered_map<std::string, CoarsePos> exact_;
  std::vector<std::pair<std::string, CoarsePos>> prefixes_;  // longest first
};

inline CoarsePos map_fine_pos(std::string_view fpos, const PosTable& table) { return table.map(fpos); }

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string where;  // "doc <id> sentence <n>"
  std::string what;
};

inline std::vector<std::string> sentence_violations(const Sentence& s) {
  std::vector<std::string> out;
  const int n = static_cast<int>(s.tokens.size());
  if (n == 0) {
    out.emplace_back("empty sentence");
    return out;
  }
  int roots = 0;
  bool ranges_ok = true;
  for (int i = 0; i < n; ++i) {
    const Token& t = s.tokens[static_cast<std::size_t>(i)];
    if (t.index != i + 1) {
      out.push_back("token " + std::to_string(i + 1) + ": index " + std::to_string(t.index) + " out of sequence");
      ranges_ok = false;
    }
    if (t.stem.empty()) out.push_back("token " + std::to_string(i + 1) + ": empty stem");
    if (t.head == 0) {
      ++roots;
    } else if (t.head < 0 || t.head > n) {
      out.push_back("token " + std::to_string(i + 1) + ": head out of range");
      ranges_ok = false;
    } else if (t.head == i + 1) {
      out.push_back("token " + std::to_string(i + 1) + ": self-loop");
      ranges_ok = false;
    }
  }
  if (roots == 0) out.emplace_back("no root");
  if (roots > 1) out.emplace_back("multiple roots");
  if (!ranges_ok) return out;

  // Every token must reach a head-0 token in at most n steps.
  for (int i = 0; i < n; ++i) {
    int cur = i + 1;
    int steps = 0;
    while (cur != 0 && steps <= n) {
      cur = s.tokens[static_cast<std::size_t>(cur - 1)].head;
      ++steps;
    }
    if (cur != 0) {
      out.push_back("token " + std::to_string(i + 1) + ": cycle");
      break;
    }
  }
  return out;
}

inline std::vector<Violation> validate(const Corpus& c) {
  std::vector<Violation> report;
  std::set<std::string> classes(c.classes.begin(), c.classes.end());
  for (const auto& d : c.documents) {
    if (!classes.count(d.label)) report.push_back({"doc " + d.id, "label '" + d.label + "' not in class set"});
    if (d.sentences.empty()) report.push_back({"doc " + d.id, "no sentences"});
    for (std::size_t si = 0; si < d.sentences.size(); ++si)
      for (auto& v : sentence_violations(d.sentences[si]))
        report.push_back({"doc " + d.id + " sentence " + std::to_string(si + 1), std::move(v)});
  }
  if (c.classes != derive_classes(c.documents)) report.push_back({"corpus", "class set differs from document labels"});
  return report;
}

// ---------------------------------------------------------------------------
// Loading

enum class CorpusFormat { Native, Conllu };

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

class LineError {
 public:
  LineError(const std::string& origin, std::size_t line) : origin_(origin), line_(line) {}
  [[noreturn]] void fail(std::string_view field, std::string_view message) const {
    throw DataError(origin_ + ":" + std::to_string(line_) + ": field " + std::string(field) + ": " +
                    std::string(message));
  }
  [[noreturn]] void fail(std::string_view message) const {
    throw DataError(origin_ + ":" + std::to_string(line_) + ": " + std::string(message));
  }

 private:
  const std::string& origin_;
  std::size_t line_;
};

inline int parse_int(const std::string& s, const LineError& err, std::string_view field) {
  if (s.empty()) err.fail(field, "empty");
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    err.fail(field, "not an integer: '" + s + "'");
  }
  if (used != s.size()) err.fail(field, "not an integer: '" + s + "'");
  return v;
}

// Resolves the coarse tag from an explicit CPOS column ('_' means "derive
// from the fine tag").
inline CoarsePos resolve_cpos(const std::string& cpos, const std::string& fpos, const PosTable& table,
                              const LineError& err) {
  if (cpos == "_" || cpos.empty()) return table.map(fpos);
  auto p = parse_coarse_pos(cpos);
  if (!p) err.fail("CPOS", "unknown coarse tag '" + cpos + "'");
  return *p;
}

inline void finish_sentence(std::vector<Token>& tokens, std::vector<Sentence>& out, const LineError& err) {
  if (tokens.empty()) return;
  const int n = static_cast<int>(tokens.size());
  for (const auto& t : tokens)
    if (t.head < 0 || t.head > n) err.fail("HEAD", "head out of range (" + std::to_string(t.head) + ")");
  Sentence s{std::move(tokens), 0};
  s.root_index = find_root_index(s);
  out.push_back(std::move(s));
  tokens.clear();
}

inline Corpus parse_native(std::istream& in, const std::string& origin, const PosTable& table, TauMode tau) {
  Corpus c;
  c.tau_mode = tau;
  std::vector<Token> tokens;
  Document* doc = nullptr;
  std::size_t doc_line = 0;
  int blank_run = 0;
  std::string line;
  std::size_t lineno = 0;
  auto close_doc = [&](std::size_t at) {
    LineError err(origin, at);
    finish_sentence(tokens, doc->sentences, err);
    if (doc->sentences.empty())
      LineError(origin, doc_line).fail("document '" + doc->id + "' has zero sentences");
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    LineError err(origin, lineno);
    if (line.starts_with("#doc")) {
      if (doc) close_doc(lineno);
      auto fields = split(trim(std::string_view(line).substr(4)), ' ');
      std::erase(fields, std::string());
      if (line.size() > 4 && line[4] != ' ' && line[4] != '\t') err.fail("malformed #doc header");
      if (fields.size() != 2) err.fail("#doc", "expected '#doc <id> <class>'");
      c.documents.push_back(Document{fields[0], fields[1], {}});
      doc = &c.documents.back();
      doc_line = lineno;
      blank_run = 0;
      continue;
    }
    if (!line.empty() && line[0] == '#') continue;
    if (trim(line).empty()) {
      if (doc) {
        finish_sentence(tokens, doc->sentences, err);
        if (++blank_run == 2) {
          close_doc(lineno);
          doc = nullptr;
        }
      }
      continue;
    }
    blank_run = 0;
    if (!doc) err.fail("token line outside a document (missing #doc header)");
    auto f = split(line, '\t');
    if (f.size() != 8) err.fail("expected 8 tab-separated fields, got " + std::to_string(f.size()));
    Token t;
    t.index = parse_int(f[0], err, "INDEX");
    if (t.index != static_cast<int>(tokens.size()) + 1)
      err.fail("INDEX", "expected " + std::to_string(tokens.size() + 1) + ", got " + f[0]);
    t.surface = f[1];
    t.stem = f[2];
    if (t.stem.empty() || t.stem == "_") err.fail("STEM", "empty stem");
    if (f[3] != "_" && !f[3].empty()) t.root = f[3];
    t.fpos = f[5];
    t.cpos = resolve_cpos(f[4], f[5], table, err);
    t.head = parse_int(f[6], err, "HEAD");
    if (t.head < 0) err.fail("HEAD", "head out of range (" + f[6] + ")");
    t.deprel = f[7];
    tokens.push_back(std::move(t));
  }
  if (doc) close_doc(lineno);
  c.classes = derive_classes(c.documents);
  return c;
}

inline std::optional<std::string> misc_value(const std::string& misc, std::string_view key) {
  if (misc == "_") return std::nullopt;
  for (const auto& kv : split(misc, '|')) {
    auto eq = kv.find('=');
    if (eq != std::string::npos && std::string_view(kv).substr(0, eq) == key) return kv.substr(eq + 1);
  }
  return std::nullopt;
}

inline std::optional<std::string> comment_value(const std::string& line, std::string_view key) {
  // "# key = value"
  std::string body = trim(std::string_view(line).substr(1));
  if (!body.starts_with(key)) return std::nullopt;
  std::string rest = trim(std::string_view(body).substr(key.size()));
  if (rest.empty() || rest[0] != '=') return std::nullopt;
  return trim(std::string_view(rest).substr(1));
}

inline Corpus parse_conllu(std::istream& in, const std::string& origin, const PosTable& table, TauMode tau) {
  Corpus c;
  c.tau_mode = tau;
  std::vector<Token> tokens;
  Document* doc = nullptr;
  std::size_t doc_line = 0;
  std::string line;
  std::size_t lineno = 0;
  auto close_doc = [&](std::size_t at) {
    finish_sentence(tokens, doc->sentences, LineError(origin, at));
    if (doc->label.empty()) LineError(origin, doc_line).fail("document '" + doc->id + "' has no '# class = ' line");
    if (doc->sentences.empty())
      LineError(origin, doc_line).fail("document '" + doc->id + "' has zero sentences");
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    LineError err(origin, lineno);
    if (!line.empty() && line[0] == '#') {
      if (auto id = comment_value(line, "newdoc id")) {
        if (doc) close_doc(lineno);
        c.documents.push_back(Document{*id, {}, {}});
        doc = &c.documents.back();
        doc_line = lineno;
      } else if (auto cls = comment_value(line, "class")) {
        if (!doc) err.fail("'# class' before '# newdoc id'");
        if (cls->empty()) err.fail("class", "empty class name");
        doc->label = *cls;
      }
      continue;
    }
    if (trim(line).empty()) {
      if (doc) finish_sentence(tokens, doc->sentences, err);
      continue;
    }
    if (!doc) err.fail("token line before any '# newdoc id' comment");
    auto f = split(line, '\t');
    if (f.size() != 10) err.fail("expected 10 tab-separated fields, got " + std::to_string(f.size()));
    if (f[0].find_first_of("-.") != std::string::npos) continue;  // multiword ranges, empty nodes
    Token t;
    t.index = parse_int(f[0], err, "ID");
    if (t.index != static_cast<int>(tokens.size()) + 1)
      err.fail("ID", "expected " + std::to_string(tokens.size() + 1) + ", got " + f[0]);
    t.surface = f[1];
    t.stem = f[2] == "_" ? f[1] : f[2];
    if (t.stem.empty()) err.fail("LEMMA", "empty stem");
    t.fpos = f[4] != "_" ? f[4] : f[3];
    t.cpos = table.map(t.fpos);
    t.head = parse_int(f[6], err, "HEAD");
    if (t.head < 0) err.fail("HEAD", "head out of range (" + f[6] + ")");
    t.deprel = f[7];
    t.root = misc_value(f[9], "Root");
    tokens.push_back(std::move(t));
  }
  if (doc) close_doc(lineno);
  c.classes = derive_classes(c.documents);
  return c;
}

}  // namespace detail

// Parses without the tree checks; per-line field errors still throw.
inline Corpus parse_corpus(std::istream& in, CorpusFormat format, const std::string& origin,
                           const PosTable& table = PosTable::defaults(), TauMode tau = TauMode::Stem) {
  return format == CorpusFormat::Native ? detail::parse_native(in, origin, table, tau)
                                        : detail::parse_conllu(in, origin, table, tau);
}

inline Corpus parse_corpus_file(const std::string& path, CorpusFormat format,
                                const PosTable& table = PosTable::defaults(), TauMode tau = TauMode::Stem) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  return parse_corpus(in, format, path, table, tau);
}

inline std::string describe(const std::vector<Violation>& report) {
  std::string out;
  for (const auto& v : report) out += v.where + ": " + v.what + "\n";
  return out;
}

inline Corpus load_corpus(const std::string& path, CorpusFormat format,
                          const PosTable& table = PosTable::defaults(), TauMode tau = TauMode::Stem) {
  Corpus c = parse_corpus_file(path, format, table, tau);
  if (auto report = validate(c); !report.empty()) throw DataError(path + ": invalid corpus\n" + describe(report));
  return c;
}

inline void write_native(std::ostream& out, const Corpus& c) {
  for (const auto& d : c.documents) {
    out << "#doc " << d.id << ' ' << d.label << '\n';
    for (const auto& s : d.sentences) {
      for (const auto& t : s.tokens)
        out << t.index << '\t' << t.surface << '\t' << t.stem << '\t' << (t.root ? *t.root : "_") << '\t'
            << to_string(t.cpos) << '\t' << t.fpos << '\t' << t.head << '\t' << t.deprel << '\n';
      out << '\n';
    }
    out << '\n';
  }
}

inline std::string serialize_native(const Corpus& c) {
  std::ostringstream out;
  write_native(out, c);
  return out.str();
}

// ---------------------------------------------------------------------------
// Root overlap

struct OverlapCell {
  std::size_t count = 0;
  std::string top_root;  // most frequent root in the cell, empty if count == 0
};

struct RootOverlap {
  std::vector<std::string> classes;
  std::vector<std::vector<OverlapCell>> cells;  // [row][col]; diagonal = single-class roots
  std::vector<std::size_t> by_class_count;      // [k-1] = roots in exactly k classes
  std::size_t distinct_roots = 0;
};

// Diagonal: roots seen in exactly one class. Off-diagonal [i][j]: roots seen
// in exactly classes {i, j}, more often in i (ties go to the smaller class
// name, i.e. the lower index). Cell representatives are the roots with the
// highest total count, ties broken lexicographically.
inline RootOverlap root_overlap_report(const Corpus& c) {
  if (c.tau_mode != TauMode::Root) throw DataError("report requires rootified corpus");
  const std::size_t k = c.classes.size();
  std::map<std::string, std::vector<std::size_t>> counts;
  for (const auto& d : c.documents) {
    std::size_t ci = c.class_index(d.label);
    for (const auto& s : d.sentences)
      for (const auto& t : s.tokens)
        if (t.root && !t.root->empty()) {
          auto& v = counts[*t.root];
          if (v.empty()) v.assign(k, 0);
          ++v[ci];
        }
  }
  RootOverlap r;
  r.classes = c.classes;
  r.cells.assign(k, std::vector<OverlapCell>(k));
  r.by_class_count.assign(k, 0);
  r.distinct_roots = counts.size();
  std::vector<std::vector<std::size_t>> best(k, std::vector<std::size_t>(k, 0));
  for (const auto& [root, v] : counts) {
    std::vector<std::size_t> present;
    std::size_t total = 0;
    for (std::size_t i = 0; i < k; ++i)
      if (v[i] > 0) {
        present.push_back(i);
        total += v[i];
      }
    ++r.by_class_count[present.size() - 1];
    std::size_t row = 0, col = 0;
    if (present.size() == 1) {
      row = col = present[0];
    } else if (present.size() == 2) {
      auto [a, b] = std::pair{present[0], present[1]};
      row = v[a] >= v[b] ? a : b;
      col = row == a ? b : a;
    } else {
      continue;
    }
    auto& cell = r.cells[row][col];
    ++cell.count;
    // map iteration is lexicographic, so strict > keeps the smallest name on ties
    if (total > best[row][col]) {
      best[row][col] = total;
      cell.top_root = root;
    }
  }
  return r;
}

}  // namespace depcar
