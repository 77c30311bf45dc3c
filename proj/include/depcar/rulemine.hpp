#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "depcar/error.hpp"
#include "depcar/featsel.hpp"
#include "depcar/parallel.hpp"
#include "depcar/textio.hpp"

namespace depcar {

struct Rule {
  Itemset items;
  std::string cls;
  double support = 0.0;
  double confidence = 0.0;

  friend bool operator==(const Rule&, const Rule&) = default;
};

struct MineConfig {
  double min_support = 0.01;
  double min_confidence = 0.5;
  std::size_t rule_budget = 10000;
  std::optional<std::size_t> max_itemset_size;  // nullopt = unbounded
};

struct FrequentItemset {
  Itemset items;
  double support = 0.0;
  std::size_t count = 0;

  friend bool operator==(const FrequentItemset&, const FrequentItemset&) = default;
};

// Global rule order: support desc, confidence desc, itemset size asc,
// items lexicographically asc, class asc.
inline bool rule_before(const Rule& a, const Rule& b) {
  if (a.support != b.support) return a.support > b.support;
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.items.size() != b.items.size()) return a.items.size() < b.items.size();
  if (a.items != b.items) return a.items < b.items;
  return a.cls < b.cls;
}

inline bool frequent_before(const FrequentItemset& a, const FrequentItemset& b) {
  if (a.support != b.support) return a.support > b.support;
  if (a.items.size() != b.items.size()) return a.items.size() < b.items.size();
  return a.items < b.items;
}

// "exceeds" threshold, implemented inclusively
inline bool meets(std::size_t count, std::size_t total, double threshold) {
  return static_cast<double>(count) / static_cast<double>(total) >= threshold;
}

inline double support(const Itemset& items, std::span<const Transaction> ts) {
  if (ts.empty()) throw DataError("support of an empty transaction list");
  std::size_t covered = 0;
  for (const auto& t : ts)
    if (contains_all(t.items, items)) ++covered;
  return static_cast<double>(covered) / static_cast<double>(ts.size());
}

inline double confidence(const Itemset& items, const std::string& cls, std::span<const Transaction> ts) {
  std::size_t covered = 0, hits = 0;
  for (const auto& t : ts)
    if (contains_all(t.items, items)) {
      ++covered;
      if (t.cls == cls) ++hits;
    }
  if (covered == 0) throw DataError("undefined confidence: itemset covers no transaction");
  return static_cast<double>(hits) / static_cast<double>(covered);
}

namespace detail {

using Bits = std::vector<std::uint64_t>;

inline std::size_t popcount(const Bits& b) {
  std::size_t n = 0;
  for (auto w : b) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

inline std::size_t intersect(const Bits& a, const Bits& b, Bits& out) {
  out.resize(a.size());
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] & b[i];
    n += static_cast<std::size_t>(std::popcount(out[i]));
  }
  return n;
}

inline std::size_t and_count(const Bits& a, const Bits& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += static_cast<std::size_t>(std::popcount(a[i] & b[i]));
  return n;
}

// Vertical layout of a transaction list: one tid bitset per item and per
// class. Item ids follow feature order, class ids follow name order.
struct VerticalDb {
  std::vector<Feature> vocab;
  std::vector<std::string> classes;
  std::vector<Bits> item_tids;
  std::vector<Bits> class_tids;
  std::size_t rows = 0;

  explicit VerticalDb(std::span<const Transaction> ts) : rows(ts.size()) {
    for (const auto& t : ts) {
      vocab.insert(vocab.end(), t.items.begin(), t.items.end());
      classes.push_back(t.cls);
    }
    normalize(vocab);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    std::unordered_map<std::string, std::uint32_t> item_id, class_id;
    for (std::uint32_t i = 0; i < vocab.size(); ++i) item_id.emplace(vocab[i].str(), i);
    for (std::uint32_t i = 0; i < classes.size(); ++i) class_id.emplace(classes[i], i);
    const std::size_t words = (rows + 63) / 64;
    item_tids.assign(vocab.size(), Bits(words, 0));
    class_tids.assign(classes.size(), Bits(words, 0));
    for (std::size_t r = 0; r < rows; ++r) {
      const std::uint64_t bit = std::uint64_t{1} << (r % 64);
      for (const auto& f : ts[r].items) item_tids[item_id.at(f.str())][r / 64] |= bit;
      class_tids[class_id.at(ts[r].cls)][r / 64] |= bit;
    }
  }
};

struct Mined {
  std::vector<std::uint32_t> ids;
  std::size_t count = 0;
  std::vector<std::size_t> class_counts;
};

class EclatMiner {
 public:
  EclatMiner(const VerticalDb& db, double min_support, std::size_t max_size, bool with_classes)
      : db_(db), min_support_(min_support), max_size_(max_size), with_classes_(with_classes) {}

  std::vector<Mined> run(std::size_t workers) const {
    struct Node {
      std::uint32_t id;
      std::size_t count;
    };
    std::vector<Node> roots;
    for (std::uint32_t i = 0; i < db_.vocab.size(); ++i) {
      std::size_t n = popcount(db_.item_tids[i]);
      if (n > 0 && meets(n, db_.rows, min_support_)) roots.push_back({i, n});
    }
    std::vector<std::vector<Mined>> branches(roots.size());
    parallel_for(roots.size(), workers, [&](std::size_t b) {
      std::vector<Candidate> tail;
      for (std::size_t j = b + 1; j < roots.size(); ++j) {
        Candidate c{roots[j].id, {}, 0};
        c.count = intersect(db_.item_tids[roots[b].id], db_.item_tids[roots[j].id], c.tids);
        if (c.count > 0 && meets(c.count, db_.rows, min_support_)) tail.push_back(std::move(c));
      }
      std::vector<std::uint32_t> prefix{roots[b].id};
      emit(prefix, db_.item_tids[roots[b].id], roots[b].count, branches[b]);
      if (max_size_ > 1) extend(prefix, tail, branches[b]);
    });
    std::vector<Mined> out;
    for (auto& br : branches)
      for (auto& m : br) out.push_back(std::move(m));
    return out;
  }

 private:
  struct Candidate {
    std::uint32_t id;
    Bits tids;
    std::size_t count;
  };

  void emit(const std::vector<std::uint32_t>& ids, const Bits& tids, std::size_t count, std::vector<Mined>& out) const {
    Mined m{ids, count, {}};
    if (with_classes_) {
      m.class_counts.resize(db_.classes.size());
      for (std::size_t c = 0; c < db_.classes.size(); ++c) m.class_counts[c] = and_count(tids, db_.class_tids[c]);
    }
    out.push_back(std::move(m));
  }

  // prefix has already been emitted; each candidate extends it by one item
  void extend(std::vector<std::uint32_t>& prefix, const std::vector<Candidate>& cands, std::vector<Mined>& out) const {
    for (std::size_t i = 0; i < cands.size(); ++i) {
      prefix.push_back(cands[i].id);
      emit(prefix, cands[i].tids, cands[i].count, out);
      if (prefix.size() < max_size_) {
        std::vector<Candidate> next;
        for (std::size_t j = i + 1; j < cands.size(); ++j) {
          Candidate c{cands[j].id, {}, 0};
          c.count = intersect(cands[i].tids, cands[j].tids, c.tids);
          if (c.count > 0 && meets(c.count, db_.rows, min_support_)) next.push_back(std::move(c));
        }
        if (!next.empty()) extend(prefix, next, out);
      }
      prefix.pop_back();
    }
  }

  const VerticalDb& db_;
  double min_support_;
  std::size_t max_size_;
  bool with_classes_;
};

inline void check_support_threshold(double sigma) {
  if (!(sigma > 0.0 && sigma <= 1.0)) throw DataError("minimum support must lie in (0, 1]");
}

inline Itemset decode(const VerticalDb& db, const std::vector<std::uint32_t>& ids) {
  Itemset items;
  items.reserve(ids.size());
  for (auto id : ids) items.push_back(db.vocab[id]);
  return items;
}

}  // namespace detail

// All itemsets of size 1..max_size with support >= sigma, ordered by
// support desc, size asc, items asc.
inline std::vector<FrequentItemset> mine_frequent(std::span<const Transaction> ts, double sigma,
                                                  std::optional<std::size_t> max_size = std::nullopt,
                                                  std::size_t workers = 1) {
  detail::check_support_threshold(sigma);
  if (ts.empty()) return {};
  detail::VerticalDb db(ts);
  auto mined = detail::EclatMiner(db, sigma, max_size.value_or(std::numeric_limits<std::size_t>::max()), false)
                   .run(workers);
  std::vector<FrequentItemset> out;
  out.reserve(mined.size());
  for (const auto& m : mined)
    out.push_back({detail::decode(db, m.ids), static_cast<double>(m.count) / static_cast<double>(db.rows), m.count});
  std::sort(out.begin(), out.end(), frequent_before);
  return out;
}

// Top-n rules in global order. Input order does not matter.
inline std::vector<Rule> apply_budget(std::vector<Rule> rules, std::size_t n) {
  std::sort(rules.begin(), rules.end(), rule_before);
  if (rules.size() > n) rules.resize(n);
  return rules;
}

// Every CAR (frequent itemset, class) with confidence >= kappa, in global
// order and without the budget applied.
inline std::vector<Rule> mine_cars(std::span<const Transaction> ts, const MineConfig& cfg, std::size_t workers = 1) {
  if (ts.empty()) throw DataError("cannot mine an empty transaction list");
  detail::check_support_threshold(cfg.min_support);
  detail::VerticalDb db(ts);
  auto mined = detail::EclatMiner(db, cfg.min_support,
                                  cfg.max_itemset_size.value_or(std::numeric_limits<std::size_t>::max()), true)
                   .run(workers);
  std::vector<Rule> rules;
  for (const auto& m : mined) {
    Itemset items = detail::decode(db, m.ids);
    double supp = static_cast<double>(m.count) / static_cast<double>(db.rows);
    for (std::size_t c = 0; c < db.classes.size(); ++c) {
      if (m.class_counts[c] == 0) continue;
      double conf = static_cast<double>(m.class_counts[c]) / static_cast<double>(m.count);
      if (conf >= cfg.min_confidence) rules.push_back({items, db.classes[c], supp, conf});
    }
  }
  std::sort(rules.begin(), rules.end(), rule_before);
  return rules;
}

inline std::vector<Rule> generate_cars(std::span<const Transaction> ts, const MineConfig& cfg,
                                       std::size_t workers = 1) {
  auto rules = mine_cars(ts, cfg, workers);
  if (rules.size() > cfg.rule_budget) rules.resize(cfg.rule_budget);
  return rules;
}

// Restricts an ordered candidate list (mined at lower or equal thresholds)
// to what generate_cars would return at (sigma, kappa, budget).
inline std::vector<Rule> filter_rules(std::span<const Rule> ordered, double sigma, double kappa, std::size_t budget) {
  std::vector<Rule> out;
  for (const auto& r : ordered) {
    if (out.size() >= budget) break;
    if (r.support >= sigma && r.confidence >= kappa) out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Threshold tuning

using RuleScorer = std::function<double(const std::vector<Rule>&)>;

struct TuneResult {
  double min_support = 0.0;
  double min_confidence = 0.0;
  double score = 0.0;
  std::size_t rule_count = 0;
};

// Exhaustive grid search over (sigma, kappa). Each point mines, budgets and
// scores; points yielding no rule are infeasible. Ties prefer the larger
// sigma, then the larger kappa.
inline TuneResult tune(std::span<const Transaction> train, std::size_t rule_budget, std::span<const double> sigma_grid,
                       std::span<const double> kappa_grid, const RuleScorer& scorer,
                       std::optional<std::size_t> max_size = std::nullopt, std::size_t workers = 1) {
  if (sigma_grid.empty() || kappa_grid.empty()) throw DataError("tuning grids must be non-empty");
  double sigma_min = *std::min_element(sigma_grid.begin(), sigma_grid.end());
  double kappa_min = *std::min_element(kappa_grid.begin(), kappa_grid.end());
  auto candidates = mine_cars(train, {sigma_min, kappa_min, rule_budget, max_size}, workers);

  struct Point {
    double sigma, kappa;
    std::optional<double> score;
    std::size_t rules = 0;
  };
  std::vector<Point> points;
  for (double s : sigma_grid)
    for (double k : kappa_grid) points.push_back({s, k, std::nullopt, 0});
  parallel_for(points.size(), workers, [&](std::size_t i) {
    auto rules = filter_rules(candidates, points[i].sigma, points[i].kappa, rule_budget);
    points[i].rules = rules.size();
    if (!rules.empty()) points[i].score = scorer(rules);
  });

  const Point* best = nullptr;
  for (const auto& p : points) {
    if (!p.score) continue;
    if (!best || *p.score > *best->score ||
        (*p.score == *best->score && (p.sigma > best->sigma || (p.sigma == best->sigma && p.kappa > best->kappa))))
      best = &p;
  }
  if (!best) throw DataError("no feasible configuration: every grid point yields zero rules");
  return {best->sigma, best->kappa, *best->score, best->rules};
}

struct RuleCountPoint {
  double min_support = 0.0;
  std::size_t rule_count = 0;  // before any budget
  double f_measure = 0.0;
  bool abstained = false;  // no rules: F reported as 0
};

// Support sweep at fixed confidence; every mined rule is handed to the scorer.
inline std::vector<RuleCountPoint> rule_count_curve(std::span<const Transaction> train, double kappa,
                                                    std::span<const double> sigma_grid, const RuleScorer& scorer,
                                                    std::optional<std::size_t> max_size = std::nullopt,
                                                    std::size_t workers = 1) {
  if (sigma_grid.empty()) throw DataError("support grid must be non-empty");
  double sigma_min = *std::min_element(sigma_grid.begin(), sigma_grid.end());
  auto candidates = mine_cars(train, {sigma_min, kappa, std::numeric_limits<std::size_t>::max(), max_size}, workers);
  std::vector<RuleCountPoint> out(sigma_grid.size());
  parallel_for(sigma_grid.size(), workers, [&](std::size_t i) {
    auto rules = filter_rules(candidates, sigma_grid[i], kappa, std::numeric_limits<std::size_t>::max());
    out[i].min_support = sigma_grid[i];
    out[i].rule_count = rules.size();
    if (rules.empty()) {
      out[i].abstained = true;
    } else {
      out[i].f_measure = scorer(rules);
    }
  });
  return out;
}

// Log-spaced grid from lo to hi inclusive with `per_decade` points per power of ten.
inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
  std::vector<double> out;
  double steps = std::round(std::log10(hi / lo) * per_decade);
  for (int i = 0; i <= static_cast<int>(steps); ++i) {
    double v = lo * std::pow(10.0, i / static_cast<double>(per_decade));
    out.push_back(std::stod(trimmed(v, 6)));
  }
  return out;
}

inline std::vector<double> linear_grid(double lo, double hi, double step) {
  std::vector<double> out;
  int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i) out.push_back(std::stod(trimmed(lo + i * step, 6)));
  return out;
}

inline std::vector<double> default_support_grid() { return log_grid(0.001, 0.1, 5); }
inline std::vector<double> default_confidence_grid() { return linear_grid(0.40, 0.70, 0.02); }

// ---------------------------------------------------------------------------
// Rule export: class TAB support TAB confidence TAB item,item,...

inline void write_rules(std::ostream& out, std::span<const Rule> rules) {
  for (const auto& r : rules) {
    out << escape_field(r.cls) << '\t' << fixed(r.support, 6) << '\t' << fixed(r.confidence, 6) << '\t';
    for (std::size_t i = 0; i < r.items.size(); ++i) out << (i ? "," : "") << escape_field(r.items[i].str());
    out << '\n';
  }
}

inline std::vector<Rule> read_rules(std::istream& in, const std::string& origin) {
  std::vector<Rule> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto where = [&](const std::string& field) { return origin + ":" + std::to_string(lineno) + ": field " + field; };
    auto fields = detail::split(line, '\t');
    if (fields.size() != 4) throw DataError(origin + ":" + std::to_string(lineno) + ": expected 4 fields");
    Rule r;
    r.cls = unescape_field(fields[0]);
    try {
      r.support = std::stod(fields[1]);
      r.confidence = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw DataError(where("support/confidence") + ": not a number");
    }
    for (const auto& item : detail::split(fields[3], ',')) {
      auto f = Feature::parse(unescape_field(item));
      if (!f) throw DataError(where("items") + ": malformed item '" + item + "'");
      r.items.push_back(*f);
    }
    normalize(r.items);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace depcar
