#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "depcar/featsel.hpp"
#include "support/synthetic.hpp"

using namespace depcar;
using namespace depcar::testing;

namespace {

// S1=[a b a], S2=[b c], S3=[c], S4=[a c]
Corpus hand_corpus() {
  return corpus_of({Document{"d1", "k", {flat({"a", "b", "a"}), flat({"b", "c"})}},
                    Document{"d2", "k", {flat({"c"}), flat({"a", "c"})}}});
}

const Sentence& S(const Corpus& c, int i) { return c.documents[i / 2].sentences[i % 2]; }

// head v0(v) -> n1(n), p2(x); n1 -> n3(n); p2 -> n4(n)
Sentence example_tree() {
  return sentence({tok(1, "v0", CoarsePos::Verb, 0), tok(2, "n1", CoarsePos::Noun, 1),
                   tok(3, "p2", CoarsePos::Other, 1), tok(4, "n3", CoarsePos::Noun, 2),
                   tok(5, "n4", CoarsePos::Noun, 3)});
}

std::vector<std::string> keys(const Itemset& is) {
  std::vector<std::string> out;
  for (const auto& f : is) out.push_back(f.str());
  return out;
}

std::vector<StrategySpec> chain() {
  return {StrategySpec::nouns_dist_1(),    StrategySpec::head_plus_nouns(1), StrategySpec::head_plus_nouns(2),
          StrategySpec::head_plus_nouns(3), StrategySpec::head_all_nouns(),   StrategySpec::head_all_nouns_verbs()};
}

}  // namespace

TEST(Tfidf, HandCorpus) {
  Corpus c = hand_corpus();
  TfidfIndex idx(c, TauMode::Stem);
  EXPECT_EQ(idx.sentences(), 4u);
  // hand values: (2/3) ln 2, (1/3) ln 2, (1/2) ln(4/3)
  EXPECT_NEAR(tfidf(S(c, 0).tokens[0], S(c, 0), c, TauMode::Stem), 0.46209812037, 1e-9);
  EXPECT_NEAR(tfidf(S(c, 0).tokens[1], S(c, 0), idx), 0.23104906018, 1e-9);
  EXPECT_NEAR(tfidf(S(c, 1).tokens[1], S(c, 1), idx), 0.14384103622, 1e-9);
}

TEST(Tfidf, UbiquitousFeatureScoresZero) {
  Corpus c = corpus_of({Document{"d", "k", {flat({"z", "a"}), flat({"z"}), flat({"b", "z"})}}});
  TfidfIndex idx(c, TauMode::Stem);
  EXPECT_EQ(tfidf(S(c, 0).tokens[0], S(c, 0), idx), 0.0);
  EXPECT_GT(tfidf(S(c, 0).tokens[1], S(c, 0), idx), 0.0);
}

TEST(Tfidf, ZeroIffInEverySentence) {
  std::mt19937_64 rng(21);
  for (int iter = 0; iter < 40; ++iter) {
    std::vector<Sentence> ss;
    int n = 2 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) ss.push_back(random_tree(rng, 1 + static_cast<int>(rng() % 6), 4));
    Corpus c = corpus_of({Document{"d", "k", ss}});
    TfidfIndex idx(c, TauMode::Stem);
    for (const auto& s : ss)
      for (const auto& t : s.tokens) {
        Feature f = make_feature(t, TauMode::Stem);
        bool everywhere = std::all_of(ss.begin(), ss.end(), [&](const Sentence& o) { return occurrences(f, o, TauMode::Stem) > 0; });
        EXPECT_EQ(tfidf(t, s, idx) == 0.0, everywhere);
      }
  }
}

TEST(TfidfTopN, Selection) {
  Corpus c = hand_corpus();
  EXPECT_EQ(keys(select_tfidf_top_n(S(c, 0), c, 1, TauMode::Stem)), (std::vector<std::string>{"n:a"}));
  EXPECT_EQ(keys(select_tfidf_top_n(S(c, 0), c, 2, TauMode::Stem)), (std::vector<std::string>{"n:a", "n:b"}));
  EXPECT_EQ(keys(select_tfidf_top_n(S(c, 0), c, 10, TauMode::Stem)), (std::vector<std::string>{"n:a", "n:b"}));
}

TEST(TfidfTopN, TieBreakIsCountThenName) {
  // every feature has the same idf; d, c tie on score, so the name decides
  Corpus c = corpus_of({Document{"d", "k", {flat({"d", "c", "e", "e"}), flat({"x"})}}});
  TfidfIndex idx(c, TauMode::Stem);
  auto ranked = rank_tfidf(S(c, 0), idx);
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].feature.str(), "n:e");
  EXPECT_EQ(ranked[1].feature.str(), "n:c");
  EXPECT_EQ(ranked[2].feature.str(), "n:d");
}

TEST(TfidfTopN, PrefixProperty) {
  std::mt19937_64 rng(8);
  for (int iter = 0; iter < 30; ++iter) {
    std::vector<Sentence> ss;
    for (int i = 0; i < 6; ++i) ss.push_back(random_tree(rng, 1 + static_cast<int>(rng() % 10), 6));
    Corpus c = corpus_of({Document{"d", "k", ss}});
    TfidfIndex idx(c, TauMode::Stem);
    for (const auto& s : ss)
      for (std::size_t n = 1; n < 8; ++n)
        EXPECT_TRUE(contains_all(select_tfidf_top_n(s, idx, n + 1), select_tfidf_top_n(s, idx, n)));
  }
}

TEST(Depth, FromHead) {
  Sentence s = example_tree();
  EXPECT_EQ(depth_from_head(s, s.token(1)), 0);
  EXPECT_EQ(depth_from_head(s, s.token(2)), 1);
  EXPECT_EQ(depth_from_head(s, s.token(5)), 2);
  Sentence chain_s = sentence({tok(1, "h", CoarsePos::Verb, 0), tok(2, "a", CoarsePos::Noun, 1),
                               tok(3, "b", CoarsePos::Noun, 2), tok(4, "c", CoarsePos::Noun, 3)});
  EXPECT_EQ(depth_from_head(chain_s, chain_s.token(4)), 3);
}

TEST(Depth, ParentPlusOneProperty) {
  std::mt19937_64 rng(4);
  for (int iter = 0; iter < 100; ++iter) {
    Sentence s = random_tree(rng, 1 + static_cast<int>(rng() % 20));
    auto d = head_depths(s);
    for (const auto& t : s.tokens) {
      EXPECT_EQ(d[static_cast<std::size_t>(t.index - 1)], depth_from_head(s, t));
      if (t.head != 0) {
        EXPECT_EQ(depth_from_head(s, t), depth_from_head(s, s.token(t.head)) + 1);
      }
    }
  }
}

TEST(Strategies, ExampleTree) {
  Sentence s = example_tree();
  Corpus c = corpus_of({Document{"d", "k", {s}}});
  auto run = [&](StrategySpec spec) { return keys(extract_strategy(s, spec, c, TauMode::Stem)); };
  EXPECT_EQ(run(StrategySpec::head_only()), (std::vector<std::string>{"v:v0"}));
  EXPECT_EQ(run(StrategySpec::nouns_dist_1()), (std::vector<std::string>{"n:n1"}));
  EXPECT_EQ(run(StrategySpec::head_plus_nouns(1)), (std::vector<std::string>{"n:n1", "v:v0"}));
  EXPECT_EQ(run(StrategySpec::head_plus_nouns(2)), (std::vector<std::string>{"n:n1", "n:n3", "n:n4", "v:v0"}));
}

TEST(Strategies, NonContentHeadWithoutNouns) {
  Sentence s = sentence({tok(1, "wa", CoarsePos::Other, 0), tok(2, "qad", CoarsePos::Other, 1),
                         tok(3, "kana", CoarsePos::Verb, 1)});
  Corpus c = corpus_of({Document{"d", "k", {s}}});
  EXPECT_TRUE(extract_strategy(s, StrategySpec::head_only(), c, TauMode::Stem).empty());
  EXPECT_TRUE(extract_strategy(s, StrategySpec::head_all_nouns(), c, TauMode::Stem).empty());
  EXPECT_EQ(keys(extract_strategy(s, StrategySpec::head_all_nouns_verbs(), c, TauMode::Stem)),
            (std::vector<std::string>{"v:kana"}));
}

// Transliterated shape of the worked example sentence: the verb head with
// four dependents, one of which starts a six-word chain.
TEST(Strategies, WorkedExampleSentence) {
  Sentence s = sentence({
      tok(1, "nashara", CoarsePos::Verb, 0, "nshr"),
      tok(2, "alyunan", CoarsePos::Noun, 1),
      tok(3, "sitt", CoarsePos::Noun, 1),
      tok(4, "batariyat", CoarsePos::Noun, 3, "Try"),
      tok(5, "sawarikh", CoarsePos::Noun, 4, "Srx"),
      tok(6, "mudadda", CoarsePos::Other, 5, "Ddd"),
      tok(7, "li", CoarsePos::Other, 6),
      tok(8, "assawarikh", CoarsePos::Noun, 7, "Srx"),
      tok(9, "shamal", CoarsePos::Noun, 1, "$ml"),
      tok(10, "athina", CoarsePos::ProperNoun, 9),
      tok(11, "didd", CoarsePos::Noun, 1, "Ddd"),
      tok(12, "muhawala", CoarsePos::Noun, 11, "Hwl"),
  });
  Corpus c = corpus_of({Document{"d", "k", {s}}}, TauMode::Root);
  auto run = [&](StrategySpec spec) { return keys(extract_strategy(s, spec, c, TauMode::Root)); };
  const std::string R(kRootMark);
  EXPECT_EQ(run(StrategySpec::head_only()), (std::vector<std::string>{"v:" + R + "nshr"}));
  EXPECT_EQ(run(StrategySpec::nouns_dist_1()),
            (std::vector<std::string>{"n:alyunan", "n:sitt", "n:" + R + "$ml", "n:" + R + "Ddd"}));
  auto iii2 = run(StrategySpec::head_plus_nouns(2));
  EXPECT_EQ(iii2.size(), 8u);  // head + 4 at distance 1 + batariyat, athina, muhawala
  EXPECT_NE(std::find(iii2.begin(), iii2.end(), "np:athina"), iii2.end());
  auto iii3 = run(StrategySpec::head_plus_nouns(3));
  EXPECT_NE(std::find(iii3.begin(), iii3.end(), "n:" + R + "Srx"), iii3.end());
  EXPECT_EQ(iii3.size(), 9u);
  // both sawarikh tokens share one root item
  EXPECT_EQ(run(StrategySpec::head_all_nouns()).size(), 9u);
}

TEST(Strategies, NestingChainOnRandomTrees) {
  std::mt19937_64 rng(99);
  for (int iter = 0; iter < 200; ++iter) {
    Sentence s = random_tree(rng, 1 + static_cast<int>(rng() % 20));
    Corpus c = corpus_of({Document{"d", "k", {s}}});
    auto specs = chain();
    for (std::size_t i = 0; i + 1 < specs.size(); ++i)
      EXPECT_TRUE(contains_all(extract_strategy(s, specs[i + 1], c, TauMode::Stem),
                               extract_strategy(s, specs[i], c, TauMode::Stem)))
          << to_string(specs[i]) << " vs " << to_string(specs[i + 1]);
    auto head = extract_strategy(s, StrategySpec::head_only(), c, TauMode::Stem);
    if (!head.empty()) {
      EXPECT_TRUE(contains_all(extract_strategy(s, StrategySpec::head_plus_nouns(1), c, TauMode::Stem), head));
    }
  }
}

TEST(Strategies, ParseNames) {
  EXPECT_EQ(parse_strategy("I"), StrategySpec::head_only());
  EXPECT_EQ(parse_strategy("II"), StrategySpec::nouns_dist_1());
  EXPECT_EQ(parse_strategy("III2"), StrategySpec::head_plus_nouns(2));
  EXPECT_EQ(parse_strategy("IV'"), StrategySpec::head_all_nouns_verbs());
  EXPECT_EQ(parse_strategy("tfidf:5"), StrategySpec::tfidf_top_n(5));
  EXPECT_EQ(parse_strategy(to_string(StrategySpec::head_plus_nouns(4))), StrategySpec::head_plus_nouns(4));
  EXPECT_THROW(parse_strategy("tfidf:0"), UsageError);
  EXPECT_THROW(parse_strategy("bogus"), UsageError);
}

TEST(Transactions, HeadOnlyAverageIsOne) {
  Corpus c = planted_corpus({.docs_per_class = 5});
  auto ts = corpus_to_transactions(c, StrategySpec::head_only(), TauMode::Stem);
  EXPECT_DOUBLE_EQ(ts.avg_transaction_size, 1.0);
  EXPECT_EQ(ts.skipped, 0u);
  EXPECT_EQ(ts.transactions.size(), c.sentence_count());
}

TEST(Transactions, MeanAndSkipped) {
  Sentence two = flat({"a", "b"});
  Sentence four = flat({"a", "b", "c", "d"});
  Sentence none = sentence({tok(1, "x", CoarsePos::Other, 0)});
  Corpus c = corpus_of({Document{"d1", "k", {two, none}}, Document{"d2", "j", {four}}});
  auto ts = corpus_to_transactions(c, StrategySpec::head_all_nouns(), TauMode::Stem);
  EXPECT_DOUBLE_EQ(ts.avg_transaction_size, 3.0);
  EXPECT_EQ(ts.skipped, 1u);
  ASSERT_EQ(ts.transactions.size(), 2u);
  EXPECT_EQ(ts.transactions[1].cls, "j");
  EXPECT_EQ(ts.transactions[1].doc_index, 1u);

  Corpus empty = corpus_of({Document{"d1", "k", {none}}});
  EXPECT_THROW(corpus_to_transactions(empty, StrategySpec::head_only(), TauMode::Stem), DataError);
}

TEST(Transactions, OrderIndependentOfWorkers) {
  Corpus c = planted_corpus({.docs_per_class = 10});
  for (auto spec : {StrategySpec::head_plus_nouns(2), StrategySpec::tfidf_top_n(3)}) {
    auto a = corpus_to_transactions(c, spec, TauMode::Root, 1);
    auto b = corpus_to_transactions(c, spec, TauMode::Root, 4);
    EXPECT_EQ(a.transactions, b.transactions);
  }
}

TEST(Transactions, DumpFormatRoundTrip) {
  Corpus c = planted_corpus({.docs_per_class = 3});
  auto ts = corpus_to_transactions(c, StrategySpec::head_plus_nouns(2), TauMode::Root);
  std::ostringstream out;
  write_transactions(out, ts.transactions);
  std::string first = out.str().substr(0, out.str().find('\n'));
  EXPECT_EQ(first.substr(0, first.find('\t')), ts.transactions[0].cls);
  std::istringstream in(out.str());
  auto back = read_transactions(in, "mem");
  ASSERT_EQ(back.size(), ts.transactions.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].items, ts.transactions[i].items);
    EXPECT_EQ(back[i].cls, ts.transactions[i].cls);
  }
}
