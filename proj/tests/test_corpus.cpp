#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "depcar/corpus.hpp"
#include "support/synthetic.hpp"

using namespace depcar;
using namespace depcar::testing;

namespace {

std::string data(const std::string& name) { return std::string(DEPCAR_TEST_DATA) + "/" + name; }

bool mentions(const std::vector<Violation>& report, const std::string& what) {
  for (const auto& v : report)
    if (v.what.find(what) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(LoadCorpus, MinimalDocument) {
  std::istringstream in("#doc d1 c1\n1\ta\ta\t_\tv\tVB\t0\troot\n2\tb\tb\t_\tn\tNN\t1\tdep\n3\tc\tc\t_\tx\tIN\t1\tdep\n");
  Corpus c = parse_corpus(in, CorpusFormat::Native, "mem");
  ASSERT_EQ(c.documents.size(), 1u);
  EXPECT_EQ(c.sentence_count(), 1u);
  EXPECT_EQ(c.documents[0].sentences[0].tokens.size(), 3u);
  EXPECT_EQ(c.documents[0].sentences[0].root_index, 1);
  EXPECT_TRUE(validate(c).empty());
}

TEST(LoadCorpus, TwoClassFixture) {
  Corpus c = load_corpus(data("two_class.native"), CorpusFormat::Native);
  EXPECT_EQ(c.documents.size(), 4u);
  EXPECT_EQ(c.classes, (std::vector<std::string>{"c1", "c2"}));
  EXPECT_EQ(c.documents[0].sentences.size(), 2u);
  EXPECT_EQ(c.sentence_count(), 5u);
  // '_' in CPOS falls back to the fine-tag table
  const auto& t = c.documents[3].sentences[0].tokens;
  EXPECT_EQ(t[0].cpos, CoarsePos::Noun);
  EXPECT_EQ(t[1].cpos, CoarsePos::Noun);
  // absent root
  EXPECT_FALSE(c.documents[1].sentences[0].tokens[3].root.has_value());
  EXPECT_EQ(*c.documents[0].sentences[0].tokens[0].root, "ktb");
}

TEST(LoadCorpus, HeadOutOfRange) {
  try {
    load_corpus(data("head_range.native"), CorpusFormat::Native);
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("head out of range"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("head_range.native"), std::string::npos);
  }
}

TEST(LoadCorpus, ErrorsNameFileLineAndField) {
  try {
    load_corpus(data("bad_cpos.native"), CorpusFormat::Native);
    FAIL();
  } catch (const DataError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("bad_cpos.native:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("CPOS"), std::string::npos) << msg;
  }
  try {
    load_corpus(data("short_line.native"), CorpusFormat::Native);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("short_line.native:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_corpus(data("empty_doc.native"), CorpusFormat::Native), DataError);
  EXPECT_THROW(load_corpus(data("does_not_exist.native"), CorpusFormat::Native), IoError);
}

TEST(LoadCorpus, TwoBlankLinesEndDocument) {
  std::istringstream in("#doc d1 c1\n1\ta\ta\t_\tv\tVB\t0\troot\n\n\n1\tb\tb\t_\tv\tVB\t0\troot\n");
  EXPECT_THROW(parse_corpus(in, CorpusFormat::Native, "mem"), DataError);
}

TEST(LoadCorpus, Conllu) {
  Corpus c = load_corpus(data("small.conllu"), CorpusFormat::Conllu, PosTable::defaults(), TauMode::Root);
  ASSERT_EQ(c.documents.size(), 2u);
  EXPECT_EQ(c.classes, (std::vector<std::string>{"economy", "sports"}));
  const auto& s = c.documents[0].sentences[0];
  ASSERT_EQ(s.tokens.size(), 4u);  // multiword range line skipped
  EXPECT_EQ(s.tokens[0].stem, "la'ib");
  EXPECT_EQ(*s.tokens[1].root, "frq");
  EXPECT_FALSE(s.tokens[2].root.has_value());
  EXPECT_EQ(s.tokens[1].cpos, CoarsePos::Noun);        // DTNN
  EXPECT_EQ(s.tokens[3].cpos, CoarsePos::ProperNoun);  // UPOS PROPN, no XPOS
  EXPECT_EQ(s.tokens[2].cpos, CoarsePos::Other);
}

TEST(Validate, CycleAndMultipleRoots) {
  Corpus cyc = parse_corpus_file(data("cyclic.native"), CorpusFormat::Native);
  EXPECT_TRUE(mentions(validate(cyc), "cycle"));
  Corpus multi = parse_corpus_file(data("multi_root.native"), CorpusFormat::Native);
  EXPECT_TRUE(mentions(validate(multi), "multiple roots"));
  EXPECT_THROW(load_corpus(data("cyclic.native"), CorpusFormat::Native), DataError);
}

TEST(Validate, InMemoryViolations) {
  Corpus c = corpus_of({Document{"d", "a", {sentence({tok(1, "x", CoarsePos::Verb, 0), tok(2, "y", CoarsePos::Noun, 2)})}}});
  EXPECT_TRUE(mentions(validate(c), "self-loop"));
  c.documents[0].sentences[0].tokens[1].head = 1;
  EXPECT_TRUE(validate(c).empty());
  c.documents[0].label = "zzz";
  EXPECT_TRUE(mentions(validate(c), "not in class set"));
}

TEST(Feature, MakeFeature) {
  Token t = tok(1, "مطار", CoarsePos::Noun, 0, "√طير");
  t.root = "طير";
  EXPECT_EQ(make_feature(t, TauMode::Root).str(), "n:√طير");
  EXPECT_TRUE(make_feature(t, TauMode::Root).is_root());
  EXPECT_EQ(make_feature(t, TauMode::Stem).str(), "n:مطار");
  t.root.reset();
  Feature f = make_feature(t, TauMode::Root);
  EXPECT_EQ(f.str(), "n:مطار");
  EXPECT_FALSE(f.is_root());
}

TEST(Feature, SerializationRoundTripsAndIsInjective) {
  std::mt19937_64 rng(3);
  const char* texts[] = {"a", "b:c", "ﺏ", "np", "x", "a√"};
  std::set<std::string> keys;
  std::size_t made = 0;
  for (auto cpos : {CoarsePos::Noun, CoarsePos::ProperNoun, CoarsePos::Verb, CoarsePos::Other})
    for (bool root : {false, true})
      for (const char* text : texts) {
        Feature f(cpos, text, root);
        auto back = Feature::parse(f.str());
        ASSERT_TRUE(back.has_value()) << f.str();
        EXPECT_EQ(back->cpos(), cpos);
        EXPECT_EQ(back->is_root(), root);
        EXPECT_EQ(back->text(), text);
        keys.insert(f.str());
        ++made;
      }
  EXPECT_EQ(keys.size(), made);
}

TEST(PosMapping, DefaultTable) {
  auto t = PosTable::defaults();
  EXPECT_EQ(map_fine_pos("NN", t), CoarsePos::Noun);
  EXPECT_EQ(map_fine_pos("DTNN", t), CoarsePos::Noun);
  EXPECT_EQ(map_fine_pos("NNS", t), CoarsePos::Noun);
  EXPECT_EQ(map_fine_pos("NNP", t), CoarsePos::ProperNoun);
  EXPECT_EQ(map_fine_pos("DTNNP", t), CoarsePos::ProperNoun);
  EXPECT_EQ(map_fine_pos("VBP", t), CoarsePos::Verb);
  EXPECT_EQ(map_fine_pos("IN", t), CoarsePos::Other);
  EXPECT_EQ(map_fine_pos("ZZZ", t), CoarsePos::Other);
}

TEST(PosMapping, FileOverlay) {
  auto t = PosTable::from_file(data("posmap.tsv"));
  EXPECT_EQ(t.map("JJ"), CoarsePos::Noun);
  EXPECT_EQ(t.map("FOO"), CoarsePos::Verb);
  EXPECT_EQ(t.map("NN"), CoarsePos::Noun);
  std::istringstream bad("JJ\tadj\n");
  EXPECT_THROW(t.load(bad, "mem"), DataError);
}

TEST(RootOverlap, RequiresRootMode) {
  Corpus c = corpus_of({Document{"d", "A", {flat({"a"})}}}, TauMode::Stem);
  EXPECT_THROW(root_overlap_report(c), DataError);
}

TEST(RootOverlap, HandPlantedThreeClasses) {
  // root -> occurrences per class (A, B, C)
  const std::map<std::string, std::array<int, 3>> plan = {
      {"r1", {3, 0, 0}}, {"r2", {1, 0, 0}}, {"r3", {0, 2, 0}}, {"r4", {5, 2, 0}}, {"r5", {1, 4, 0}},
      {"r6", {2, 0, 2}}, {"r7", {1, 1, 1}}, {"r8", {0, 0, 6}}, {"r9", {0, 3, 3}},
  };
  const char* names[] = {"A", "B", "C"};
  std::vector<Document> docs;
  for (int c = 0; c < 3; ++c) {
    std::vector<Token> ts;
    for (const auto& [root, counts] : plan)
      for (int k = 0; k < counts[static_cast<std::size_t>(c)]; ++k)
        ts.push_back(tok(static_cast<int>(ts.size()) + 1, "w" + root, CoarsePos::Noun, ts.empty() ? 0 : 1, root));
    docs.push_back(Document{std::string("d") + names[c], names[c], {sentence(ts)}});
  }
  Corpus corpus = corpus_of(docs, TauMode::Root);
  auto r = root_overlap_report(corpus);

  // brute-force tally straight from the plan
  std::array<std::array<std::size_t, 3>, 3> expected{};
  std::array<std::size_t, 3> by_k{};
  for (const auto& [root, counts] : plan) {
    std::vector<int> present;
    for (int c = 0; c < 3; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) present.push_back(c);
    ++by_k[present.size() - 1];
    if (present.size() == 1) ++expected[present[0]][present[0]];
    if (present.size() == 2) {
      int a = present[0], b = present[1];
      int row = counts[a] >= counts[b] ? a : b;
      ++expected[row][row == a ? b : a];
    }
  }
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.cells[i][j].count, expected[i][j]) << i << "," << j;
  EXPECT_EQ(r.by_class_count, (std::vector<std::size_t>{by_k[0], by_k[1], by_k[2]}));
  EXPECT_EQ(r.cells[0][0].top_root, "r1");
  EXPECT_EQ(r.cells[0][1].top_root, "r4");
  EXPECT_EQ(r.cells[1][0].top_root, "r5");
  EXPECT_EQ(r.cells[0][2].top_root, "r6");  // tie 2:2 goes to A
  EXPECT_EQ(r.cells[1][2].count, 1u);       // r9 tie goes to B
  EXPECT_EQ(r.distinct_roots, plan.size());
}

TEST(RootOverlap, CountsSumProperty) {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<Document> docs;
    for (int d = 0; d < 8; ++d) {
      std::vector<Token> ts;
      int n = 1 + static_cast<int>(rng() % 10);
      for (int i = 1; i <= n; ++i) {
        std::optional<std::string> root;
        if (rng() % 4) root = "r" + std::to_string(rng() % 12);
        ts.push_back(tok(i, "w", CoarsePos::Noun, i == 1 ? 0 : 1, root));
      }
      docs.push_back(Document{"d" + std::to_string(d), "k" + std::to_string(rng() % 4), {sentence(ts)}});
    }
    Corpus c = corpus_of(docs, TauMode::Root);
    auto r = root_overlap_report(c);
    std::size_t sum = 0;
    for (auto n : r.by_class_count) sum += n;
    EXPECT_EQ(sum, r.distinct_roots);
    std::size_t diag = 0;
    for (std::size_t i = 0; i < c.classes.size(); ++i) diag += r.cells[i][i].count;
    EXPECT_EQ(diag, r.by_class_count[0]);
    if (c.classes.size() >= 2) {
      std::size_t pairs = 0;
      for (std::size_t i = 0; i < c.classes.size(); ++i)
        for (std::size_t j = i + 1; j < c.classes.size(); ++j) pairs += r.cells[i][j].count + r.cells[j][i].count;
      EXPECT_EQ(pairs, r.by_class_count[1]);
    }
  }
}

TEST(Serialize, RoundTripOnRandomCorpora) {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 30; ++iter) {
    std::vector<Document> docs;
    int n_docs = 1 + static_cast<int>(rng() % 5);
    for (int d = 0; d < n_docs; ++d) {
      Document doc{"doc" + std::to_string(d), "class" + std::to_string(rng() % 3), {}};
      int n_sent = 1 + static_cast<int>(rng() % 3);
      for (int s = 0; s < n_sent; ++s) {
        Sentence sent = random_tree(rng, 1 + static_cast<int>(rng() % 12));
        for (auto& t : sent.tokens) {
          if (rng() % 2) t.root = "root" + std::to_string(rng() % 5);
          t.fpos = "F" + std::to_string(rng() % 3);
          t.surface = "s" + t.stem;
        }
        doc.sentences.push_back(std::move(sent));
      }
      docs.push_back(std::move(doc));
    }
    Corpus original = corpus_of(docs);
    std::istringstream in(serialize_native(original));
    Corpus back = parse_corpus(in, CorpusFormat::Native, "mem");
    EXPECT_EQ(back, original);
  }
}
