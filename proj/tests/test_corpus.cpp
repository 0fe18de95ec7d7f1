#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "vicntm/corpus.hpp"
#include "vicntm/errors.hpp"
#include "vicntm/synthetic.hpp"

using namespace vicntm;
namespace fs = std::filesystem;

namespace {

std::vector<Document> make_docs(
    const std::vector<std::pair<std::string, std::string>>& raw) {
  std::vector<Document> out;
  for (const auto& [id, text] : raw) out.push_back({id, tokenize(text)});
  return out;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("vicntm_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace

TEST_CASE("tokenize lowercases and splits on non-alphabetic runs") {
  auto toks = tokenize("The QUICK-brown fox, isn't 42 jumping?");
  std::vector<std::string> want{"the", "quick", "brown", "fox",
                                "isn", "t",     "jumping"};
  CHECK(toks == want);
  CHECK(tokenize("").empty());
  CHECK(tokenize("...42!?").empty());
}

TEST_CASE("vocabulary keeps df window, drops stopwords and 1-char words") {
  auto docs = make_docs({{"a", "apple banana apple x"},
                         {"b", "apple cherry the"},
                         {"c", "apple banana the y"},
                         {"d", "durian the z q"}});
  std::unordered_set<std::string> stop{"the"};
  // min_df=2 drops cherry/durian and all singles; max_df 0.8 drops apple (df 3 <= 3.2 kept!)
  Vocabulary v = build_vocabulary(docs, 2, 0.8, stop);
  REQUIRE(v.size() == 2);
  // df-descending then lexicographic: apple df=3, banana df=2.
  CHECK(v.words[0] == "apple");
  CHECK(v.words[1] == "banana");
  CHECK(v.doc_freq[0] == 3);
  CHECK(v.index.at("banana") == 1);

  // Tight max_df knocks out apple too.
  Vocabulary v2 = build_vocabulary(docs, 2, 0.6, stop);
  REQUIRE(v2.size() == 1);
  CHECK(v2.words[0] == "banana");
}

TEST_CASE("vocabulary ordering breaks df ties lexicographically") {
  auto docs = make_docs({{"a", "zebra apple"}, {"b", "zebra apple"}});
  Vocabulary v = build_vocabulary(docs, 1, 1.0, {});
  REQUIRE(v.size() == 2);
  CHECK(v.words[0] == "apple");
  CHECK(v.words[1] == "zebra");
}

TEST_CASE("vocabulary hash changes with content") {
  auto docs = make_docs({{"a", "apple banana"}, {"b", "apple banana"}});
  Vocabulary v1 = build_vocabulary(docs, 1, 1.0, {});
  auto docs2 = make_docs({{"a", "apple cherry"}, {"b", "apple cherry"}});
  Vocabulary v2 = build_vocabulary(docs2, 1, 1.0, {});
  CHECK(v1.hash() != v2.hash());
  Vocabulary v3 = build_vocabulary(docs, 1, 1.0, {});
  CHECK(v1.hash() == v3.hash());
}

TEST_CASE("vectorize counts tokens and drops sparse documents") {
  auto docs = make_docs({{"a", "apple apple banana"},
                         {"b", "banana"},
                         {"c", "unknown words only"}});
  Vocabulary v = build_vocabulary(docs, 1, 1.0, {});
  auto res = vectorize_and_filter(docs, v, 2);
  // Only doc "a" has >= 2 distinct vocabulary words... "c" contributes
  // unknown/words/only to the vocab though. Recompute: all tokens are in
  // vocab (min_df=1), so "a" has 2 types, "b" 1, "c" 3.
  REQUIRE(res.kept_ids == std::vector<std::string>{"a", "c"});
  CHECK(res.bow.rows == 2);
  CHECK(res.bow.cols == v.size());
  int apple = v.index.at("apple");
  Matrix dense = res.bow.dense_all();
  CHECK(dense(0, apple) == 2.0);
  CHECK(res.bow.row_total(0) == 3.0);
  CHECK(res.bow.row_types(0) == 2);
}

TEST_CASE("bow row entries are sorted by word index") {
  auto docs = make_docs({{"a", "zebra apple mango apple"}});
  Vocabulary v = build_vocabulary(docs, 1, 1.0, {});
  auto res = vectorize_and_filter(docs, v, 1);
  const auto& row = res.bow.entries[0];
  for (size_t i = 1; i < row.size(); ++i)
    CHECK(row[i - 1].first < row[i].first);
}

TEST_CASE("dense_rows and select_rows pick the right documents") {
  auto docs = make_docs({{"a", "apple apple"}, {"b", "banana"}, {"c", "apple banana"}});
  Vocabulary v = build_vocabulary(docs, 1, 1.0, {});
  auto res = vectorize_and_filter(docs, v, 1);
  Matrix two = res.bow.dense_rows({2, 0});
  CHECK(two.rows == 2);
  int apple = v.index.at("apple");
  CHECK(two(0, apple) == 1.0);
  CHECK(two(1, apple) == 2.0);
  BowMatrix sel = res.bow.select_rows({1});
  CHECK(sel.rows == 1);
  CHECK(sel.total_count() == 1);
}

TEST_CASE("tfidf matches ln(N/df) times counts") {
  auto docs = make_docs({{"a", "apple apple banana"},
                         {"b", "apple cherry"},
                         {"c", "banana banana cherry"}});
  Vocabulary v = build_vocabulary(docs, 1, 1.0, {});
  auto res = vectorize_and_filter(docs, v, 1);
  TfIdfStats tf = compute_tfidf(res.bow);
  int apple = v.index.at("apple"), cherry = v.index.at("cherry");
  CHECK(tf.idf[apple] == doctest::Approx(std::log(3.0 / 2.0)));
  CHECK(tf.idf[cherry] == doctest::Approx(std::log(3.0 / 2.0)));
  // Row 0: apple count 2.
  for (auto [w, s] : tf.scores[0])
    if (w == apple) CHECK(s == doctest::Approx(2.0 * std::log(1.5)));
}

TEST_CASE("corpus file round-trips through write and load") {
  TempDir tmp;
  auto docs = make_docs({{"d1", "alpha beta beta"}, {"d2", "gamma"}});
  write_corpus(docs, tmp.file("c.txt"));
  auto back = load_documents(tmp.file("c.txt"));
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "d1");
  CHECK(back[0].tokens == docs[0].tokens);
  CHECK(back[1].tokens == docs[1].tokens);
}

TEST_CASE("load_documents handles bare text lines and missing files") {
  TempDir tmp;
  {
    std::ofstream f(tmp.file("raw.txt"));
    f << "doc1\tThe Quick FOX!\n";
    f << "bare line without an id tab\n";
    f << "\n";
  }
  auto docs = load_documents(tmp.file("raw.txt"));
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].id == "doc1");
  CHECK(docs[0].tokens == std::vector<std::string>{"the", "quick", "fox"});
  CHECK(docs[1].id == "doc1");  // auto id counts all lines, tabbed or not
  CHECK_THROWS_AS(load_documents(tmp.file("missing.txt")), DataError);
}

TEST_CASE("load_stopwords reads whitespace-separated words") {
  TempDir tmp;
  {
    std::ofstream f(tmp.file("stop.txt"));
    f << "the\n\nand of\n";
  }
  auto stop = load_stopwords(tmp.file("stop.txt"));
  CHECK(stop.count("the") == 1);
  CHECK(stop.count("and") == 1);
  CHECK(stop.count("of") == 1);
  CHECK(stop.size() == 3);
  CHECK_THROWS_AS(load_stopwords(tmp.file("nope.txt")), DataError);
}

TEST_CASE("empty vocabulary after filtering raises a data error") {
  auto docs = make_docs({{"a", "xx yy"}, {"b", "zz"}});
  CHECK_THROWS_AS(build_vocabulary(docs, 5, 1.0, {}), DataError);
}

TEST_CASE("split_corpus partitions by largest remainder and is seeded") {
  auto spec = SyntheticSpec::toy(100, 3);
  auto docs = synthesize_corpus(spec);
  Vocabulary v = build_vocabulary(docs, 2, 0.9, {});
  auto res = vectorize_and_filter(docs, v, 2);
  CorpusSplit s = split_corpus(res.bow, res.kept_ids, 0.48, 0.12, 0.40, 17);
  int n = res.bow.rows;
  CHECK(s.train.rows + s.dev.rows + s.test.rows == n);
  // Largest remainder keeps every part within one doc of its exact share.
  CHECK(std::fabs(s.train.rows - 0.48 * n) <= 1.0);
  CHECK(std::fabs(s.dev.rows - 0.12 * n) <= 1.0);
  CHECK(std::fabs(s.test.rows - 0.40 * n) <= 1.0);
  // No id appears twice.
  std::set<std::string> all;
  for (const auto& v2 : {s.train_ids, s.dev_ids, s.test_ids})
    for (const auto& id : v2) CHECK(all.insert(id).second);
  CHECK(int(all.size()) == n);

  CorpusSplit s2 = split_corpus(res.bow, res.kept_ids, 0.48, 0.12, 0.40, 17);
  CHECK(s2.train_ids == s.train_ids);
  CHECK(s2.test_ids == s.test_ids);
  CorpusSplit s3 = split_corpus(res.bow, res.kept_ids, 0.48, 0.12, 0.40, 18);
  CHECK(s3.train_ids != s.train_ids);
}

TEST_CASE("split_corpus validates fractions") {
  auto docs = make_docs({{"a", "xx yy"}, {"b", "xx yy"}});
  Vocabulary v = build_vocabulary(docs, 1, 1.0, {});
  auto res = vectorize_and_filter(docs, v, 1);
  CHECK_THROWS_AS(split_corpus(res.bow, res.kept_ids, 0.5, 0.2, 0.2, 1),
                  ConfigError);
}

TEST_CASE("synthetic corpora are reproducible and respect doc count") {
  auto spec = SyntheticSpec::toy(60, 11);
  auto a = synthesize_corpus(spec);
  auto b = synthesize_corpus(spec);
  REQUIRE(a.size() == 60);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].tokens == b[i].tokens);
  }
  spec.seed = 12;
  auto c = synthesize_corpus(spec);
  bool any_diff = false;
  for (size_t i = 0; i < a.size() && !any_diff; ++i)
    any_diff = a[i].tokens != c[i].tokens;
  CHECK(any_diff);
}

TEST_CASE("news profile lands near a 3k vocabulary under default filters") {
  auto docs = synthesize_corpus(SyntheticSpec::news());
  auto stop = load_stopwords(default_stopwords_path());
  Vocabulary vocab =
      build_vocabulary(docs, 100, 0.7, stop);  // preprocessing defaults
  CHECK(vocab.size() >= 2700);
  CHECK(vocab.size() <= 3300);
}

TEST_CASE("synthetic family corpora validate the shared pool slicing") {
  auto spec = SyntheticSpec::toy(20, 1);
  spec.family_size = 4;  // 5 topics -> 2 families
  spec.shared_words = 3; // slice of 1 word per family: too small
  CHECK_THROWS_AS(synthesize_corpus(spec), ConfigError);
}
