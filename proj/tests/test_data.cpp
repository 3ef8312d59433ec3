#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "autr/data.hpp"
#include "autr/hyper.hpp"

using namespace autr;

TEST_CASE("build_vocab keeps most-frequent tokens, lexicographic ties") {
  auto v = Vocabulary::build({"a b", "a c"}, 4 + 3);
  CHECK(v.size() == 6);
  CHECK(v.id("a") == 3);  // most frequent content token gets the lowest content id
  // b and c tie at one occurrence; lexicographic order breaks it
  CHECK(v.id("b") == 4);
  CHECK(v.id("c") == 5);
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  CHECK(v.token(Vocabulary::kEos) == "<eos>");
  CHECK(v.token(Vocabulary::kUnk) == "<unk>");
}

TEST_CASE("build_vocab saturation maps every content token to UNK") {
  auto v = Vocabulary::build({"x y z"}, 3);
  CHECK(v.size() == 3);
  CHECK(v.id("x") == Vocabulary::kUnk);
  CHECK(v.id("anything") == Vocabulary::kUnk);
}

TEST_CASE("build_vocab rejects an empty corpus") {
  CHECK_THROWS_AS(Vocabulary::build({}, 10), DataError);
}

TEST_CASE("full-scale reference configuration is recorded") {
  CHECK(fullscale::kVocabSize == 20000);
  CHECK(fullscale::kMaxLen == 40);
  CHECK(fullscale::kBatch == 200);
}

TEST_CASE("vocabulary file round-trips") {
  auto v = Vocabulary::build({"red green blue green"}, 10);
  std::string path = "vocab_roundtrip.tsv";
  v.save(path);
  auto loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(loaded.token(i) == v.token(i));
  std::remove(path.c_str());
}

TEST_CASE("encode pads with EOS then PAD") {
  auto v = Vocabulary::build({"a b"}, 10);
  auto x = encode({"a", "b"}, v, 5);
  CHECK(x.ids == std::vector<int>{v.id("a"), v.id("b"), Vocabulary::kEos, Vocabulary::kPad,
                                  Vocabulary::kPad});
  CHECK(x.true_length == 3);

  auto empty = encode({}, v, 3);
  CHECK(empty.ids == std::vector<int>{Vocabulary::kEos, Vocabulary::kPad, Vocabulary::kPad});
  CHECK(empty.true_length == 1);

  CHECK_THROWS_AS(encode({"a", "b", "c", "d", "e"}, v, 5), DataError);
}

TEST_CASE("encode/decode round-trip identity within the length cap") {
  auto lines = synth_corpus(11, 64, 30, 10);
  auto v = Vocabulary::build(lines, 200);
  for (const auto& line : lines) {
    auto toks = split_tokens(line);
    auto x = encode(toks, v, 10);
    auto back = decode(x, v);
    CHECK(back == toks);
    CHECK(encode(back, v, 10) == x);
  }
}

TEST_CASE("batch stream: sizes, determinism, reshuffling") {
  auto lines = synth_corpus(3, 10, 20, 8);
  auto v = Vocabulary::build(lines, 64);
  auto [encoded, skipped] = encode_corpus(lines, v, 8);
  CHECK(skipped == 0);
  REQUIRE(encoded.size() == 10);

  BatchStream s(encoded, 4, 42);
  auto b1 = s.next();
  auto b2 = s.next();
  auto b3 = s.next();
  CHECK(b1.sentences.size() == 4);
  CHECK(b2.sentences.size() == 4);
  CHECK(b3.sentences.size() == 2);  // final partial batch

  BatchStream same(encoded, 4, 42);
  auto c1 = same.next();
  CHECK(c1.sentences == b1.sentences);
  CHECK(c1.rng_seed == b1.rng_seed);

  BatchStream other(encoded, 4, 43);
  bool differs = !(other.next().sentences == b1.sentences);
  CHECK(differs);

  // a new epoch reshuffles but partitions the same corpus
  auto e1 = s.next();
  CHECK(e1.sentences.size() == 4);
}

TEST_CASE("train/test split partitions disjointly and exhaustively") {
  auto lines = synth_corpus(5, 50, 25, 9);
  auto [train, test] = split_train_test(lines, 0.9, 7);
  CHECK(train.size() == 45);
  CHECK(test.size() == 5);
  std::multiset<std::string> all(lines.begin(), lines.end());
  std::multiset<std::string> rejoined(train.begin(), train.end());
  rejoined.insert(test.begin(), test.end());
  CHECK(all == rejoined);
}

TEST_CASE("synth corpus determinism and shape") {
  CHECK(synth_corpus(1, 0, 10, 10).empty());
  auto a = synth_corpus(9, 32, 50, 10);
  auto b = synth_corpus(9, 32, 50, 10);
  CHECK(a == b);
  CHECK(a.size() == 32);
  for (const auto& line : a) CHECK(split_tokens(line).size() <= 9);
  bool other_seed_differs = !(synth_corpus(10, 32, 50, 10) == a);
  CHECK(other_seed_differs);
}

TEST_CASE("synth corpus respects the vocab_size budget") {
  auto lines = synth_corpus(2, 200, 12, 10);
  std::set<std::string> words;
  for (const auto& line : lines)
    for (const auto& t : split_tokens(line)) words.insert(t);
  CHECK(words.size() <= 12);
  CHECK_THROWS_AS(synth_corpus(2, 4, 4, 10), DataError);
}
