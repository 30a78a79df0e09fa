#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "swlm/config.hpp"
#include "swlm/corpus.hpp"
#include "swlm/error.hpp"
#include "test_support.hpp"

using namespace swlm;
using namespace swlm::testing;

namespace {

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("vocabulary orders by frequency then lexicographically") {
  const auto v = Vocabulary::build(words("b a c a b a <eos> <eos>"));
  CHECK(v.word(0) == "a");
  CHECK(v.word(1) == "<eos>");
  CHECK(v.word(2) == "b");
  CHECK(v.find("c").has_value());
  CHECK(v.find("<unk>").has_value());
  CHECK(v.index_of("zebra") == v.unk());
  CHECK(v.frequency(*v.find("a")) == 3);
}

TEST_CASE("vocabulary min_count maps rare words to unk") {
  const auto v = Vocabulary::build(words("a a b c c c"), 2);
  CHECK_FALSE(v.find("b").has_value());
  const auto s = encode(v, words("a b c"));
  CHECK(s.tokens[1] == v.unk());
  CHECK(decode(v, s) == words("a <unk> c"));
}

TEST_CASE("vocabulary round trips through its text form") {
  const auto v = Vocabulary::build(words("x y y z z z"));
  std::stringstream buf;
  v.write(buf);
  const auto r = Vocabulary::read(buf);
  CHECK(r.words() == v.words());
  CHECK(r.frequencies() == v.frequencies());
  CHECK(r.unk() == v.unk());
  CHECK(r.eos() == v.eos());
}

TEST_CASE("load_corpus appends eos per line and rejects bad input") {
  TempDir dir("corpus");
  write_file(dir / "ok.txt", "the cat\n\n sat  down \n");
  const auto toks = load_corpus(dir / "ok.txt");
  CHECK(toks == words("the cat <eos> sat down <eos>"));
  CHECK_THROWS_AS(load_corpus(dir / "missing.txt"), DataError);
  write_file(dir / "empty.txt", "\n\n");
  CHECK_THROWS_AS(load_corpus(dir / "empty.txt"), DataError);
  write_file(dir / "bad.txt", "caf\xff\n");
  CHECK_THROWS_AS(load_corpus(dir / "bad.txt"), DataError);
}

TEST_CASE("split files are found under the accepted names") {
  TempDir dir("splits");
  write_file(dir / "ptb.train.txt", "a\n");
  write_file(dir / "valid.txt", "b\n");
  CHECK(split_path(dir.path(), Split::Train).filename() == "ptb.train.txt");
  CHECK(split_path(dir.path(), Split::Valid).filename() == "valid.txt");
  CHECK_THROWS_AS(load_split(dir.path(), Split::Test), DataError);
}

TEST_CASE("batchify: 71 tokens, two lanes, 35 steps gives one window") {
  EncodedStream s;
  for (std::size_t i = 0; i < 71; ++i) s.tokens.push_back(i);
  const auto batches = batchify(s, 2, 35);
  REQUIRE(batches.size() == 1);
  const auto& b = batches[0];
  CHECK(b.input(0, 0) == 0);
  CHECK(b.input(1, 0) == 35);
  for (std::size_t lane = 0; lane < 2; ++lane) {
    for (std::size_t t = 0; t < 35; ++t) CHECK(b.target(lane, t) == b.input(lane, t) + 1);
  }
  CHECK_THROWS_AS(batchify(s, 2, 36), Error);
}

TEST_CASE("batchify windows continue each lane") {
  EncodedStream s;
  for (std::size_t i = 0; i < 101; ++i) s.tokens.push_back(i);
  const auto batches = batchify(s, 4, 5);
  // 25 pairs per lane: five full windows.
  REQUIRE(batches.size() == 5);
  CHECK(batches[1].input(2, 0) == batches[0].input(2, 4) + 1);
}

TEST_CASE("eval_batches scores every lane token exactly once") {
  EncodedStream s;
  for (std::size_t i = 0; i < 53; ++i) s.tokens.push_back(i);
  const auto batches = eval_batches(s, 3, 5);
  std::multiset<std::size_t> targets;
  for (const auto& b : batches) {
    for (std::size_t lane = 0; lane < b.batch_size; ++lane) {
      for (std::size_t t = 0; t < b.steps; ++t) targets.insert(b.target(lane, t));
    }
  }
  // 52 pairs over three lanes: 17 per lane, 51 targets, all distinct.
  CHECK(targets.size() == 51);
  CHECK(std::set<std::size_t>(targets.begin(), targets.end()).size() == 51);
  CHECK(batches.back().steps == 2);
}

TEST_CASE("corpus_stats ttr") {
  const auto v = Vocabulary::build(words("a a a a"));
  const auto st = corpus_stats(encode(v, words("a a a a")), v);
  CHECK(st.tokens == 4);
  CHECK(st.types == 1);
  CHECK(st.ttr == doctest::Approx(0.25));
}

TEST_CASE("unigram perplexity with add-one smoothing") {
  // Uniform counts: every token has probability (2+1)/(6+3) = 1/3.
  EncodedStream train{{0, 1, 2, 0, 1, 2}};
  EncodedStream eval{{2, 1, 0}};
  CHECK(unigram_perplexity(train, eval, 3) == doctest::Approx(3.0));
}

TEST_CASE("config parsing, overrides and unknown keys") {
  auto cfg = Config::parse("a = 1  # comment\nb=x,y\n\n# only comment\na = 2\n");
  CHECK(cfg.get_int("a", 0) == 2);
  CHECK(cfg.get("b") == "x,y");
  CHECK(cfg.get_double("missing", 0.5) == 0.5);
  CHECK_THROWS_AS(Config::parse("novalue\n"), UsageError);
  CHECK_THROWS_AS(cfg.require_known({"a"}), UsageError);
  CHECK_NOTHROW(cfg.require_known({"a", "b"}));
  cfg.set("s", "1,2,3");
  CHECK(cfg.get_sizes("s", {}) == std::vector<std::size_t>{1, 2, 3});
}
