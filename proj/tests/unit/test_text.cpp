#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "restyle/error.hpp"
#include "restyle/rng.hpp"
#include "restyle/text.hpp"
#include "test_support.hpp"

using namespace restyle;

namespace {

TokenSeq seq(std::initializer_list<std::string> t) { return TokenSeq(t); }

std::vector<LabeledExample> corpus_of(std::initializer_list<const char*> texts) {
  std::vector<LabeledExample> out;
  for (const char* t : texts) out.push_back(LabeledExample::from_text(t));
  return out;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on whitespace runs") {
  CHECK(tokenize("The food was GREAT !") == seq({"the", "food", "was", "great", "!"}));
  CHECK(tokenize("").empty());
  CHECK(tokenize("  a  b ") == seq({"a", "b"}));
  CHECK(tokenize("a\tb\nc") == seq({"a", "b", "c"}));
}

TEST_CASE("detokenize joins with single spaces") {
  CHECK(detokenize(seq({"a", "b"})) == "a b");
  CHECK(detokenize(TokenSeq{}) == "");
  CHECK(detokenize(seq({"great", "!"})) == "great !");
}

TEST_CASE("tokenize(detokenize(s)) round-trips random token lists") {
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789.,!?'-<>:\\";
  Rng rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    TokenSeq s;
    const std::size_t n = rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      std::string tok;
      const std::size_t len = 1 + rng.below(8);
      for (std::size_t j = 0; j < len; ++j) tok += alphabet[rng.below(alphabet.size())];
      if (is_reserved_spelling(tok)) continue;
      s.tokens.push_back(tok);
    }
    CHECK(tokenize(detokenize(s)) == s);
  }
}

TEST_CASE("raw text never produces a reserved token") {
  const auto t = tokenize("<mask> <MASK> <unk> <attr:pos> mask");
  for (const auto& tok : t) CHECK_FALSE(is_reserved_spelling(tok));
  CHECK(t[4] == "mask");
}

TEST_CASE("vocabulary layout and size") {
  const LabelSet labels({"neg", "pos"});
  const auto v = Vocab::build(corpus_of({"a b", "b a"}), labels);
  CHECK(v.size() == 6);
  CHECK(v.token(Vocab::kMaskId) == "<mask>");
  CHECK(v.token(Vocab::kUnkId) == "<unk>");
  CHECK(v.token(v.control_id(0)) == "<attr:neg>");
  CHECK(v.token(v.control_id(1)) == "<attr:pos>");
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == 5);
  CHECK(v.id("zzz") == Vocab::kUnkId);
  for (int id = 0; id < static_cast<int>(v.size()); ++id) CHECK(v.id(v.token(id)) == id);
}

TEST_CASE("vocabulary build is deterministic") {
  const LabelSet labels({"neg", "pos"});
  const auto c = corpus_of({"the food was great", "the service was awful"});
  CHECK(Vocab::build(c, labels) == Vocab::build(c, labels));
}

TEST_CASE("corpus token 'mask' does not collide with the sentinel") {
  const LabelSet labels({"neg", "pos"});
  const auto v = Vocab::build(corpus_of({"mask unk attr"}), labels);
  CHECK(v.size() == 7);
  CHECK(v.id("mask") != Vocab::kMaskId);
  CHECK(v.id("unk") != Vocab::kUnkId);
}

TEST_CASE("empty corpus is rejected") {
  const LabelSet labels({"neg", "pos"});
  REQUIRE_THROWS_CONTAINING(DataError, Vocab::build(std::vector<LabeledExample>{}, labels), "empty corpus");
}

TEST_CASE("control tokens are canonical and injective") {
  const LabelSet labels({"positive", "formal", "negative"});
  CHECK(control_token(labels, 0) == "<attr:positive>");
  CHECK(control_token(labels, 1) == "<attr:formal>");
  CHECK(control_token(labels, 0) != control_token(labels, 2));
  CHECK_THROWS_AS(control_token(labels, 3), std::invalid_argument);
}

TEST_CASE("label sets reject bad names") {
  CHECK_THROWS_AS(LabelSet({"only"}), std::invalid_argument);
  CHECK_THROWS_AS(LabelSet({"a", "a"}), std::invalid_argument);
  CHECK_THROWS_AS(LabelSet({"a b", "c"}), std::invalid_argument);
  CHECK_THROWS_AS(LabelSet({"<x>", "c"}), std::invalid_argument);
  const LabelSet ok({"neg", "pos"});
  CHECK(ok.index_of("pos") == 1);
  CHECK_FALSE(ok.find("neutral").has_value());
}

TEST_CASE("labeled example keeps seq == tokenize(text)") {
  const auto ex = LabeledExample::from_text("Hello  World");
  CHECK(ex.seq == tokenize(ex.text));
}
