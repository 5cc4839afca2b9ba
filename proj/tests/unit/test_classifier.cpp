#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "restyle/classifier.hpp"
#include "restyle/error.hpp"
#include "restyle/persistence.hpp"
#include "restyle/rng.hpp"
#include "restyle/toy_corpus.hpp"
#include "test_support.hpp"

using namespace restyle;

namespace {

const LabelSet kLabels({"neg", "pos"});

NaiveBayesClassifier good_bad() {
  return NaiveBayesClassifier::train(
      {LabeledExample::from_text("good", kLabels.label(1)), LabeledExample::from_text("bad", kLabels.label(0))},
      kLabels, 1.0);
}

TokenSeq random_seq(Rng& rng, const std::vector<std::string>& words) {
  TokenSeq s;
  const std::size_t n = rng.below(8);
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back(words[rng.below(words.size())]);
  return s;
}

}  // namespace

TEST_CASE("add-one likelihoods and priors by hand") {
  const auto nb = good_bad();
  // Vocabulary {good, bad}: P(good|pos) = (1+1)/(1+2), P(good|neg) = (0+1)/(1+2).
  CHECK(nb.likelihood(1, "good") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(nb.likelihood(0, "good") == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(nb.prior(0) == doctest::Approx(0.5));
  CHECK(nb.prior(1) == doctest::Approx(0.5));
}

TEST_CASE("posterior by hand") {
  const auto nb = good_bad();
  const auto p1 = nb.predict_proba(TokenSeq{"good"});
  CHECK(std::abs(p1[1] - 2.0 / 3.0) <= 1e-12);
  CHECK(std::abs(p1[0] - 1.0 / 3.0) <= 1e-12);
  const auto p2 = nb.predict_proba(TokenSeq{"good", "good"});
  const double a = 4.0 / 9.0, b = 1.0 / 9.0;
  CHECK(std::abs(p2[1] - a / (a + b)) <= 1e-12);
  CHECK(std::abs(p2[1] - 0.8) <= 1e-12);
  const auto p0 = nb.predict_proba(TokenSeq{});
  CHECK(p0[0] == doctest::Approx(0.5));
  CHECK(p0[1] == doctest::Approx(0.5));
}

TEST_CASE("unseen tokens use the smoothing mass and cancel out") {
  const auto nb = good_bad();
  const auto p = nb.predict_proba(TokenSeq{"good", "zebra"});
  CHECK(std::abs(p[1] - 2.0 / 3.0) <= 1e-12);
}

TEST_CASE("training errors") {
  REQUIRE_THROWS_CONTAINING(DataError,
                            NaiveBayesClassifier::train({LabeledExample::from_text("good", kLabels.label(1))}, kLabels),
                            "unrepresented label");
  REQUIRE_THROWS_CONTAINING(DataError, NaiveBayesClassifier::train({LabeledExample::from_text("good")}, kLabels),
                            "gold label");
  CHECK_THROWS_AS(NaiveBayesClassifier::train({LabeledExample::from_text("good", kLabels.label(1)),
                                               LabeledExample::from_text("bad", kLabels.label(0))},
                                              kLabels, 0.0),
                  std::invalid_argument);
}

TEST_CASE("duplicated corpus keeps priors and decisions") {
  const auto spec = ToyCorpusSpec::standard();
  const auto corpus = gen_toy_corpus(spec).train;
  auto doubled = corpus;
  doubled.insert(doubled.end(), corpus.begin(), corpus.end());
  const auto a = NaiveBayesClassifier::train(corpus, spec.labels(), 1.0);
  const auto b = NaiveBayesClassifier::train(doubled, spec.labels(), 1.0);
  // Doubling the counts together with alpha leaves every smoothed ratio unchanged.
  const auto b2 = NaiveBayesClassifier::train(doubled, spec.labels(), 2.0);
  CHECK(a.prior(0) == b.prior(0));
  CHECK(a.prior(1) == b.prior(1));
  Rng rng(3);
  std::vector<std::string> words = {"the", "food", "was", "zebra", "tonight"};
  for (const auto& lex : spec.lexicons) words.insert(words.end(), lex.begin(), lex.end());
  for (int i = 0; i < 200; ++i) {
    const auto s = random_seq(rng, words);
    const auto pa = a.predict_proba(s), pb = b.predict_proba(s), pc = b2.predict_proba(s);
    CHECK(std::abs(pa[1] - pc[1]) <= 1e-12);
    if (std::abs(pa[1] - 0.5) > 1e-9) CHECK((pa[1] > 0.5) == (pb[1] > 0.5));
  }
}

TEST_CASE("normalization, permutation invariance and monotonicity on random inputs") {
  const auto spec = ToyCorpusSpec::standard();
  const auto nb = NaiveBayesClassifier::train(gen_toy_corpus(spec).train, spec.labels());
  Rng rng(17);
  std::vector<std::string> words = {"the", "food", "was", "tonight", "pasta", "zebra"};
  for (const auto& lex : spec.lexicons) words.insert(words.end(), lex.begin(), lex.end());
  for (int i = 0; i < 300; ++i) {
    auto s = random_seq(rng, words);
    const auto p = nb.predict_proba(s);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9);
    auto shuffled = s;
    std::reverse(shuffled.tokens.begin(), shuffled.tokens.end());
    const auto q = nb.predict_proba(shuffled);
    CHECK(std::abs(p[0] - q[0]) <= 1e-12);
    for (std::size_t l = 0; l < 2; ++l) {
      const auto& w = spec.lexicons[l][rng.below(spec.lexicons[l].size())];
      REQUIRE(nb.likelihood(l, w) > nb.likelihood(1 - l, w));
      auto longer = s;
      longer.tokens.push_back(w);
      CHECK(nb.predict_proba(longer)[l] >= p[l]);
    }
  }
}

TEST_CASE("argmax ties go to the lowest label") {
  const auto nb = good_bad();
  CHECK(nb.predict(TokenSeq{}) == 0);
  CHECK(nb.predict(TokenSeq{"good", "bad"}) == 0);
  CHECK(nb.predict(TokenSeq{"good"}) == 1);
}

TEST_CASE("persistence round trip on 100 random inputs") {
  const auto spec = ToyCorpusSpec::standard();
  const auto nb = NaiveBayesClassifier::train(gen_toy_corpus(spec).train, spec.labels());
  test::TempDir dir("classifier");
  write_json_file(dir / "nb.json", nb.to_json());
  const auto back = NaiveBayesClassifier::from_json(read_json_file(dir / "nb.json"));
  Rng rng(5);
  std::vector<std::string> words = {"the", "food", "great", "awful", "zebra", "was"};
  for (int i = 0; i < 100; ++i) {
    const auto s = random_seq(rng, words);
    CHECK(nb.predict_proba(s) == back.predict_proba(s));
  }
}

TEST_CASE("loading rejects other formats and corrupted files") {
  test::TempDir dir("classifier-bad");
  auto doc = good_bad().to_json();
  doc["format"] = "restyle.embedder/1";
  REQUIRE_THROWS_CONTAINING(DataError, NaiveBayesClassifier::from_json(doc), format_tag(ModelFormat::Classifier));
  write_text_file(dir / "broken.json", "{\"format\": \"restyle.classifier/1\", \"labels\": [");
  CHECK_THROWS_AS(read_json_file(dir / "broken.json"), DataError);
  auto truncated = good_bad().to_json();
  truncated.erase("alpha");
  CHECK_THROWS_AS(NaiveBayesClassifier::from_json(truncated), DataError);
}
