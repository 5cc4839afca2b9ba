#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "restyle/classifier.hpp"
#include "restyle/embedder.hpp"
#include "restyle/error.hpp"
#include "restyle/metrics.hpp"
#include "restyle/reference.hpp"
#include "restyle/rng.hpp"
#include "restyle/toy_corpus.hpp"
#include "test_support.hpp"

using namespace restyle;

namespace {

std::vector<TokenSeq> seqs(const std::vector<LabeledExample>& corpus) {
  std::vector<TokenSeq> out;
  for (const auto& ex : corpus) out.push_back(ex.seq);
  return out;
}

TokenSeq random_seq(Rng& rng, const std::vector<std::string>& words, std::size_t max_len) {
  TokenSeq s;
  const std::size_t n = rng.below(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back(words[rng.below(words.size())]);
  return s;
}

}  // namespace

TEST_CASE("bleu examples") {
  const TokenSeq x{"the", "food", "was", "great", "."};
  CHECK(bleu(x, x) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(bleu(TokenSeq{"a", "b"}, TokenSeq{"c", "d"}) == 0.0);
  CHECK(bleu(TokenSeq{}, TokenSeq{}) == 100.0);
  CHECK(bleu(TokenSeq{}, TokenSeq{"a"}) == 0.0);

  // Hand count: unigrams 3/4; bigrams (2+1)/(3+1); trigrams (1+1)/(2+1);
  // 4-grams (0+1)/(1+1); equal lengths.
  const double hand = 100.0 * std::pow(0.75 * 0.75 * (2.0 / 3.0) * 0.5, 0.25);
  CHECK(bleu(TokenSeq{"a", "b", "c", "d"}, TokenSeq{"a", "b", "c", "e"}) == doctest::Approx(hand).epsilon(1e-12));

  // Short candidate: every precision 1, brevity penalty exp(1 - 4/3).
  CHECK(bleu(TokenSeq{"a", "b", "c"}, TokenSeq{"a", "b", "c", "d"}) ==
        doctest::Approx(100.0 * std::exp(1.0 - 4.0 / 3.0)).epsilon(1e-12));
  // Clipped counts: "a a a a" against "a b" matches one unigram of four.
  const double clipped = 100.0 * std::pow(0.25 * (1.0 / 4.0) * (1.0 / 3.0) * (1.0 / 2.0), 0.25);
  CHECK(bleu(TokenSeq{"a", "a", "a", "a"}, TokenSeq{"a", "b"}) == doctest::Approx(clipped).epsilon(1e-12));
}

TEST_CASE("bleu of a sentence with itself is 100") {
  Rng rng(2);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  for (int i = 0; i < 200; ++i) {
    auto s = random_seq(rng, words, 10);
    if (s.empty()) continue;
    CHECK(bleu(s, s) == doctest::Approx(100.0).epsilon(1e-12));
  }
}

TEST_CASE("g score") {
  CHECK(g_score(0.97, 0.68) == doctest::Approx(std::sqrt(0.97 * 0.68)));
  CHECK(std::abs(g_score(0.97, 0.68) - 0.8) <= 0.02);
  CHECK(g_score(0.0, 0.7) == 0.0);
  CHECK(g_score(1.0, 1.0) == 1.0);
  CHECK_THROWS_AS(g_score(1.1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(g_score(0.5, -0.1), std::invalid_argument);
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.uniform(), s = rng.uniform(), d = rng.uniform() * (1.0 - a);
    const double g = g_score(a, s);
    CHECK(g <= std::max(a, s) + 1e-15);
    CHECK(g >= std::min(a, s) - 1e-15);
    CHECK(g_score(a + d, s) >= g);
  }
}

TEST_CASE("lm: uniform model over four outcomes") {
  const auto lm = NgramLM::from_counts({"a", "b"}, {}, 0.1);
  CHECK(lm.outcome_count() == 4);
  CHECK(lm.perplexity(TokenSeq{"a", "b"}) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(lm.perplexity(TokenSeq{"b", "b", "a", "zzz"}) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("lm: deterministic chain") {
  const std::vector<TokenSeq> corpus = {TokenSeq{"a", "b"}};
  const auto lm = NgramLM::train(corpus, 0.1);
  // Each of start->a, a->b, b->end has count 1 of 1 with four outcomes.
  const double p = 1.1 / 1.4;
  CHECK(lm.prob(NgramLM::kStart, lm.id("a")) == doctest::Approx(p).epsilon(1e-12));
  CHECK(lm.perplexity(TokenSeq{"a", "b"}) == doctest::Approx(1.0 / p).epsilon(1e-12));
  const auto sharp = NgramLM::train(corpus, 1e-9);
  CHECK(sharp.perplexity(TokenSeq{"a", "b"}) == doctest::Approx(1.0).epsilon(1e-6));
  // Empty sequence: only the end symbol is predicted.
  CHECK(lm.perplexity(TokenSeq{}) == doctest::Approx(1.0 / lm.prob(NgramLM::kStart, NgramLM::kEnd)));
}

TEST_CASE("lm: conditionals normalize and smoothing is required") {
  const auto spec = ToyCorpusSpec::standard();
  const auto lm = NgramLM::train(seqs(gen_toy_corpus(spec).train));
  std::vector<int> contexts = {NgramLM::kStart, NgramLM::kUnknown};
  for (int i = 0; i + 2 < static_cast<int>(lm.outcome_count()); ++i) contexts.push_back(i);
  for (int ctx : contexts) {
    const auto row = lm.conditional(ctx);
    CHECK(row.size() == lm.outcome_count());
    CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-9);
  }
  REQUIRE_THROWS_CONTAINING(std::invalid_argument, NgramLM::train(seqs(gen_toy_corpus(spec).train), 0.0),
                            "unsmoothed LM forbidden");
  CHECK_THROWS_AS(NgramLM::train({}), DataError);
}

TEST_CASE("lm: the repeated sentence is the most fluent") {
  const TokenSeq s = tokenize("the food was great .");
  const auto lm = NgramLM::train(std::vector<TokenSeq>(5, s));
  const double own = lm.perplexity(s);
  const auto spec = ToyCorpusSpec::standard();
  for (const auto& t : gen_toy_corpus(spec).test) {
    CHECK(lm.perplexity(t.source) >= own);
    CHECK(lm.perplexity(*t.reference) >= own);
  }
}

TEST_CASE("lm: shuffled training sentences are less fluent") {
  const auto spec = ToyCorpusSpec::standard();
  const auto corpus = seqs(gen_toy_corpus(spec).train);
  const auto lm = NgramLM::train(corpus);
  Rng rng(12);
  for (std::size_t i = 0; i < 50; ++i) {
    auto shuffled = corpus[i];
    for (std::size_t j = shuffled.size(); j > 1; --j) std::swap(shuffled.tokens[j - 1], shuffled.tokens[rng.below(j)]);
    CHECK(lm.perplexity(shuffled) >= lm.perplexity(corpus[i]) - 1e-12);
  }
}

TEST_CASE("lm: persistence round trip") {
  const auto spec = ToyCorpusSpec::standard();
  const auto toy = gen_toy_corpus(spec);
  const auto lm = NgramLM::train(seqs(toy.train), 0.3);
  const auto back = NgramLM::from_json(lm.to_json());
  for (const auto& t : toy.test) CHECK(back.perplexity(t.source) == lm.perplexity(t.source));
  auto doc = lm.to_json();
  doc["format"] = "restyle.classifier/1";
  CHECK_THROWS_AS(NgramLM::from_json(doc), DataError);
}

TEST_CASE("evaluate: corpus and per-example G") {
  const LabelSet labels({"neg", "pos"});
  const auto nb = NaiveBayesClassifier::train(
      {LabeledExample::from_text("good", labels.label(1)), LabeledExample::from_text("bad", labels.label(0))}, labels);
  const auto emb = TfIdfEmbedder::fit(std::vector<TokenSeq>{{"good"}, {"bad"}});
  const auto lm = NgramLM::train({TokenSeq{"good"}, TokenSeq{"bad"}});
  const std::vector<EvalRecord> records = {{TokenSeq{"bad"}, TokenSeq{"good"}, TokenSeq{"good"}, 1},
                                           {TokenSeq{"bad"}, TokenSeq{"good"}, TokenSeq{"good"}, 0}};
  const auto corpus = evaluate(records, nb, emb, lm, GMode::Corpus, SemanticMode::VsReference);
  const auto per = evaluate(records, nb, emb, lm, GMode::PerExample, SemanticMode::VsReference);
  CHECK(corpus.accuracy == 0.5);
  CHECK(corpus.semantic == doctest::Approx(1.0));
  CHECK(corpus.g == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(per.g == doctest::Approx(0.5).epsilon(1e-12));
  const auto vs_source = evaluate(records, nb, emb, lm, GMode::Corpus, SemanticMode::VsSource);
  CHECK(vs_source.semantic == 0.0);
  CHECK_THROWS_AS(evaluate({}, nb, emb, lm, GMode::Corpus, SemanticMode::VsSource), DataError);
  std::vector<EvalRecord> missing = records;
  missing[1].reference.reset();
  CHECK_THROWS_AS(evaluate(missing, nb, emb, lm, GMode::Corpus, SemanticMode::VsReference), DataError);
  CHECK_NOTHROW(evaluate(missing, nb, emb, lm, GMode::Corpus, SemanticMode::VsSource));
}

TEST_CASE("evaluate: copy and reference systems on the toy corpus") {
  const auto spec = ToyCorpusSpec::standard();
  const auto toy = gen_toy_corpus(spec);
  const auto nb = NaiveBayesClassifier::train(toy.train, spec.labels());
  const auto emb = TfIdfEmbedder::fit(toy.train);
  const auto lm = NgramLM::train(seqs(toy.train));
  std::vector<EvalRecord> copy, ref;
  std::size_t already = 0;
  for (const auto& t : toy.test) {
    copy.push_back({t.source, t.source, t.reference, t.target_label});
    ref.push_back({t.source, *t.reference, t.reference, t.target_label});
    already += nb.predict(t.source) == t.target_label;
  }
  const auto c = evaluate(copy, nb, emb, lm, GMode::Corpus, SemanticMode::VsReference);
  const auto r = evaluate(ref, nb, emb, lm, GMode::Corpus, SemanticMode::VsReference);
  CHECK(c.s_bleu == 100.0);
  CHECK(r.semantic == 1.0);
  CHECK(c.accuracy == static_cast<double>(already) / static_cast<double>(toy.test.size()));
  CHECK(c.accuracy < 0.1);
}

TEST_CASE("evaluate: report invariants, determinism and serial agreement on random records") {
  const auto spec = ToyCorpusSpec::standard();
  const auto toy = gen_toy_corpus(spec);
  const auto nb = NaiveBayesClassifier::train(toy.train, spec.labels());
  const auto emb = TfIdfEmbedder::fit(toy.train);
  const auto lm = NgramLM::train(seqs(toy.train));
  std::vector<std::string> words = {"the", "food", "was", ".", "zebra", "tonight"};
  for (const auto& lex : spec.lexicons) words.insert(words.end(), lex.begin(), lex.end());
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<EvalRecord> records;
    const std::size_t n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i)
      records.push_back({random_seq(rng, words, 6), random_seq(rng, words, 6), random_seq(rng, words, 6), rng.below(2)});
    for (GMode mode : {GMode::Corpus, GMode::PerExample}) {
      const auto rep = evaluate(records, nb, emb, lm, mode, SemanticMode::VsReference, 1);
      CHECK(rep.rows.size() == n);
      CHECK(rep.accuracy >= 0.0);
      CHECK(rep.accuracy <= 1.0);
      CHECK(rep.semantic >= 0.0);
      CHECK(rep.semantic <= 1.0);
      CHECK(rep.s_bleu >= 0.0);
      CHECK(rep.s_bleu <= 100.0);
      CHECK(rep.fluency >= 1.0);
      if (mode == GMode::Corpus) {
        CHECK(std::abs(rep.g - std::sqrt(rep.accuracy * rep.semantic)) <= 1e-9);
      } else {
        double sum = 0.0;
        for (const auto& row : rep.rows) sum += std::sqrt((row.acc_hit ? 1.0 : 0.0) * row.semantic);
        CHECK(std::abs(rep.g - sum / static_cast<double>(n)) <= 1e-9);
      }
      const auto serial = reference::evaluate(records, nb, emb, lm, mode, SemanticMode::VsReference);
      for (int workers : {1, 2, 4}) CHECK(evaluate(records, nb, emb, lm, mode, SemanticMode::VsReference, workers) == serial);
    }
  }
}

TEST_CASE("mode names") {
  CHECK(parse_g_mode(to_string(GMode::PerExample)) == GMode::PerExample);
  CHECK(parse_semantic_mode(to_string(SemanticMode::VsSource)) == SemanticMode::VsSource);
  CHECK_THROWS_AS(parse_g_mode("median"), std::invalid_argument);
}
