#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <optional>

#include "restyle/classifier.hpp"
#include "restyle/count_backend.hpp"
#include "restyle/embedder.hpp"
#include "restyle/error.hpp"
#include "restyle/pipeline.hpp"
#include "restyle/reference.hpp"
#include "restyle/rng.hpp"
#include "restyle/toy_corpus.hpp"
#include "test_support.hpp"

using namespace restyle;

namespace {

std::optional<std::size_t> pick(std::vector<CandidateScore> scored, double tau,
                                Fallback fallback = Fallback::BestProb) {
  SelectionPolicy p;
  p.threshold = tau;
  p.fallback = fallback;
  return select_candidate(scored, p);
}

// Straight scan of the selection rule.
std::optional<std::size_t> brute_select(const std::vector<CandidateScore>& s, const SelectionPolicy& p) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool ok = s[i].target_prob >= p.threshold && (!p.similarity_floor || s[i].similarity >= *p.similarity_floor);
    if (ok && (!best || s[i].similarity > s[*best].similarity)) best = i;
  }
  if (best || p.fallback == Fallback::CopySource) return best;
  std::size_t top = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i].target_prob > s[top].target_prob) top = i;
  return top;
}

struct World {
  ToyCorpusSpec spec = ToyCorpusSpec::standard();
  ToyCorpus corpus = gen_toy_corpus(spec);
  LabelSet labels = spec.labels();
  NaiveBayesClassifier cls = NaiveBayesClassifier::train(corpus.train, labels);
  TfIdfEmbedder emb = TfIdfEmbedder::fit(corpus.train);
  std::shared_ptr<const Vocab> vocab = std::make_shared<const Vocab>(Vocab::build(corpus.train, labels));
  CountBackend backend = CountBackend::train(vocab, build_denoising_data(corpus.train, cls, MaskSpec{}, 4, 99));

  TransferComponents components() const { return {backend, cls, emb}; }
};

const World& world() {
  static const World w;
  return w;
}

}  // namespace

TEST_CASE("selection examples") {
  CHECK(pick({{0.9, 0.5}, {0.6, 0.9}, {0.4, 0.99}}, 0.5) == 1u);
  CHECK(pick({{0.4, 0.9}, {0.3, 0.99}}, 0.5) == 0u);
  CHECK(pick({{0.8, 0.7}, {0.8, 0.7}}, 0.5) == 0u);
  CHECK(pick({{0.4, 0.9}, {0.3, 0.99}}, 0.5, Fallback::CopySource) == std::nullopt);
  CHECK(pick({{0.5, 0.2}, {0.49, 0.9}}, 0.5) == 0u);
  CHECK_THROWS_AS(pick({}, 0.5), std::invalid_argument);
  SelectionPolicy floor;
  floor.similarity_floor = 0.8;
  const std::vector<CandidateScore> s = {{0.9, 0.5}, {0.6, 0.85}};
  CHECK(select_candidate(s, floor) == 1u);
  SelectionPolicy bad;
  bad.threshold = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("selection dominance against a brute-force scan") {
  Rng rng(123);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<CandidateScore> s(1 + rng.below(10));
    for (auto& c : s) {
      // Coarse grid so ties are common.
      c.target_prob = static_cast<double>(rng.below(5)) / 4.0;
      c.similarity = static_cast<double>(rng.below(5)) / 4.0;
    }
    SelectionPolicy p;
    p.threshold = static_cast<double>(rng.below(5)) / 4.0;
    p.fallback = rng.below(2) ? Fallback::BestProb : Fallback::CopySource;
    if (rng.below(3) == 0) p.similarity_floor = 0.5;
    const auto got = select_candidate(s, p);
    CHECK(got == brute_select(s, p));
    if (got && passes(s[*got], p))
      for (const auto& c : s)
        if (passes(c, p)) CHECK(s[*got].similarity >= c.similarity);
  }
}

TEST_CASE("denoising data counts and controls") {
  const auto& w = world();
  std::vector<LabeledExample> ten(w.corpus.train.begin(), w.corpus.train.begin() + 10);
  CHECK(build_denoising_data(ten, w.cls, MaskSpec{}, 4, 1).size() == 40);

  const LabelSet gb({"neg", "pos"});
  const auto nb = NaiveBayesClassifier::train(
      {LabeledExample::from_text("good", gb.label(1)), LabeledExample::from_text("bad", gb.label(0))}, gb);
  const auto pairs = build_denoising_data({LabeledExample::from_text("good good")}, nb, MaskSpec{}, 1, 1);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].control == 1);

  MaskSpec none;
  none.ratio = 0.0;
  for (const auto& p : build_denoising_data(ten, w.cls, none, 1, 1)) {
    CHECK(p.variant.hard_tokens == p.source());
    CHECK(p.variant.masked_positions.empty());
  }
  const auto gold = build_denoising_data(ten, w.cls, MaskSpec{}, 1, 1, ControlSource::Gold);
  for (std::size_t i = 0; i < ten.size(); ++i) CHECK(gold[i].control == ten[i].label->index);
  CHECK(build_denoising_data(ten, w.cls, MaskSpec{}, 3, 5).size() == 30);
}

TEST_CASE("degenerate transfer returns the source") {
  const auto& w = world();
  const auto& src = w.corpus.train[0];
  const std::size_t own = w.cls.predict(src.seq);
  TransferRequest req;
  req.source = src.seq;
  req.target_label = own;
  req.k = 1;
  req.mask.ratio = 0.0;
  const auto res = transfer(w.components(), req);
  REQUIRE(res.candidates.size() == 1);
  CHECK(res.candidates[0].tokens == src.seq);
  CHECK(res.output == src.seq);
  CHECK(res.chosen_index == 0u);
}

TEST_CASE("all candidates below threshold fall back to the best probability") {
  const auto& w = world();
  TransferRequest req;
  req.source = w.corpus.test[0].source;
  req.target_label = w.corpus.test[0].target_label;
  req.k = 16;
  req.mask_seed = 3;
  req.gen.seed = 4;
  req.policy.threshold = 1.0;
  const auto res = transfer(w.components(), req);
  std::size_t best = 0;
  for (std::size_t i = 1; i < res.candidates.size(); ++i)
    if (res.candidates[i].target_prob > res.candidates[best].target_prob) best = i;
  REQUIRE(res.chosen_index.has_value());
  CHECK(*res.chosen_index == best);
  CHECK(res.output == res.candidates[best].tokens);

  req.policy.fallback = Fallback::CopySource;
  const auto copy = transfer(w.components(), req);
  CHECK_FALSE(copy.chosen_index.has_value());
  CHECK(copy.output == req.source);
}

TEST_CASE("transfer result invariants and determinism") {
  const auto& w = world();
  TransferSettings settings;
  settings.k = 8;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& t = w.corpus.test[i];
    const auto req = make_request(t.source, t.source_label, t.target_label, settings, 77, i);
    const auto res = transfer(w.components(), req);
    CHECK(res.candidates.size() == 8);
    for (const auto& c : res.candidates) {
      CHECK(c.target_prob >= 0.0);
      CHECK(c.target_prob <= 1.0);
      CHECK(c.similarity >= 0.0);
      CHECK(c.similarity <= 1.0);
    }
    if (res.chosen_index) CHECK(res.output == res.candidates[*res.chosen_index].tokens);
    CHECK(res == transfer(w.components(), req));
  }
  TransferRequest empty;
  empty.target_label = 1;
  CHECK_THROWS_AS(transfer(w.components(), empty), DataError);
  TransferRequest bad;
  bad.source = tokenize("a b");
  bad.target_label = 5;
  CHECK_THROWS_AS(transfer(w.components(), bad), std::invalid_argument);
}

TEST_CASE("parallel kernels equal the serial reference") {
  const auto& w = world();
  TransferSettings settings;
  settings.k = 12;
  std::vector<TransferRequest> reqs;
  for (std::size_t i = 0; i < w.corpus.test.size(); ++i) {
    const auto& t = w.corpus.test[i];
    reqs.push_back(make_request(t.source, t.source_label, t.target_label, settings, 5, i));
  }
  const auto serial = reference::transfer_batch(w.components(), reqs);
  for (int workers : {1, 2, 4}) {
    CHECK(transfer_batch(w.components(), reqs, workers) == serial);
    for (std::size_t i = 0; i < 5; ++i) CHECK(transfer(w.components(), reqs[i], workers) == serial[i]);
  }
}

TEST_CASE("student data: one record per other label") {
  const auto& w = world();
  std::vector<LabeledExample> some(w.corpus.train.begin(), w.corpus.train.begin() + 12);
  StudentDataOptions opts;
  opts.teacher.k = 8;
  opts.teacher.policy.threshold = 0.6;
  const auto recs = build_student_data(w.components(), some, opts, 3);
  CHECK(recs.size() == some.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].source == some[i].seq);
    CHECK(recs[i].control != w.cls.predict(some[i].seq));
    if (recs[i].passed) CHECK(w.cls.predict(recs[i].output) == recs[i].control);
  }
  std::size_t skipped = 0;
  const auto pairs = to_rewrite_pairs(recs, &skipped);
  CHECK(pairs.size() + skipped == recs.size());
  for (const auto& p : pairs) {
    CHECK(p.input.size() == p.output.size());
    for (const auto& tok : p.input) CHECK_FALSE(is_reserved_spelling(tok));
  }

  opts.teacher.policy.fallback = Fallback::CopySource;
  opts.teacher.policy.threshold = 1.0;
  CHECK(build_student_data(w.components(), some, opts, 3).empty());
  opts.keep_copy_fallbacks = true;
  const auto kept = build_student_data(w.components(), some, opts, 3);
  CHECK(kept.size() == some.size());
  for (const auto& r : kept) CHECK(r.copy_fallback);
}

TEST_CASE("student data: three labels give two records per example") {
  ToyCorpusSpec spec;
  spec.templates = {"the food was SLOT .", "i found it SLOT"};
  spec.label_names = {"neg", "neu", "pos"};
  spec.lexicons = {{"awful", "bland"}, {"okay", "fine"}, {"great", "tasty"}};
  spec.train_per_template = 5;
  spec.test_per_label = 2;
  spec.seed = 1;
  const auto corpus = gen_toy_corpus(spec);
  const auto labels = spec.labels();
  const auto cls = NaiveBayesClassifier::train(corpus.train, labels);
  const auto emb = TfIdfEmbedder::fit(corpus.train);
  const auto vocab = std::make_shared<const Vocab>(Vocab::build(corpus.train, labels));
  const auto backend = CountBackend::train(vocab, build_denoising_data(corpus.train, cls, MaskSpec{}, 2, 1));
  StudentDataOptions opts;
  opts.teacher.k = 4;
  const auto recs = build_student_data({backend, cls, emb}, corpus.train, opts, 2);
  CHECK(recs.size() == 2 * corpus.train.size());
}

TEST_CASE("student transfer") {
  const auto& w = world();
  std::vector<RewritePair> pairs;
  for (const auto& t : w.corpus.test) pairs.push_back({t.target_label, t.source, *t.reference});
  NeuralHyper h;
  h.epochs = 20;
  h.learning_rate = 1.0;
  const auto student = NeuralBackend::train_rewrite(w.vocab, pairs, h, 1);
  GenOptions g;
  g.seed = 8;
  const auto& t = w.corpus.test[0];
  const auto one = student_transfer(student, w.cls, w.emb, t.source, t.target_label, 1, g, SelectionPolicy{});
  CHECK(one.candidates.size() == 1);
  g.seed = 999;
  CHECK(student_transfer(student, w.cls, w.emb, t.source, t.target_label, 1, g, SelectionPolicy{}).output ==
        one.output);
  const auto four = student_transfer(student, w.cls, w.emb, t.source, t.target_label, 4, g, SelectionPolicy{});
  CHECK(four.candidates.size() == 4);
  CHECK(four == student_transfer(student, w.cls, w.emb, t.source, t.target_label, 4, g, SelectionPolicy{}));
  CHECK_THROWS_AS(student_transfer(student, w.cls, w.emb, t.source, t.target_label, 0, g, SelectionPolicy{}),
                  std::invalid_argument);
}
