// Serial reference kernels against their OpenMP counterparts on the toy
// corpus. Arg(w) is the worker count of the parallel run.
#include <benchmark/benchmark.h>

#include <memory>

#include "restyle/classifier.hpp"
#include "restyle/count_backend.hpp"
#include "restyle/embedder.hpp"
#include "restyle/metrics.hpp"
#include "restyle/pipeline.hpp"
#include "restyle/reference.hpp"
#include "restyle/rng.hpp"
#include "restyle/toy_corpus.hpp"

using namespace restyle;

namespace {

struct Fixture {
  ToyCorpusSpec spec = ToyCorpusSpec::standard();
  ToyCorpus toy = gen_toy_corpus(spec);
  NaiveBayesClassifier cls = NaiveBayesClassifier::train(toy.train, spec.labels());
  TfIdfEmbedder emb = TfIdfEmbedder::fit(toy.train);
  NgramLM lm = NgramLM::train(seqs());
  CountBackend backend = CountBackend::train(std::make_shared<const Vocab>(Vocab::build(toy.train, spec.labels())),
                                             build_denoising_data(toy.train, cls, MaskSpec{}, 4, 1));
  std::vector<TransferRequest> requests;
  std::vector<EvalRecord> records;

  Fixture() {
    TransferSettings s;
    s.k = 32;
    s.policy.threshold = 0.6;
    for (std::size_t i = 0; i < toy.test.size(); ++i) {
      const auto& t = toy.test[i];
      requests.push_back(make_request(t.source, t.source_label, t.target_label, s, 5, i));
    }
    // Repeat the test set so evaluation has enough work to split.
    for (int r = 0; r < 20; ++r)
      for (const auto& t : toy.test) records.push_back({t.source, *t.reference, t.reference, t.target_label});
  }

  std::vector<TokenSeq> seqs() const {
    std::vector<TokenSeq> out;
    for (const auto& ex : toy.train) out.push_back(ex.seq);
    return out;
  }

  TransferComponents components() const { return {backend, cls, emb}; }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_TransferBatchReference(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(reference::transfer_batch(f.components(), f.requests));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.requests.size()));
}

void BM_TransferBatchParallel(benchmark::State& state) {
  const auto& f = fixture();
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(transfer_batch(f.components(), f.requests, workers));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.requests.size()));
}

void BM_EvaluateReference(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        reference::evaluate(f.records, f.cls, f.emb, f.lm, GMode::Corpus, SemanticMode::VsReference));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.records.size()));
}

void BM_EvaluateParallel(benchmark::State& state) {
  const auto& f = fixture();
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        evaluate(f.records, f.cls, f.emb, f.lm, GMode::Corpus, SemanticMode::VsReference, workers));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.records.size()));
}

}  // namespace

BENCHMARK(BM_TransferBatchReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TransferBatchParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
