#include "restyle/pipeline.hpp"

#include <stdexcept>

#include "restyle/error.hpp"
#include "restyle/parallel.hpp"
#include "restyle/rng.hpp"

namespace restyle {

void SelectionPolicy::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("selection threshold must be in [0,1]");
  if (similarity_floor && !(*similarity_floor >= 0.0 && *similarity_floor <= 1.0))
    throw std::invalid_argument("similarity floor must be in [0,1]");
}

bool passes(const CandidateScore& score, const SelectionPolicy& policy) {
  if (score.target_prob < policy.threshold) return false;
  return !policy.similarity_floor || score.similarity >= *policy.similarity_floor;
}

std::optional<std::size_t> select_candidate(std::span<const CandidateScore> scored, const SelectionPolicy& policy) {
  if (scored.empty()) throw std::invalid_argument("no candidates to select from");
  policy.validate();
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (!passes(scored[i], policy)) continue;
    if (!best || scored[i].similarity > scored[*best].similarity) best = i;
  }
  if (best || policy.fallback == Fallback::CopySource) return best;
  std::size_t top = 0;
  for (std::size_t i = 1; i < scored.size(); ++i)
    if (scored[i].target_prob > scored[top].target_prob) top = i;
  return top;
}

void TransferRequest::validate(const LabelSet& labels) const {
  if (k == 0) throw std::invalid_argument("K must be at least 1");
  if (target_label >= labels.size()) throw std::invalid_argument("target label outside the label set");
  if (control && *control >= labels.size()) throw std::invalid_argument("control label outside the label set");
  mask.validate();
  policy.validate();
  GenOptions one = gen;
  one.n = 1;
  one.validate();
}

bool operator==(const Candidate& a, const Candidate& b) {
  return a.tokens == b.tokens && a.target_prob == b.target_prob && a.similarity == b.similarity &&
         a.passed == b.passed;
}

bool operator==(const TransferResult& a, const TransferResult& b) {
  return a.output == b.output && a.chosen_index == b.chosen_index && a.candidates == b.candidates;
}

TransferRequest make_request(const TokenSeq& source, std::optional<std::size_t> source_label,
                             std::size_t target_label, const TransferSettings& settings, std::uint64_t seed,
                             std::size_t index) {
  TransferRequest req;
  req.source = source;
  req.source_label = source_label;
  req.target_label = target_label;
  req.control = settings.constant_control;
  req.k = settings.k;
  req.mask = settings.mask;
  req.gen = settings.gen;
  req.gen.n = 1;
  req.mask_seed = mix(seed, 2 * index);
  req.gen.seed = mix(seed, 2 * index + 1);
  req.policy = settings.policy;
  return req;
}

namespace {

Candidate score(TokenSeq tokens, const TransferRequest& req, const TransferComponents& c) {
  Candidate cand;
  cand.target_prob = c.classifier.predict_proba(tokens)[req.target_label];
  cand.similarity = c.similarity.similarity(tokens, req.source);
  cand.passed = passes({cand.target_prob, cand.similarity}, req.policy);
  cand.tokens = std::move(tokens);
  return cand;
}

TransferResult finish(std::vector<Candidate> candidates, const TransferRequest& req) {
  std::vector<CandidateScore> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) scored.push_back({c.target_prob, c.similarity});
  TransferResult res;
  res.chosen_index = select_candidate(scored, req.policy);
  res.output = res.chosen_index ? candidates[*res.chosen_index].tokens : req.source;
  res.candidates = std::move(candidates);
  return res;
}

}  // namespace

TransferResult transfer(const TransferComponents& components, const TransferRequest& req, int workers) {
  req.validate(components.classifier.labels());
  const std::size_t control = req.control.value_or(req.target_label);
  std::vector<Candidate> candidates(req.k);
  parallel_for(req.k, workers, [&](std::size_t i) {
    const auto variant = mask(req.source, req.mask, mix(req.mask_seed, i));
    GenOptions opts = req.gen;
    opts.n = 1;
    opts.seed = mix(req.gen.seed, i);
    auto out = components.backend.generate(variant, control, opts);
    candidates[i] = score(std::move(out.front()), req, components);
  });
  return finish(std::move(candidates), req);
}

std::vector<TransferResult> transfer_batch(const TransferComponents& components,
                                           const std::vector<TransferRequest>& requests, int workers) {
  std::vector<TransferResult> out(requests.size());
  parallel_for(requests.size(), workers,
               [&](std::size_t i) { out[i] = transfer(components, requests[i], 1); });
  return out;
}

std::vector<TrainingPair> build_denoising_data(const std::vector<LabeledExample>& corpus,
                                               const AttributeClassifier& classifier, const MaskSpec& spec,
                                               std::size_t variants_per_example, std::uint64_t seed,
                                               ControlSource source) {
  if (corpus.empty()) throw DataError("empty corpus");
  if (variants_per_example == 0) throw std::invalid_argument("variants per example must be at least 1");
  std::vector<TrainingPair> pairs;
  pairs.reserve(corpus.size() * variants_per_example);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& ex = corpus[i];
    std::size_t control = 0;
    switch (source) {
      case ControlSource::Classifier: control = classifier.predict(ex.seq); break;
      case ControlSource::Gold:
        if (!ex.label) throw DataError("gold control requested for unlabeled example '" + ex.text + "'");
        control = ex.label->index;
        break;
      case ControlSource::Constant: control = 0; break;
    }
    for (auto& v : make_variants(ex.seq, spec, variants_per_example, mix(seed, i)))
      pairs.push_back({control, std::move(v)});
  }
  return pairs;
}

std::vector<TeacherRecord> build_student_data(const TransferComponents& teacher,
                                              const std::vector<LabeledExample>& corpus,
                                              const StudentDataOptions& options, std::uint64_t seed) {
  if (corpus.empty()) throw DataError("empty corpus");
  const std::size_t nl = teacher.classifier.labels().size();
  std::vector<TransferRequest> requests;
  requests.reserve(corpus.size() * (nl - 1));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& ex = corpus[i];
    const std::size_t from = ex.predicted_label ? ex.predicted_label->index : teacher.classifier.predict(ex.seq);
    for (std::size_t t = 0; t < nl; ++t) {
      if (t == from) continue;
      requests.push_back(make_request(ex.seq, from, t, options.teacher, seed, i * nl + t));
    }
  }
  const auto results = transfer_batch(teacher, requests, options.workers);
  std::vector<TeacherRecord> records;
  records.reserve(results.size());
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& res = results[r];
    TeacherRecord rec;
    rec.source = requests[r].source;
    rec.control = requests[r].target_label;
    rec.output = res.output;
    rec.copy_fallback = !res.chosen_index;
    if (res.chosen_index) {
      const auto& c = res.candidates[*res.chosen_index];
      rec.target_prob = c.target_prob;
      rec.similarity = c.similarity;
      rec.passed = c.passed;
    } else {
      rec.target_prob = teacher.classifier.predict_proba(rec.output)[rec.control];
      rec.similarity = 1.0;
    }
    if (rec.copy_fallback && !options.keep_copy_fallbacks) continue;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RewritePair> to_rewrite_pairs(const std::vector<TeacherRecord>& records, std::size_t* skipped) {
  std::vector<RewritePair> pairs;
  std::size_t dropped = 0;
  for (const auto& r : records) {
    if (r.output.size() != r.source.size()) {
      ++dropped;
      continue;
    }
    pairs.push_back({r.control, r.source, r.output});
  }
  if (skipped) *skipped = dropped;
  return pairs;
}

TransferResult student_transfer(const NeuralBackend& student, const AttributeClassifier& classifier,
                                const SimilarityModel& similarity, const TokenSeq& source, std::size_t target,
                                std::size_t k, const GenOptions& gen, const SelectionPolicy& policy) {
  if (k == 0) throw std::invalid_argument("K must be at least 1");
  if (target >= classifier.labels().size()) throw std::invalid_argument("target label outside the label set");
  GenOptions opts = gen;
  opts.n = k;
  opts.mode = k == 1 ? DecodeMode::Greedy : DecodeMode::Sample;
  const auto outputs = student.rewrite(source, target, opts);
  TransferResult res;
  std::vector<CandidateScore> scored;
  for (const auto& out : outputs) {
    Candidate c;
    c.target_prob = classifier.predict_proba(out)[target];
    c.similarity = similarity.similarity(out, source);
    c.passed = passes({c.target_prob, c.similarity}, policy);
    c.tokens = out;
    scored.push_back({c.target_prob, c.similarity});
    res.candidates.push_back(std::move(c));
  }
  res.chosen_index = select_candidate(scored, policy);
  res.output = res.chosen_index ? res.candidates[*res.chosen_index].tokens : source;
  return res;
}

}  // namespace restyle
