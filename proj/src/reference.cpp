#include "restyle/reference.hpp"

#include "restyle/rng.hpp"

namespace restyle::reference {

TransferResult transfer(const TransferComponents& components, const TransferRequest& req) {
  req.validate(components.classifier.labels());
  const std::size_t control = req.control.value_or(req.target_label);
  TransferResult res;
  std::vector<CandidateScore> scored;
  for (std::size_t i = 0; i < req.k; ++i) {
    const auto variant = mask(req.source, req.mask, mix(req.mask_seed, i));
    GenOptions opts = req.gen;
    opts.n = 1;
    opts.seed = mix(req.gen.seed, i);
    Candidate c;
    c.tokens = components.backend.generate(variant, control, opts).front();
    c.target_prob = components.classifier.predict_proba(c.tokens)[req.target_label];
    c.similarity = components.similarity.similarity(c.tokens, req.source);
    c.passed = passes({c.target_prob, c.similarity}, req.policy);
    scored.push_back({c.target_prob, c.similarity});
    res.candidates.push_back(std::move(c));
  }
  res.chosen_index = select_candidate(scored, req.policy);
  res.output = res.chosen_index ? res.candidates[*res.chosen_index].tokens : req.source;
  return res;
}

std::vector<TransferResult> transfer_batch(const TransferComponents& components,
                                           const std::vector<TransferRequest>& requests) {
  std::vector<TransferResult> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(reference::transfer(components, r));
  return out;
}

EvalReport evaluate(const std::vector<EvalRecord>& records, const AttributeClassifier& classifier,
                    const SimilarityModel& similarity, const NgramLM& lm, GMode g_mode, SemanticMode semantic_mode) {
  check_records(records, classifier.labels(), semantic_mode);
  std::vector<EvalRow> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(score_record(r, classifier, similarity, lm, semantic_mode));
  return aggregate(std::move(rows), g_mode);
}

}  // namespace restyle::reference
