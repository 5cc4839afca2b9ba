#pragma once

#include <vector>

#include "restyle/metrics.hpp"
#include "restyle/pipeline.hpp"

/// Plain serial versions of the parallel kernels. They share the per-item
/// arithmetic with the parallel code and exist so tests and benchmarks can
/// compare the two.
namespace restyle::reference {

TransferResult transfer(const TransferComponents& components, const TransferRequest& req);

std::vector<TransferResult> transfer_batch(const TransferComponents& components,
                                           const std::vector<TransferRequest>& requests);

EvalReport evaluate(const std::vector<EvalRecord>& records, const AttributeClassifier& classifier,
                    const SimilarityModel& similarity, const NgramLM& lm, GMode g_mode, SemanticMode semantic_mode);

}  // namespace restyle::reference
