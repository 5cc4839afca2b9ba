#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "restyle/classifier.hpp"
#include "restyle/embedder.hpp"
#include "restyle/text.hpp"

namespace restyle {

/// Sentence BLEU-4 in [0, 100]. Unigram precision is unsmoothed, orders
/// 2-4 use (matches + 1) / (total + 1); brevity penalty exp(1 - r/c) when
/// the candidate is shorter. Both empty -> 100, empty candidate -> 0.
double bleu(const TokenSeq& candidate, const TokenSeq& reference);

/// Geometric mean sqrt(accuracy * semantic); inputs must lie in [0, 1].
double g_score(double accuracy, double semantic);

/// Bigram language model with add-k smoothing and sentence boundaries.
/// Outcomes are the training tokens plus end-of-sentence and unknown;
/// contexts are start-of-sentence, training tokens and unknown.
class NgramLM {
 public:
  static constexpr int kStart = -1;
  static constexpr int kEnd = -2;
  static constexpr int kUnknown = -3;

  static NgramLM train(const std::vector<TokenSeq>& corpus, double k = 0.1);
  /// Model over `tokens` with explicit bigram counts (context -> next -> count).
  static NgramLM from_counts(std::vector<std::string> tokens, std::map<int, std::map<int, double>> counts, double k);

  int id(const std::string& token) const;
  /// Number of outcomes: tokens + end + unknown.
  std::size_t outcome_count() const { return tokens_.size() + 2; }
  double prob(int context, int next) const;
  /// Full conditional distribution for a context, outcomes in id order
  /// (tokens, then end, then unknown).
  std::vector<double> conditional(int context) const;
  double perplexity(const TokenSeq& seq) const;
  double smoothing() const { return k_; }
  int order() const { return 2; }

  nlohmann::json to_json() const;
  static NgramLM from_json(const nlohmann::json& doc);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
  std::map<int, std::map<int, double>> counts_;
  std::map<int, double> context_totals_;
  double k_ = 0.1;
};

enum class GMode { Corpus, PerExample };
enum class SemanticMode { VsReference, VsSource };

struct EvalRecord {
  TokenSeq source;
  TokenSeq output;
  std::optional<TokenSeq> reference;
  std::size_t target_label = 0;
};

struct EvalRow {
  bool acc_hit = false;
  double semantic = 0.0;
  double bleu = 0.0;
  double perplexity = 0.0;

  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct EvalReport {
  double accuracy = 0.0;
  double semantic = 0.0;
  double g = 0.0;
  double s_bleu = 0.0;
  double fluency = 0.0;
  GMode g_mode = GMode::Corpus;
  std::vector<EvalRow> rows;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Scores records in parallel and reduces them in record order.
EvalReport evaluate(const std::vector<EvalRecord>& records, const AttributeClassifier& classifier,
                    const SimilarityModel& similarity, const NgramLM& lm, GMode g_mode, SemanticMode semantic_mode,
                    int workers = 0);

/// One record's scores (shared by the parallel and serial evaluators).
EvalRow score_record(const EvalRecord& record, const AttributeClassifier& classifier,
                     const SimilarityModel& similarity, const NgramLM& lm, SemanticMode semantic_mode);

/// Corpus means and G from per-record rows, summed in row order.
EvalReport aggregate(std::vector<EvalRow> rows, GMode g_mode);

/// Throws DataError when VsReference is requested and a reference is missing.
void check_records(const std::vector<EvalRecord>& records, const LabelSet& labels, SemanticMode semantic_mode);

std::string to_string(GMode mode);
std::string to_string(SemanticMode mode);
GMode parse_g_mode(const std::string& name);
SemanticMode parse_semantic_mode(const std::string& name);

}  // namespace restyle
