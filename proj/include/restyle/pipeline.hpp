#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "restyle/backend.hpp"
#include "restyle/classifier.hpp"
#include "restyle/embedder.hpp"
#include "restyle/neural_backend.hpp"
#include "restyle/noising.hpp"
#include "restyle/text.hpp"

namespace restyle {

enum class Fallback { BestProb, CopySource };

/// Keep candidates whose target probability reaches `threshold` (and whose
/// similarity reaches the floor, when set); pick the most similar. When
/// nothing passes, BestProb takes the most target-like candidate and
/// CopySource gives up (the caller emits the source).
struct SelectionPolicy {
  double threshold = 0.5;
  Fallback fallback = Fallback::BestProb;
  std::optional<double> similarity_floor;

  void validate() const;
};

struct CandidateScore {
  double target_prob = 0.0;
  double similarity = 0.0;
};

bool passes(const CandidateScore& score, const SelectionPolicy& policy);

/// Index of the selected candidate, or nullopt for a CopySource fallback.
/// Ties go to the lowest index.
std::optional<std::size_t> select_candidate(std::span<const CandidateScore> scored, const SelectionPolicy& policy);

struct TransferRequest {
  TokenSeq source;
  std::optional<std::size_t> source_label;
  std::size_t target_label = 0;
  /// Control fed to the generator; defaults to target_label. The no-control
  /// ablation pins it to a constant.
  std::optional<std::size_t> control;
  std::size_t k = 32;
  MaskSpec mask;
  /// Per-variant decoding options; n is forced to 1 and the seed of
  /// variant i is mix(gen.seed, i).
  GenOptions gen;
  /// Variant i is masked with mix(mask_seed, i).
  std::uint64_t mask_seed = 0;
  SelectionPolicy policy;

  void validate(const LabelSet& labels) const;
};

struct Candidate {
  TokenSeq tokens;
  double target_prob = 0.0;
  double similarity = 0.0;
  bool passed = false;
};

struct TransferResult {
  TokenSeq output;
  std::optional<std::size_t> chosen_index;
  std::vector<Candidate> candidates;

  friend bool operator==(const TransferResult& a, const TransferResult& b);
};

bool operator==(const Candidate& a, const Candidate& b);

/// Read-only views of the trained components a transfer needs.
struct TransferComponents {
  const InfillBackend& backend;
  const AttributeClassifier& classifier;
  const SimilarityModel& similarity;
};

/// Settings shared by every request of a batch.
struct TransferSettings {
  std::size_t k = 32;
  MaskSpec mask;
  GenOptions gen;
  SelectionPolicy policy;
  std::optional<std::size_t> constant_control;
};

/// Request for item `index` of a batch, with seeds derived from `seed`.
TransferRequest make_request(const TokenSeq& source, std::optional<std::size_t> source_label,
                             std::size_t target_label, const TransferSettings& settings, std::uint64_t seed,
                             std::size_t index);

/// K masked variants, one candidate each, scored by the classifier's
/// target probability and similarity to the source, then selected.
/// Candidate generation and scoring fan out over `workers`.
TransferResult transfer(const TransferComponents& components, const TransferRequest& req, int workers = 1);

/// Runs every request; parallel across requests, results in input order.
std::vector<TransferResult> transfer_batch(const TransferComponents& components,
                                           const std::vector<TransferRequest>& requests, int workers = 0);

enum class ControlSource { Classifier, Gold, Constant };

/// V masked variants per example, each paired with the example's control
/// label (classifier argmax by default). Example i uses base seed
/// mix(seed, i) for its variants.
std::vector<TrainingPair> build_denoising_data(const std::vector<LabeledExample>& corpus,
                                               const AttributeClassifier& classifier, const MaskSpec& spec,
                                               std::size_t variants_per_example, std::uint64_t seed,
                                               ControlSource source = ControlSource::Classifier);

struct TeacherRecord {
  TokenSeq source;
  std::size_t control = 0;
  TokenSeq output;
  double target_prob = 0.0;
  double similarity = 0.0;
  bool passed = false;
  bool copy_fallback = false;
};

struct StudentDataOptions {
  TransferSettings teacher;
  bool keep_copy_fallbacks = false;
  int workers = 0;
};

/// Teacher transfers of every corpus example to every label other than its
/// predicted one.
std::vector<TeacherRecord> build_student_data(const TransferComponents& teacher,
                                              const std::vector<LabeledExample>& corpus,
                                              const StudentDataOptions& options, std::uint64_t seed);

/// Unmasked (control + source -> output) pairs for a rewrite-mode student.
/// Records whose output length differs from the source are skipped and
/// counted in `skipped`.
std::vector<RewritePair> to_rewrite_pairs(const std::vector<TeacherRecord>& records, std::size_t* skipped = nullptr);

/// Student inference. k == 1 decodes one greedy sample; k > 1 samples k
/// rewrites (seeded by gen.seed) and filters them with `policy`.
TransferResult student_transfer(const NeuralBackend& student, const AttributeClassifier& classifier,
                                const SimilarityModel& similarity, const TokenSeq& source, std::size_t target,
                                std::size_t k, const GenOptions& gen, const SelectionPolicy& policy);

}  // namespace restyle
