#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "json.hpp"

#include "restyle/backend.hpp"
#include "restyle/rng.hpp"

namespace restyle {

/// Span infiller built from counts. Per control label it keeps bigram
/// continuation counts seen inside masked runs (the first token of a run is
/// conditioned on the token left of the run, or sentence start, and the last
/// one also counts its transition into the token right of the run, or into
/// the end of the sentence) and a
/// histogram of run lengths. Each "<mask>" is filled by drawing a length and
/// a bigram chain from the token left of the sentinel, conditioned on the
/// chain leading into whatever follows the sentinel when that is possible.
class CountBackend final : public InfillBackend {
 public:
  static constexpr int kStartContext = -1;
  /// Outcome for a run that closes the sentence.
  static constexpr int kEndOutcome = -2;

  static CountBackend train(std::shared_ptr<const Vocab> vocab, const std::vector<TrainingPair>& pairs);

  BackendKind kind() const override { return BackendKind::Count; }
  bool supports(MaskMode mode) const override { return mode == MaskMode::Hard; }
  std::vector<TokenSeq> generate(const MaskedVariant& variant, std::size_t control,
                                 const GenOptions& opts) const override;

  /// P(next | prev, label) with backoff: the label's bigram row, the bigram
  /// row over all labels, the label's span unigram, then the unigram over
  /// all labels. Pairs are in id order.
  std::vector<std::pair<int, double>> continuation(std::size_t label, int prev) const;
  /// Span-length distribution for the label (all labels when unseen).
  std::vector<std::pair<std::size_t, double>> span_lengths(std::size_t label) const;
  std::size_t longest_span() const { return longest_span_; }
  const Vocab& vocab() const { return *vocab_; }

  nlohmann::json to_json() const;
  static CountBackend from_json(const nlohmann::json& doc);

 private:
  using Counts = std::map<int, std::uint64_t>;

  std::shared_ptr<const Vocab> vocab_;
  using Dist = std::vector<std::pair<int, double>>;

  void fill_span(std::size_t control, int left, int right, const GenOptions& opts, Rng& rng, TokenSeq& out) const;

  std::vector<std::map<int, Counts>> bigram_;
  std::map<int, Counts> global_bigram_;
  std::vector<Counts> unigram_;
  Counts global_unigram_;
  std::vector<std::map<std::size_t, std::uint64_t>> lengths_;
  std::map<std::size_t, std::uint64_t> global_lengths_;
  std::size_t longest_span_ = 0;
};

}  // namespace restyle
