#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "restyle/corpus_io.hpp"
#include "restyle/text.hpp"

namespace restyle {

inline constexpr std::string_view kSlot = "SLOT";

/// Template sentences with one SLOT each, filled from per-label lexicons.
struct ToyCorpusSpec {
  std::vector<std::string> templates;
  std::vector<std::string> label_names;
  /// lexicons[l] holds the slot words of label l; pairwise disjoint.
  std::vector<std::vector<std::string>> lexicons;
  /// Training sentences per (label, template).
  std::size_t train_per_template = 25;
  std::size_t test_per_label = 25;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on a malformed spec.
  void validate() const;
  LabelSet labels() const;

  /// Two sentiment labels over four restaurant-review templates.
  static ToyCorpusSpec standard();

  nlohmann::json to_json() const;
  static ToyCorpusSpec from_json(const nlohmann::json& doc);
};

struct ToyCorpus {
  std::vector<LabeledExample> train;
  std::vector<TestItem> test;
};

/// Training lines cycle through each lexicon and are shuffled; test items
/// use templates round-robin with a uniformly drawn source word, and the
/// reference swaps the slot to a uniform word of the target lexicon.
ToyCorpus gen_toy_corpus(const ToyCorpusSpec& spec);

/// Every sentence obtained from `source` by replacing its slot word with a
/// word of the target label's lexicon. Empty when `source` has no slot word.
std::vector<TokenSeq> slot_swap_oracle(const ToyCorpusSpec& spec, const TokenSeq& source, std::size_t target);

}  // namespace restyle
