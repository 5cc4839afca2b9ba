#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "restyle/text.hpp"

namespace restyle {

enum class MaskMode { Hard, Soft };

/// Masking budget and span shape. `blend` is the soft-mask coefficient:
/// a masked token's input becomes (1 - blend) * token + blend * mask.
struct MaskSpec {
  double ratio = 0.4;
  double span_mean = 3.0;
  MaskMode mode = MaskMode::Hard;
  double blend = 0.5;

  void validate() const;
};

struct MaskedVariant {
  MaskMode kind = MaskMode::Hard;
  TokenSeq source;
  /// Hard only: source with every maximal masked run collapsed to "<mask>".
  TokenSeq hard_tokens;
  /// Soft only: one weight per source token, > 0 exactly at masked positions.
  std::vector<double> weights;
  /// Sorted source indices.
  std::vector<std::size_t> masked_positions;

  std::size_t masked_run_count() const;
  bool is_masked(std::size_t pos) const;
  /// Per-token blend weights for either kind (hard masks weigh 1).
  std::vector<double> blend_weights() const;
};

/// Number of positions a sequence of length n gets masked at `ratio`.
std::size_t mask_budget(std::size_t n, double ratio);

/// The shared span stream behind hard_mask and soft_mask: repeated
/// (uniform start, geometric length) draws until the budget is covered.
std::vector<std::size_t> sample_mask_positions(std::size_t n, const MaskSpec& spec, std::uint64_t seed);

MaskedVariant hard_mask(const TokenSeq& seq, const MaskSpec& spec, std::uint64_t seed);
MaskedVariant soft_mask(const TokenSeq& seq, const MaskSpec& spec, std::uint64_t seed);
/// Dispatches on spec.mode.
MaskedVariant mask(const TokenSeq& seq, const MaskSpec& spec, std::uint64_t seed);
/// Variant masked at explicit positions (used by tests and the bridge).
MaskedVariant mask_at(const TokenSeq& seq, std::vector<std::size_t> positions, MaskMode kind, double blend);

/// K variants; variant i is masked with seed mix(base_seed, i).
std::vector<MaskedVariant> make_variants(const TokenSeq& seq, const MaskSpec& spec, std::size_t k,
                                         std::uint64_t base_seed);

}  // namespace restyle
