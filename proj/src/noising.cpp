#include "restyle/noising.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "restyle/error.hpp"
#include "restyle/rng.hpp"

namespace restyle {

void MaskSpec::validate() const {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("mask ratio must be in [0,1]");
  if (!(span_mean >= 1.0)) throw std::invalid_argument("span mean must be >= 1");
  if (!(blend >= 0.0 && blend <= 1.0)) throw std::invalid_argument("blend must be in [0,1]");
}

std::size_t MaskedVariant::masked_run_count() const {
  std::size_t runs = 0;
  for (std::size_t i = 0; i < masked_positions.size(); ++i)
    if (i == 0 || masked_positions[i] != masked_positions[i - 1] + 1) ++runs;
  return runs;
}

bool MaskedVariant::is_masked(std::size_t pos) const {
  return std::binary_search(masked_positions.begin(), masked_positions.end(), pos);
}

std::vector<double> MaskedVariant::blend_weights() const {
  if (kind == MaskMode::Soft) return weights;
  std::vector<double> w(source.size(), 0.0);
  for (auto p : masked_positions) w[p] = 1.0;
  return w;
}

std::size_t mask_budget(std::size_t n, double ratio) {
  if (ratio <= 0.0 || n == 0) return 0;
  // Tolerance keeps products like 0.7 * 10 from rounding up a whole token.
  auto want = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  return std::min(n, std::max<std::size_t>(1, want));
}

std::vector<std::size_t> sample_mask_positions(std::size_t n, const MaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t budget = mask_budget(n, spec.ratio);
  if (spec.ratio > 0.0 && n == 0) throw DataError("nothing to mask");
  std::vector<char> masked(n, 0);
  std::size_t covered = 0;
  Rng rng(seed);
  while (covered < budget) {
    const std::size_t start = rng.below(n);
    const std::size_t len = rng.geometric(spec.span_mean);
    for (std::size_t p = start; p < n && p - start < len && covered < budget; ++p) {
      if (!masked[p]) {
        masked[p] = 1;
        ++covered;
      }
    }
  }
  std::vector<std::size_t> out;
  out.reserve(budget);
  for (std::size_t p = 0; p < n; ++p)
    if (masked[p]) out.push_back(p);
  return out;
}

MaskedVariant mask_at(const TokenSeq& seq, std::vector<std::size_t> positions, MaskMode kind, double blend) {
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  if (!positions.empty() && positions.back() >= seq.size())
    throw std::invalid_argument("mask position out of range");
  MaskedVariant v;
  v.kind = kind;
  v.source = seq;
  v.masked_positions = std::move(positions);
  if (kind == MaskMode::Hard) {
    std::size_t next = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const bool m = next < v.masked_positions.size() && v.masked_positions[next] == i;
      if (!m) {
        v.hard_tokens.tokens.push_back(seq[i]);
        continue;
      }
      ++next;
      if (i == 0 || !v.is_masked(i - 1)) v.hard_tokens.tokens.emplace_back(kMaskToken);
    }
  } else {
    v.weights.assign(seq.size(), 0.0);
    // With blend == 0 the positions stay recorded (budget and hard/soft
    // agreement hold) while the weights are all zero.
    for (auto p : v.masked_positions) v.weights[p] = blend;
  }
  return v;
}

MaskedVariant hard_mask(const TokenSeq& seq, const MaskSpec& spec, std::uint64_t seed) {
  if (spec.mode != MaskMode::Hard) throw std::invalid_argument("hard_mask needs a hard mask spec");
  return mask_at(seq, sample_mask_positions(seq.size(), spec, seed), MaskMode::Hard, 1.0);
}

MaskedVariant soft_mask(const TokenSeq& seq, const MaskSpec& spec, std::uint64_t seed) {
  if (spec.mode != MaskMode::Soft) throw std::invalid_argument("soft_mask needs a soft mask spec");
  return mask_at(seq, sample_mask_positions(seq.size(), spec, seed), MaskMode::Soft, spec.blend);
}

MaskedVariant mask(const TokenSeq& seq, const MaskSpec& spec, std::uint64_t seed) {
  return spec.mode == MaskMode::Hard ? hard_mask(seq, spec, seed) : soft_mask(seq, spec, seed);
}

std::vector<MaskedVariant> make_variants(const TokenSeq& seq, const MaskSpec& spec, std::size_t k,
                                         std::uint64_t base_seed) {
  if (k == 0) throw std::invalid_argument("K must be positive");
  std::vector<MaskedVariant> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(mask(seq, spec, mix(base_seed, i)));
  return out;
}

}  // namespace restyle
