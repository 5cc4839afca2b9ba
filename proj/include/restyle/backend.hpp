#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "restyle/noising.hpp"
#include "restyle/text.hpp"

namespace restyle {

enum class BackendKind { Count, Neural, Bridge };
enum class DecodeMode { Greedy, Sample };

std::string to_string(BackendKind kind);
BackendKind parse_backend_kind(const std::string& name);

struct GenOptions {
  std::size_t n = 1;
  double temperature = 1.0;
  DecodeMode mode = DecodeMode::Sample;
  std::uint64_t seed = 0;
  /// Cap on tokens generated for a single masked span.
  std::size_t max_len = 64;

  /// Rejects n == 0, non-positive temperature, and greedy with n > 1.
  void validate() const;
};

/// One controlled-denoising example: reconstruct variant.source from the
/// variant under the given control label.
struct TrainingPair {
  std::size_t control = 0;
  MaskedVariant variant;

  const TokenSeq& source() const { return variant.source; }
};

/// A trained conditional infilling generator. Implementations are
/// immutable after training and safe to call concurrently.
class InfillBackend {
 public:
  virtual ~InfillBackend() = default;
  virtual BackendKind kind() const = 0;
  virtual bool supports(MaskMode mode) const = 0;

  /// opts.n completions of `variant` under `control`. Every output keeps the
  /// variant's unmasked tokens in order and contains no reserved token.
  virtual std::vector<TokenSeq> generate(const MaskedVariant& variant, std::size_t control,
                                         const GenOptions& opts) const = 0;
};

/// Hyperparameters for the built-in neural backend.
struct NeuralHyper {
  std::size_t dim = 32;
  std::size_t window = 3;
  double learning_rate = 1.0;
  std::size_t epochs = 40;
  double init_scale = 0.05;
  /// Stop after this many SGD steps; 0 means run every epoch to the end.
  std::size_t max_steps = 0;
};

struct BackendHyper {
  NeuralHyper neural;
};

/// Trains a built-in backend (Count or Neural) on the pairs.
std::unique_ptr<InfillBackend> backend_train(BackendKind kind, std::shared_ptr<const Vocab> vocab,
                                             const std::vector<TrainingPair>& pairs, const BackendHyper& hyper,
                                             std::uint64_t seed);

/// Model document of a built-in backend.
nlohmann::json backend_to_json(const InfillBackend& backend);
/// Restores a Count or Neural backend, dispatching on the format tag.
std::unique_ptr<InfillBackend> backend_from_json(const nlohmann::json& doc);

/// Shared checks for generate(): option validity and variant kind.
void check_generate_args(const InfillBackend& backend, const MaskedVariant& variant, const GenOptions& opts);

}  // namespace restyle
