#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "json.hpp"

#include "restyle/backend.hpp"

namespace restyle {

/// Dense parameters: token embeddings over the whole vocabulary (sentinels
/// and control tokens included), an output projection and bias over the
/// corpus tokens only.
struct NeuralParams {
  std::size_t vocab = 0;
  std::size_t outputs = 0;
  std::size_t dim = 0;
  std::vector<double> embed;  // vocab x dim
  std::vector<double> proj;   // outputs x dim
  std::vector<double> bias;   // outputs

  static NeuralParams zeros(std::size_t vocab, std::size_t outputs, std::size_t dim);

  std::size_t count() const { return embed.size() + proj.size() + bias.size(); }
  /// Flat view in the order embed, proj, bias.
  double& at(std::size_t flat);
  double at(std::size_t flat) const;
  const double* embed_row(int id) const { return embed.data() + static_cast<std::size_t>(id) * dim; }
  bool all_finite() const;
};

/// Infill predicts masked positions from their neighbours; Rewrite predicts
/// every position of an unmasked input (the distilled student).
enum class NeuralMode { Infill, Rewrite };

struct RewritePair {
  std::size_t control = 0;
  TokenSeq input;
  TokenSeq output;  // same length as input
};

/// Window model. For position i the context feature is
///   h_i = mean_{j in window(i), j != i} x_j + E[control]   (Infill)
///   h_i = x_i + mean_{j in window(i), j != i} x_j + E[control]   (Rewrite)
///   x_j = (1 - w_j) E[token_j] + w_j E[<mask>],
/// where the window is [i-c, i+c] clipped to the sentence. Logits are
/// proj * h_i + bias; positions are independent.
class NeuralBackend final : public InfillBackend {
 public:
  struct LossAndGrad {
    double loss = 0.0;
    NeuralParams grad;
  };

  /// Parameters uniform in (-init_scale, init_scale), drawn in flat order
  /// from Rng(seed).
  static NeuralBackend initialize(std::shared_ptr<const Vocab> vocab, const NeuralHyper& hyper, std::uint64_t seed,
                                  NeuralMode mode = NeuralMode::Infill);
  /// Plain SGD, one pair per step, learning rate lr / sqrt(step), pair
  /// order reshuffled every epoch. Hard variants count as weight-1 masks.
  static NeuralBackend train(std::shared_ptr<const Vocab> vocab, const std::vector<TrainingPair>& pairs,
                             const NeuralHyper& hyper, std::uint64_t seed);
  static NeuralBackend train_rewrite(std::shared_ptr<const Vocab> vocab, const std::vector<RewritePair>& pairs,
                                     const NeuralHyper& hyper, std::uint64_t seed);

  BackendKind kind() const override { return BackendKind::Neural; }
  bool supports(MaskMode) const override { return mode_ == NeuralMode::Infill; }
  std::vector<TokenSeq> generate(const MaskedVariant& variant, std::size_t control,
                                 const GenOptions& opts) const override;
  /// Student decoding: every position is re-predicted from the input.
  std::vector<TokenSeq> rewrite(const TokenSeq& input, std::size_t control, const GenOptions& opts) const;

  /// Mean cross-entropy over masked positions and its exact gradient.
  LossAndGrad forward_backward(const TrainingPair& pair) const;
  LossAndGrad forward_backward(const RewritePair& pair) const;
  double loss(const TrainingPair& pair) const;

  /// Logits at `position` for tokens blended with per-token `weights`.
  std::vector<double> logits(const TokenSeq& tokens, const std::vector<double>& weights, std::size_t control,
                             std::size_t position) const;

  NeuralMode mode() const { return mode_; }
  const NeuralHyper& hyper() const { return hyper_; }
  const Vocab& vocab() const { return *vocab_; }
  const NeuralParams& params() const { return params_; }
  NeuralParams& mutable_params() { return params_; }

  nlohmann::json to_json() const;
  static NeuralBackend from_json(const nlohmann::json& doc);

 private:
  struct Encoded {
    std::vector<int> ids;
    std::vector<double> weights;
    std::vector<std::size_t> supervised;
    std::vector<int> targets;  // output class per supervised position
    int control_id = 0;
  };

  Encoded encode(const TokenSeq& tokens, const std::vector<double>& weights, std::size_t control) const;
  Encoded encode(const TrainingPair& pair) const;
  Encoded encode(const RewritePair& pair) const;
  void context(const Encoded& ex, std::size_t pos, std::vector<double>& h) const;
  void scores(const std::vector<double>& h, std::vector<double>& z) const;
  LossAndGrad run(const Encoded& ex) const;
  TokenSeq decode(const Encoded& ex, const TokenSeq& base, DecodeMode mode, double temperature,
                  std::uint64_t seed) const;
  template <class Pair>
  static NeuralBackend fit(std::shared_ptr<const Vocab> vocab, const std::vector<Pair>& pairs,
                           const NeuralHyper& hyper, std::uint64_t seed, NeuralMode mode);

  std::shared_ptr<const Vocab> vocab_;
  NeuralHyper hyper_;
  NeuralMode mode_ = NeuralMode::Infill;
  NeuralParams params_;
};

}  // namespace restyle
