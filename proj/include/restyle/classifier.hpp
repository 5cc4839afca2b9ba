#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "restyle/text.hpp"

namespace restyle {

/// Assigns label probabilities to a sentence. The classifier defines the
/// attribute: control labels for training, candidate filtering and the
/// accuracy metric all come from it.
class AttributeClassifier {
 public:
  virtual ~AttributeClassifier() = default;
  virtual const LabelSet& labels() const = 0;
  /// Probability vector indexed like labels(); sums to 1.
  virtual std::vector<double> predict_proba(const TokenSeq& seq) const = 0;

  /// Argmax of predict_proba, ties to the lowest label index.
  std::size_t predict(const TokenSeq& seq) const;
};

/// Multinomial naive Bayes with add-alpha smoothing.
class NaiveBayesClassifier final : public AttributeClassifier {
 public:
  /// Every example needs a gold label and every label at least one example.
  static NaiveBayesClassifier train(const std::vector<LabeledExample>& corpus, const LabelSet& labels,
                                    double alpha = 1.0);

  const LabelSet& labels() const override { return labels_; }
  std::vector<double> predict_proba(const TokenSeq& seq) const override;

  double alpha() const { return alpha_; }
  double prior(std::size_t label) const;
  /// P(token | label); unseen tokens get the add-alpha mass.
  double likelihood(std::size_t label, const std::string& token) const;
  std::size_t vocabulary_size() const { return log_likelihood_.size(); }

  nlohmann::json to_json() const;
  static NaiveBayesClassifier from_json(const nlohmann::json& doc);

 private:
  double log_likelihood(std::size_t label, const std::string& token) const;

  LabelSet labels_;
  double alpha_ = 1.0;
  std::vector<double> log_prior_;
  std::vector<double> log_unseen_;
  std::map<std::string, std::vector<double>> log_likelihood_;
};

}  // namespace restyle
