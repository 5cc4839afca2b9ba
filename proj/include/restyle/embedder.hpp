#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "restyle/text.hpp"

namespace restyle {

/// Sentence similarity in [0, 1], used both to pick among candidates and
/// as the semantic-preservation metric.
class SimilarityModel {
 public:
  virtual ~SimilarityModel() = default;
  virtual double similarity(const TokenSeq& a, const TokenSeq& b) const = 0;
};

/// TF-IDF cosine with raw term counts and idf(t) = ln((1+N)/(1+df)) + 1.
class TfIdfEmbedder final : public SimilarityModel {
 public:
  TfIdfEmbedder(std::map<std::string, double> idf, std::size_t documents);

  static TfIdfEmbedder fit(const std::vector<TokenSeq>& corpus);
  static TfIdfEmbedder fit(const std::vector<LabeledExample>& corpus);

  double idf(const std::string& token) const;
  std::size_t documents() const { return documents_; }
  /// Sparse tf-idf vector keyed by token.
  std::map<std::string, double> embed(const TokenSeq& seq) const;

  /// Both empty -> 1, exactly one empty -> 0.
  double similarity(const TokenSeq& a, const TokenSeq& b) const override;

  nlohmann::json to_json() const;
  static TfIdfEmbedder from_json(const nlohmann::json& doc);

 private:
  std::map<std::string, double> idf_;
  std::size_t documents_;
  double unseen_idf_;
};

/// Clamped cosine between two dense vectors (for external embedders).
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace restyle
