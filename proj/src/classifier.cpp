#include "restyle/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "restyle/error.hpp"
#include "restyle/persistence.hpp"

namespace restyle {

std::size_t AttributeClassifier::predict(const TokenSeq& seq) const {
  const auto p = predict_proba(seq);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

NaiveBayesClassifier NaiveBayesClassifier::train(const std::vector<LabeledExample>& corpus,
                                                 const LabelSet& labels, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("smoothing alpha must be positive");
  if (corpus.empty()) throw DataError("empty corpus");
  const std::size_t nl = labels.size();
  std::vector<double> docs(nl, 0.0), total(nl, 0.0);
  std::map<std::string, std::vector<double>> counts;
  for (const auto& ex : corpus) {
    if (!ex.label) throw DataError("training example without gold label: '" + ex.text + "'");
    const std::size_t l = ex.label->index;
    if (l >= nl || labels.name(l) != ex.label->name)
      throw DataError("example label '" + ex.label->name + "' not in label set");
    docs[l] += 1.0;
    for (const auto& tok : ex.seq) {
      auto& row = counts[tok];
      if (row.empty()) row.assign(nl, 0.0);
      row[l] += 1.0;
      total[l] += 1.0;
    }
  }
  for (std::size_t l = 0; l < nl; ++l)
    if (docs[l] == 0.0) throw DataError("unrepresented label '" + labels.name(l) + "'");

  NaiveBayesClassifier m;
  m.labels_ = labels;
  m.alpha_ = alpha;
  const double v = static_cast<double>(counts.size());
  const double n = static_cast<double>(corpus.size());
  for (std::size_t l = 0; l < nl; ++l) {
    m.log_prior_.push_back(std::log(docs[l] / n));
    m.log_unseen_.push_back(std::log(alpha / (total[l] + alpha * v)));
  }
  for (auto& [tok, row] : counts) {
    std::vector<double> ll(nl);
    for (std::size_t l = 0; l < nl; ++l) ll[l] = std::log((row[l] + alpha) / (total[l] + alpha * v));
    m.log_likelihood_.emplace(tok, std::move(ll));
  }
  return m;
}

double NaiveBayesClassifier::log_likelihood(std::size_t label, const std::string& token) const {
  auto it = log_likelihood_.find(token);
  return it == log_likelihood_.end() ? log_unseen_[label] : it->second[label];
}

double NaiveBayesClassifier::prior(std::size_t label) const { return std::exp(log_prior_.at(label)); }

double NaiveBayesClassifier::likelihood(std::size_t label, const std::string& token) const {
  if (label >= labels_.size()) throw std::invalid_argument("unknown label index");
  return std::exp(log_likelihood(label, token));
}

std::vector<double> NaiveBayesClassifier::predict_proba(const TokenSeq& seq) const {
  const std::size_t nl = labels_.size();
  std::vector<double> score = log_prior_;
  for (const auto& tok : seq) {
    auto it = log_likelihood_.find(tok);
    const auto& ll = it == log_likelihood_.end() ? log_unseen_ : it->second;
    for (std::size_t l = 0; l < nl; ++l) score[l] += ll[l];
  }
  const double mx = *std::max_element(score.begin(), score.end());
  double z = 0.0;
  for (auto& s : score) {
    s = std::exp(s - mx);
    z += s;
  }
  for (auto& s : score) s /= z;
  return score;
}

nlohmann::json NaiveBayesClassifier::to_json() const {
  nlohmann::json tokens = nlohmann::json::object();
  for (const auto& [tok, ll] : log_likelihood_) tokens[tok] = ll;
  return {{"format", format_tag(ModelFormat::Classifier)},
          {"labels", labels_.names()},
          {"alpha", alpha_},
          {"log_prior", log_prior_},
          {"log_unseen", log_unseen_},
          {"log_likelihood", tokens}};
}

NaiveBayesClassifier NaiveBayesClassifier::from_json(const nlohmann::json& doc) {
  check_format(doc, ModelFormat::Classifier);
  try {
    NaiveBayesClassifier m;
    m.labels_ = LabelSet(doc.at("labels").get<std::vector<std::string>>());
    m.alpha_ = doc.at("alpha").get<double>();
    m.log_prior_ = doc.at("log_prior").get<std::vector<double>>();
    m.log_unseen_ = doc.at("log_unseen").get<std::vector<double>>();
    const std::size_t nl = m.labels_.size();
    if (!(m.alpha_ > 0.0) || m.log_prior_.size() != nl || m.log_unseen_.size() != nl)
      throw DataError("classifier document is inconsistent");
    for (const auto& [tok, ll] : doc.at("log_likelihood").items()) {
      auto row = ll.get<std::vector<double>>();
      if (row.size() != nl) throw DataError("classifier likelihood row for '" + tok + "' has wrong size");
      for (double x : row)
        if (!std::isfinite(x)) throw DataError("non-finite likelihood for '" + tok + "'");
      m.log_likelihood_.emplace(tok, std::move(row));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed classifier document: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("malformed classifier document: ") + e.what());
  }
}

}  // namespace restyle
