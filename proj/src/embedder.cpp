#include "restyle/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "restyle/error.hpp"
#include "restyle/persistence.hpp"

namespace restyle {

TfIdfEmbedder::TfIdfEmbedder(std::map<std::string, double> idf, std::size_t documents)
    : idf_(std::move(idf)), documents_(documents) {
  if (documents_ == 0) throw std::invalid_argument("embedder needs at least one document");
  for (const auto& [tok, w] : idf_)
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("idf must be finite and >= 0 ('" + tok + "')");
  unseen_idf_ = std::log(1.0 + static_cast<double>(documents_)) + 1.0;
}

TfIdfEmbedder TfIdfEmbedder::fit(const std::vector<TokenSeq>& corpus) {
  if (corpus.empty()) throw DataError("empty corpus");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    std::set<std::string> seen(doc.begin(), doc.end());
    for (const auto& t : seen) ++df[t];
  }
  const double n = static_cast<double>(corpus.size());
  std::map<std::string, double> idf;
  for (const auto& [tok, d] : df) idf.emplace(tok, std::log((1.0 + n) / (1.0 + static_cast<double>(d))) + 1.0);
  return TfIdfEmbedder(std::move(idf), corpus.size());
}

TfIdfEmbedder TfIdfEmbedder::fit(const std::vector<LabeledExample>& corpus) {
  std::vector<TokenSeq> seqs;
  seqs.reserve(corpus.size());
  for (const auto& ex : corpus) seqs.push_back(ex.seq);
  return fit(seqs);
}

double TfIdfEmbedder::idf(const std::string& token) const {
  auto it = idf_.find(token);
  return it == idf_.end() ? unseen_idf_ : it->second;
}

std::map<std::string, double> TfIdfEmbedder::embed(const TokenSeq& seq) const {
  std::map<std::string, double> tf;
  for (const auto& t : seq) tf[t] += 1.0;
  for (auto& [tok, w] : tf) w *= idf(tok);
  return tf;
}

double TfIdfEmbedder::similarity(const TokenSeq& a, const TokenSeq& b) const {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const auto va = embed(a);
  const auto vb = embed(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, w] : va) {
    na += w * w;
    if (auto it = vb.find(tok); it != vb.end()) dot += w * it->second;
  }
  for (const auto& [tok, w] : vb) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  // sqrt(x*x) == x in IEEE arithmetic, so identical bags give exactly 1.
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw BackendError("embedding dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

nlohmann::json TfIdfEmbedder::to_json() const {
  return {{"format", format_tag(ModelFormat::Embedder)}, {"documents", documents_}, {"idf", idf_}};
}

TfIdfEmbedder TfIdfEmbedder::from_json(const nlohmann::json& doc) {
  check_format(doc, ModelFormat::Embedder);
  try {
    return TfIdfEmbedder(doc.at("idf").get<std::map<std::string, double>>(),
                         doc.at("documents").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed embedder document: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("malformed embedder document: ") + e.what());
  }
}

}  // namespace restyle
