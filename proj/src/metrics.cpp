#include "restyle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "restyle/error.hpp"
#include "restyle/parallel.hpp"
#include "restyle/persistence.hpp"

namespace restyle {

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const TokenSeq& seq, std::size_t n) {
  std::map<std::vector<std::string>, int> out;
  if (seq.size() < n) return out;
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    ++out[std::vector<std::string>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                   seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

}  // namespace

double bleu(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty()) return reference.empty() ? 100.0 : 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    double matches = 0.0, total = 0.0;
    for (const auto& [gram, c] : cand) {
      total += c;
      if (auto it = ref.find(gram); it != ref.end()) matches += std::min(c, it->second);
    }
    const double p = n == 1 ? matches / total : (matches + 1.0) / (total + 1.0);
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double log_bp = c < r ? 1.0 - r / c : 0.0;
  return 100.0 * std::exp(log_sum / 4.0 + log_bp);
}

double g_score(double accuracy, double semantic) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0) || !(semantic >= 0.0 && semantic <= 1.0))
    throw std::invalid_argument("g_score inputs must be in [0,1]");
  return std::sqrt(accuracy * semantic);
}

NgramLM NgramLM::from_counts(std::vector<std::string> tokens, std::map<int, std::map<int, double>> counts, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("unsmoothed LM forbidden");
  NgramLM lm;
  lm.k_ = k;
  lm.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < lm.tokens_.size(); ++i) {
    if (!lm.ids_.emplace(lm.tokens_[i], static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate LM token '" + lm.tokens_[i] + "'");
  }
  const int nt = static_cast<int>(lm.tokens_.size());
  auto valid_context = [&](int c) { return c == kStart || c == kUnknown || (c >= 0 && c < nt); };
  auto valid_next = [&](int c) { return c == kEnd || c == kUnknown || (c >= 0 && c < nt); };
  for (const auto& [ctx, row] : counts) {
    if (!valid_context(ctx)) throw std::invalid_argument("invalid LM context id");
    for (const auto& [next, c] : row) {
      if (!valid_next(next) || !(c >= 0.0)) throw std::invalid_argument("invalid LM count");
      lm.context_totals_[ctx] += c;
    }
  }
  lm.counts_ = std::move(counts);
  return lm;
}

NgramLM NgramLM::train(const std::vector<TokenSeq>& corpus, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("unsmoothed LM forbidden");
  if (corpus.empty()) throw DataError("empty corpus");
  std::vector<std::string> tokens;
  std::map<std::string, int> ids;
  for (const auto& s : corpus)
    for (const auto& t : s)
      if (ids.emplace(t, static_cast<int>(tokens.size())).second) tokens.push_back(t);
  std::map<int, std::map<int, double>> counts;
  for (const auto& s : corpus) {
    int prev = kStart;
    for (const auto& t : s) {
      const int cur = ids.at(t);
      counts[prev][cur] += 1.0;
      prev = cur;
    }
    counts[prev][kEnd] += 1.0;
  }
  return from_counts(std::move(tokens), std::move(counts), k);
}

int NgramLM::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnknown : it->second;
}

double NgramLM::prob(int context, int next) const {
  double c = 0.0, total = 0.0;
  if (auto row = counts_.find(context); row != counts_.end()) {
    total = context_totals_.at(context);
    if (auto it = row->second.find(next); it != row->second.end()) c = it->second;
  }
  return (c + k_) / (total + k_ * static_cast<double>(outcome_count()));
}

std::vector<double> NgramLM::conditional(int context) const {
  std::vector<double> out;
  out.reserve(outcome_count());
  for (int t = 0; t < static_cast<int>(tokens_.size()); ++t) out.push_back(prob(context, t));
  out.push_back(prob(context, kEnd));
  out.push_back(prob(context, kUnknown));
  return out;
}

double NgramLM::perplexity(const TokenSeq& seq) const {
  double nll = 0.0;
  int prev = kStart;
  for (const auto& t : seq) {
    const int cur = id(t);
    nll -= std::log(prob(prev, cur));
    prev = cur;
  }
  nll -= std::log(prob(prev, kEnd));
  return std::exp(nll / static_cast<double>(seq.size() + 1));
}

nlohmann::json NgramLM::to_json() const {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [ctx, row] : counts_) {
    nlohmann::json r = nlohmann::json::object();
    for (const auto& [next, c] : row) r[std::to_string(next)] = c;
    counts[std::to_string(ctx)] = r;
  }
  return {{"format", format_tag(ModelFormat::LanguageModel)},
          {"order", 2},
          {"k", k_},
          {"tokens", tokens_},
          {"counts", counts}};
}

NgramLM NgramLM::from_json(const nlohmann::json& doc) {
  check_format(doc, ModelFormat::LanguageModel);
  try {
    if (doc.at("order").get<int>() != 2) throw DataError("only order-2 language models are supported");
    std::map<int, std::map<int, double>> counts;
    for (const auto& [ctx, row] : doc.at("counts").items())
      for (const auto& [next, c] : row.items()) counts[std::stoi(ctx)][std::stoi(next)] = c.get<double>();
    return from_counts(doc.at("tokens").get<std::vector<std::string>>(), std::move(counts),
                       doc.at("k").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed language model document: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("malformed language model document: ") + e.what());
  }
}

void check_records(const std::vector<EvalRecord>& records, const LabelSet& labels, SemanticMode semantic_mode) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].target_label >= labels.size())
      throw DataError("record " + std::to_string(i) + " has a target label outside the label set");
    if (semantic_mode == SemanticMode::VsReference && !records[i].reference)
      throw DataError("record " + std::to_string(i) + " has no reference (semantic mode vs-reference)");
  }
}

EvalRow score_record(const EvalRecord& record, const AttributeClassifier& classifier,
                     const SimilarityModel& similarity, const NgramLM& lm, SemanticMode semantic_mode) {
  EvalRow row;
  row.acc_hit = classifier.predict(record.output) == record.target_label;
  const TokenSeq& anchor = semantic_mode == SemanticMode::VsReference ? *record.reference : record.source;
  row.semantic = similarity.similarity(record.output, anchor);
  row.bleu = bleu(record.output, record.source);
  row.perplexity = lm.perplexity(record.output);
  return row;
}

EvalReport aggregate(std::vector<EvalRow> rows, GMode g_mode) {
  EvalReport rep;
  rep.g_mode = g_mode;
  if (rows.empty()) throw DataError("no records to evaluate");
  double hits = 0.0, sem = 0.0, bl = 0.0, ppl = 0.0, g_sum = 0.0;
  for (const auto& r : rows) {
    const double acc = r.acc_hit ? 1.0 : 0.0;
    hits += acc;
    sem += r.semantic;
    bl += r.bleu;
    ppl += r.perplexity;
    g_sum += g_score(acc, r.semantic);
  }
  const double n = static_cast<double>(rows.size());
  rep.accuracy = hits / n;
  rep.semantic = sem / n;
  rep.s_bleu = bl / n;
  rep.fluency = ppl / n;
  rep.g = g_mode == GMode::Corpus ? g_score(rep.accuracy, std::min(1.0, rep.semantic)) : g_sum / n;
  rep.rows = std::move(rows);
  return rep;
}

EvalReport evaluate(const std::vector<EvalRecord>& records, const AttributeClassifier& classifier,
                    const SimilarityModel& similarity, const NgramLM& lm, GMode g_mode, SemanticMode semantic_mode,
                    int workers) {
  check_records(records, classifier.labels(), semantic_mode);
  std::vector<EvalRow> rows(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    rows[i] = score_record(records[i], classifier, similarity, lm, semantic_mode);
  });
  return aggregate(std::move(rows), g_mode);
}

std::string to_string(GMode mode) { return mode == GMode::Corpus ? "corpus" : "per-example"; }
std::string to_string(SemanticMode mode) { return mode == SemanticMode::VsReference ? "vs-reference" : "vs-source"; }

GMode parse_g_mode(const std::string& name) {
  if (name == "corpus") return GMode::Corpus;
  if (name == "per-example") return GMode::PerExample;
  throw std::invalid_argument("unknown g mode '" + name + "'");
}

SemanticMode parse_semantic_mode(const std::string& name) {
  if (name == "vs-reference") return SemanticMode::VsReference;
  if (name == "vs-source") return SemanticMode::VsSource;
  throw std::invalid_argument("unknown semantic mode '" + name + "'");
}

}  // namespace restyle
