#include "restyle/count_backend.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "restyle/error.hpp"
#include "restyle/persistence.hpp"
#include "restyle/rng.hpp"
#include "sampling.hpp"

namespace restyle {

namespace {

template <class Key, class Map>
std::vector<std::pair<Key, double>> normalized(const Map& counts) {
  double total = 0.0;
  for (const auto& [k, c] : counts) total += static_cast<double>(c);
  std::vector<std::pair<Key, double>> out;
  out.reserve(counts.size());
  for (const auto& [k, c] : counts) out.emplace_back(k, static_cast<double>(c) / total);
  return out;
}

}  // namespace

CountBackend CountBackend::train(std::shared_ptr<const Vocab> vocab, const std::vector<TrainingPair>& pairs) {
  if (!vocab) throw std::invalid_argument("count backend needs a vocabulary");
  if (pairs.empty()) throw DataError("no training pairs");
  CountBackend m;
  m.vocab_ = std::move(vocab);
  const std::size_t nl = m.vocab_->labels().size();
  m.bigram_.resize(nl);
  m.unigram_.resize(nl);
  m.lengths_.resize(nl);
  for (const auto& pair : pairs) {
    if (pair.variant.kind != MaskMode::Hard)
      throw std::invalid_argument("count backend accepts hard-masked variants only");
    if (pair.control >= nl) throw std::invalid_argument("training pair control outside the label set");
    const auto& src = pair.source();
    const auto& pos = pair.variant.masked_positions;
    std::size_t i = 0;
    while (i < pos.size()) {
      std::size_t j = i;
      while (j + 1 < pos.size() && pos[j + 1] == pos[j] + 1) ++j;
      const std::size_t start = pos[i], len = j - i + 1;
      ++m.lengths_[pair.control][len];
      ++m.global_lengths_[len];
      m.longest_span_ = std::max(m.longest_span_, len);
      int prev = start == 0 ? kStartContext : m.vocab_->id(src[start - 1]);
      for (std::size_t p = start; p < start + len; ++p) {
        const int tok = m.vocab_->id(src[p]);
        if (!m.vocab_->is_reserved(tok)) {
          ++m.bigram_[pair.control][prev][tok];
          ++m.global_bigram_[prev][tok];
          ++m.unigram_[pair.control][tok];
          ++m.global_unigram_[tok];
        }
        prev = tok;
      }
      const int right = start + len < src.size() ? m.vocab_->id(src[start + len]) : kEndOutcome;
      if (!m.vocab_->is_reserved(right) && !m.vocab_->is_reserved(prev)) {
        ++m.bigram_[pair.control][prev][right];
        ++m.global_bigram_[prev][right];
      }
      i = j + 1;
    }
  }
  if (m.global_unigram_.empty()) throw DataError("training pairs contain no masked tokens");
  return m;
}

std::vector<std::pair<int, double>> CountBackend::continuation(std::size_t label, int prev) const {
  if (label >= bigram_.size()) throw std::invalid_argument("unknown control label");
  if (auto it = bigram_[label].find(prev); it != bigram_[label].end()) return normalized<int>(it->second);
  if (auto it = global_bigram_.find(prev); it != global_bigram_.end()) return normalized<int>(it->second);
  if (!unigram_[label].empty()) return normalized<int>(unigram_[label]);
  return normalized<int>(global_unigram_);
}

std::vector<std::pair<std::size_t, double>> CountBackend::span_lengths(std::size_t label) const {
  if (label >= lengths_.size()) throw std::invalid_argument("unknown control label");
  return normalized<std::size_t>(lengths_[label].empty() ? global_lengths_ : lengths_[label]);
}

namespace {

/// p^(1/T), renormalized.
template <class Key>
std::vector<std::pair<Key, double>> tempered(std::vector<std::pair<Key, double>> dist, double temperature) {
  if (temperature == 1.0) return dist;
  double top = 0.0, total = 0.0;
  for (const auto& [k, p] : dist) top = std::max(top, p);
  for (auto& [k, p] : dist) {
    p = p > 0.0 ? std::exp((std::log(p) - std::log(top)) / temperature) : 0.0;
    total += p;
  }
  for (auto& [k, p] : dist) p /= total;
  return dist;
}

}  // namespace

// Exact sampling from P(length, span | left, right) where the chain must end
// in a transition to `right`: beta[m][t] is the mass of emitting m more
// tokens after t and then stepping into `right`. When `right` is unknown, or
// no chain can reach it, the span is drawn left to right without it.
void CountBackend::fill_span(std::size_t control, int left, int right, const GenOptions& opts, Rng& rng,
                             TokenSeq& out) const {
  const std::size_t cap = std::min(2 * longest_span_, opts.max_len);
  if (cap == 0) return;
  std::map<std::size_t, double> clamped;
  for (const auto& [len, p] : span_lengths(control)) clamped[std::min(len, cap)] += p;
  const std::vector<std::pair<std::size_t, double>> prior =
      tempered(std::vector<std::pair<std::size_t, double>>(clamped.begin(), clamped.end()), opts.temperature);
  auto lengths = prior;
  const std::size_t longest = lengths.back().first;

  std::map<int, Dist> rows;
  auto row = [&](int prev) -> const Dist& {
    auto it = rows.find(prev);
    if (it == rows.end()) it = rows.emplace(prev, tempered(continuation(control, prev), opts.temperature)).first;
    return it->second;
  };

  const std::size_t nv = vocab_->size();
  std::vector<std::vector<double>> beta;
  if (right == kEndOutcome || (right >= 0 && !vocab_->is_reserved(right))) {
    beta.assign(longest, std::vector<double>(nv, 0.0));
    for (std::size_t t = 0; t < nv; ++t) {
      if (vocab_->is_reserved(static_cast<int>(t))) continue;
      for (const auto& [u, p] : row(static_cast<int>(t)))
        if (u == right) beta[0][t] = p;
    }
    for (std::size_t m = 1; m < longest; ++m)
      for (std::size_t t = 0; t < nv; ++t) {
        if (vocab_->is_reserved(static_cast<int>(t))) continue;
        double acc = 0.0;
        for (const auto& [u, p] : row(static_cast<int>(t)))
          if (u >= 0) acc += p * beta[m - 1][static_cast<std::size_t>(u)];
        beta[m][t] = acc;
      }
    double reach = 0.0;
    for (auto& [len, p] : lengths) {
      double z = 0.0;
      for (const auto& [u, q] : row(left))
        if (u >= 0) z += q * beta[len - 1][static_cast<std::size_t>(u)];
      p *= z;
      reach += p;
    }
    if (reach > 0.0) {
      for (auto& [len, p] : lengths) p /= reach;
    } else {
      beta.clear();
      lengths = prior;
    }
  }

  const std::size_t len = detail::draw(lengths, 1.0, opts.mode, rng);
  int prev = left;
  for (std::size_t k = 1; k <= len; ++k) {
    Dist dist;
    double total = 0.0;
    for (const auto& [u, p] : row(prev)) {
      if (u < 0) continue;
      const double w = beta.empty() ? p : p * beta[len - k][static_cast<std::size_t>(u)];
      if (w > 0.0) {
        dist.emplace_back(u, w);
        total += w;
      }
    }
    if (dist.empty()) {
      dist = tempered(normalized<int>(unigram_[control].empty() ? global_unigram_ : unigram_[control]),
                      opts.temperature);
      total = 1.0;
    }
    for (auto& [u, p] : dist) p /= total;
    prev = detail::draw(dist, 1.0, opts.mode, rng);
    out.tokens.push_back(vocab_->token(prev));
  }
}

std::vector<TokenSeq> CountBackend::generate(const MaskedVariant& variant, std::size_t control,
                                             const GenOptions& opts) const {
  check_generate_args(*this, variant, opts);
  if (control >= bigram_.size()) throw std::invalid_argument("unknown control label");
  const auto& toks = variant.hard_tokens;
  std::vector<TokenSeq> out;
  out.reserve(opts.n);
  for (std::size_t s = 0; s < opts.n; ++s) {
    Rng rng(mix(opts.seed, s));
    TokenSeq seq;
    int prev = kStartContext;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (toks[i] != kMaskToken) {
        seq.tokens.push_back(toks[i]);
        prev = vocab_->id(toks[i]);
        continue;
      }
      const int right = i + 1 < toks.size() ? vocab_->id(toks[i + 1]) : kEndOutcome;
      fill_span(control, prev, right, opts, rng, seq);
      if (!seq.empty()) prev = vocab_->id(seq.tokens.back());
    }
    out.push_back(std::move(seq));
  }
  return out;
}

nlohmann::json CountBackend::to_json() const {
  auto counts_json = [](const Counts& c) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& [k, v] : c) o[std::to_string(k)] = v;
    return o;
  };
  nlohmann::json bigram = nlohmann::json::array(), unigram = nlohmann::json::array(),
                 lengths = nlohmann::json::array();
  for (std::size_t l = 0; l < bigram_.size(); ++l) {
    nlohmann::json rows = nlohmann::json::object();
    for (const auto& [ctx, c] : bigram_[l]) rows[std::to_string(ctx)] = counts_json(c);
    bigram.push_back(rows);
    unigram.push_back(counts_json(unigram_[l]));
    nlohmann::json h = nlohmann::json::object();
    for (const auto& [len, c] : lengths_[l]) h[std::to_string(len)] = c;
    lengths.push_back(h);
  }
  return {{"format", format_tag(ModelFormat::CountBackend)},
          {"labels", vocab_->labels().names()},
          {"tokens", vocab_->corpus_tokens()},
          {"bigram", bigram},
          {"unigram", unigram},
          {"lengths", lengths}};
}

CountBackend CountBackend::from_json(const nlohmann::json& doc) {
  check_format(doc, ModelFormat::CountBackend);
  try {
    CountBackend m;
    m.vocab_ = std::make_shared<const Vocab>(
        Vocab::from_tokens(LabelSet(doc.at("labels").get<std::vector<std::string>>()),
                           doc.at("tokens").get<std::vector<std::string>>()));
    const std::size_t nl = m.vocab_->labels().size();
    const auto& bigram = doc.at("bigram");
    const auto& unigram = doc.at("unigram");
    const auto& lengths = doc.at("lengths");
    if (bigram.size() != nl || unigram.size() != nl || lengths.size() != nl)
      throw DataError("count backend tables do not match the label set");
    const int vocab_size = static_cast<int>(m.vocab_->size());
    auto token_id = [&](const std::string& key, bool allow_start) {
      const int id = std::stoi(key);
      if ((id == (allow_start ? kStartContext : kEndOutcome)) || (id >= 0 && id < vocab_size)) return id;
      throw DataError("count backend token id out of range: " + key);
    };
    m.bigram_.resize(nl);
    m.unigram_.resize(nl);
    m.lengths_.resize(nl);
    for (std::size_t l = 0; l < nl; ++l) {
      for (const auto& [ctx, row] : bigram[l].items())
        for (const auto& [tok, c] : row.items()) {
          const int from = token_id(ctx, true), to = token_id(tok, false);
          m.bigram_[l][from][to] = c.get<std::uint64_t>();
          m.global_bigram_[from][to] += c.get<std::uint64_t>();
        }
      for (const auto& [tok, c] : unigram[l].items()) {
        const auto n = c.get<std::uint64_t>();
        m.unigram_[l][token_id(tok, false)] = n;
        m.global_unigram_[token_id(tok, false)] += n;
      }
      for (const auto& [len, c] : lengths[l].items()) {
        const auto k = static_cast<std::size_t>(std::stoul(len));
        if (k == 0) throw DataError("zero span length in count backend");
        m.lengths_[l][k] = c.get<std::uint64_t>();
        m.global_lengths_[k] += c.get<std::uint64_t>();
        m.longest_span_ = std::max(m.longest_span_, k);
      }
    }
    if (m.global_unigram_.empty() || m.global_lengths_.empty()) throw DataError("count backend has no counts");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed count backend document: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("malformed count backend document: ") + e.what());
  }
}

}  // namespace restyle
