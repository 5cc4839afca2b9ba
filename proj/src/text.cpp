#include "restyle/text.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "restyle/error.hpp"

namespace restyle {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool valid_label_name(std::string_view name) {
  if (name.empty()) return false;
  return std::none_of(name.begin(), name.end(),
                      [](char c) { return is_space(c) || c == '<' || c == '>'; });
}

}  // namespace

bool is_reserved_spelling(std::string_view token) {
  if (token == kMaskToken || token == kUnkToken) return true;
  return token.size() > kControlPrefix.size() && token.starts_with(kControlPrefix) &&
         token.back() == '>';
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i == start) break;
    std::string tok(text.substr(start, i - start));
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (is_reserved_spelling(tok)) tok.insert(tok.begin(), '\\');
    out.tokens.push_back(std::move(tok));
  }
  return out;
}

std::string detokenize(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += seq[i];
  }
  return out;
}

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) throw std::invalid_argument("label set needs at least 2 labels");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!valid_label_name(names_[i]))
      throw std::invalid_argument("invalid label name '" + names_[i] + "'");
    for (std::size_t j = 0; j < i; ++j)
      if (names_[i] == names_[j]) throw std::invalid_argument("duplicate label '" + names_[i] + "'");
  }
}

const std::string& LabelSet::name(std::size_t index) const {
  if (index >= names_.size()) throw std::invalid_argument("unknown label index " + std::to_string(index));
  return names_[index];
}

std::optional<std::size_t> LabelSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

std::size_t LabelSet::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw std::invalid_argument("unknown label '" + std::string(name) + "'");
}

std::string control_token(const LabelSet& labels, std::size_t index) {
  return std::string(kControlPrefix) + labels.name(index) + ">";
}

LabeledExample LabeledExample::from_text(std::string text, std::optional<AttributeLabel> label) {
  LabeledExample ex;
  ex.seq = tokenize(text);
  ex.text = std::move(text);
  ex.label = std::move(label);
  return ex;
}

void Vocab::add(const std::string& token) {
  if (ids_.contains(token)) return;
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocab Vocab::from_tokens(const LabelSet& labels, const std::vector<std::string>& corpus_tokens) {
  Vocab v;
  v.labels_ = labels;
  v.add(std::string(kMaskToken));
  v.add(std::string(kUnkToken));
  for (std::size_t i = 0; i < labels.size(); ++i) v.add(control_token(labels, i));
  for (const auto& t : corpus_tokens) {
    if (is_reserved_spelling(t)) throw DataError("corpus token '" + t + "' collides with a reserved token");
    v.add(t);
  }
  return v;
}

Vocab Vocab::build(const std::vector<TokenSeq>& corpus, const LabelSet& labels) {
  if (corpus.empty()) throw DataError("empty corpus");
  std::vector<std::string> toks;
  for (const auto& seq : corpus) toks.insert(toks.end(), seq.begin(), seq.end());
  return from_tokens(labels, toks);
}

Vocab Vocab::build(const std::vector<LabeledExample>& corpus, const LabelSet& labels) {
  std::vector<TokenSeq> seqs;
  seqs.reserve(corpus.size());
  for (const auto& ex : corpus) seqs.push_back(ex.seq);
  return build(seqs, labels);
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw std::invalid_argument("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocab::control_id(std::size_t label) const {
  if (label >= labels_.size()) throw std::invalid_argument("unknown label index " + std::to_string(label));
  return static_cast<int>(2 + label);
}

std::vector<std::string> Vocab::corpus_tokens() const {
  return {tokens_.begin() + static_cast<std::ptrdiff_t>(reserved_count()), tokens_.end()};
}

}  // namespace restyle
