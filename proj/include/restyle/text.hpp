#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace restyle {

inline constexpr std::string_view kMaskToken = "<mask>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kControlPrefix = "<attr:";

/// A tokenized sentence. Tokens are lowercased, non-empty and free of
/// whitespace.
struct TokenSeq {
  std::vector<std::string> tokens;

  TokenSeq() = default;
  TokenSeq(std::initializer_list<std::string> init) : tokens(init) {}
  explicit TokenSeq(std::vector<std::string> toks) : tokens(std::move(toks)) {}

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens[i]; }
  auto begin() const { return tokens.begin(); }
  auto end() const { return tokens.end(); }

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

/// Lowercases and splits on whitespace runs. Raw tokens that spell a
/// reserved token ("<mask>", "<unk>", "<attr:...>") are escaped with a
/// leading backslash, so corpus text can never produce a sentinel.
TokenSeq tokenize(std::string_view text);

std::string detokenize(const TokenSeq& seq);

bool is_reserved_spelling(std::string_view token);

struct AttributeLabel {
  std::string name;
  std::size_t index = 0;

  friend bool operator==(const AttributeLabel&, const AttributeLabel&) = default;
};

/// Ordered set of attribute names; a label's index is its position.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t index) const;
  std::size_t index_of(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;
  AttributeLabel label(std::size_t index) const { return {name(index), index}; }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
};

/// "<attr:NAME>" for the label at `index`.
std::string control_token(const LabelSet& labels, std::size_t index);

struct LabeledExample {
  std::string text;
  TokenSeq seq;
  std::optional<AttributeLabel> label;
  std::optional<AttributeLabel> predicted_label;

  static LabeledExample from_text(std::string text, std::optional<AttributeLabel> label = {});
};

class Vocab {
 public:
  static constexpr int kMaskId = 0;
  static constexpr int kUnkId = 1;

  /// Reserved ids first (mask, unk, one control per label), then corpus
  /// tokens in first-occurrence order.
  static Vocab build(const std::vector<LabeledExample>& corpus, const LabelSet& labels);
  static Vocab build(const std::vector<TokenSeq>& corpus, const LabelSet& labels);
  static Vocab from_tokens(const LabelSet& labels, const std::vector<std::string>& corpus_tokens);

  std::size_t size() const { return tokens_.size(); }
  std::size_t reserved_count() const { return 2 + labels_.size(); }
  /// Unknown tokens map to kUnkId.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  int control_id(std::size_t label) const;
  bool is_reserved(int id) const { return id >= 0 && static_cast<std::size_t>(id) < reserved_count(); }
  const LabelSet& labels() const { return labels_; }
  /// Corpus tokens only, in id order.
  std::vector<std::string> corpus_tokens() const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.labels_ == b.labels_ && a.tokens_ == b.tokens_;
  }

 private:
  void add(const std::string& token);

  LabelSet labels_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace restyle
