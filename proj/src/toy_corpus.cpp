#include "restyle/toy_corpus.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "restyle/error.hpp"
#include "restyle/rng.hpp"

namespace restyle {

namespace {

TokenSeq fill(const std::string& tmpl, const std::string& word) {
  TokenSeq seq;
  for (const auto& t : tokenize(tmpl)) seq.tokens.push_back(t == "slot" ? word : t);
  return seq;
}

}  // namespace

void ToyCorpusSpec::validate() const {
  if (templates.empty()) throw std::invalid_argument("toy corpus needs at least one template");
  const LabelSet ls(label_names);
  if (lexicons.size() != ls.size()) throw std::invalid_argument("one lexicon per label is required");
  std::set<std::string> seen;
  for (const auto& lex : lexicons) {
    if (lex.empty()) throw std::invalid_argument("toy lexicons must be non-empty");
    for (const auto& w : lex) {
      const auto toks = tokenize(w);
      if (toks.size() != 1 || toks[0] != w) throw std::invalid_argument("lexicon word '" + w + "' is not one token");
      if (!seen.insert(w).second) throw std::invalid_argument("lexicons overlap on '" + w + "'");
    }
  }
  for (const auto& t : templates) {
    std::size_t slots = 0;
    for (const auto& raw : tokenize(t)) {
      if (raw == "slot") ++slots;
      else if (seen.count(raw)) throw std::invalid_argument("template '" + t + "' contains lexicon word '" + raw + "'");
    }
    if (slots != 1) throw std::invalid_argument("template '" + t + "' must contain exactly one SLOT");
  }
  if (train_per_template == 0) throw std::invalid_argument("train_per_template must be at least 1");
}

LabelSet ToyCorpusSpec::labels() const { return LabelSet(label_names); }

ToyCorpusSpec ToyCorpusSpec::standard() {
  ToyCorpusSpec spec;
  spec.templates = {"the food was SLOT .", "our waiter was really SLOT tonight", "the SLOT pasta came out quickly",
                    "i thought the service was SLOT"};
  spec.label_names = {"neg", "pos"};
  spec.lexicons = {{"awful", "bland", "rude", "terrible", "disgusting", "horrible"},
                   {"great", "delicious", "friendly", "amazing", "excellent", "wonderful"}};
  spec.train_per_template = 25;
  spec.test_per_label = 25;
  spec.seed = 7;
  return spec;
}

nlohmann::json ToyCorpusSpec::to_json() const {
  return {{"templates", templates}, {"labels", label_names},         {"lexicons", lexicons},
          {"train_per_template", train_per_template}, {"test_per_label", test_per_label}, {"seed", seed}};
}

ToyCorpusSpec ToyCorpusSpec::from_json(const nlohmann::json& doc) {
  ToyCorpusSpec spec = standard();
  try {
    if (doc.contains("templates")) spec.templates = doc["templates"].get<std::vector<std::string>>();
    if (doc.contains("labels")) spec.label_names = doc["labels"].get<std::vector<std::string>>();
    if (doc.contains("lexicons")) spec.lexicons = doc["lexicons"].get<std::vector<std::vector<std::string>>>();
    if (doc.contains("train_per_template")) spec.train_per_template = doc["train_per_template"].get<std::size_t>();
    if (doc.contains("test_per_label")) spec.test_per_label = doc["test_per_label"].get<std::size_t>();
    if (doc.contains("seed")) spec.seed = doc["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed toy corpus spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ToyCorpus gen_toy_corpus(const ToyCorpusSpec& spec) {
  spec.validate();
  const LabelSet labels = spec.labels();
  Rng rng(spec.seed);
  ToyCorpus out;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    const auto& lex = spec.lexicons[l];
    for (std::size_t t = 0; t < spec.templates.size(); ++t)
      for (std::size_t j = 0; j < spec.train_per_template; ++j) {
        const auto seq = fill(spec.templates[t], lex[(j + t) % lex.size()]);
        out.train.push_back(LabeledExample::from_text(detokenize(seq), labels.label(l)));
      }
  }
  for (std::size_t i = out.train.size(); i > 1; --i) std::swap(out.train[i - 1], out.train[rng.below(i)]);

  for (std::size_t i = 0; i < spec.test_per_label; ++i)
    for (std::size_t l = 0; l < labels.size(); ++l) {
      const auto& tmpl = spec.templates[(i * labels.size() + l) % spec.templates.size()];
      const auto& lex = spec.lexicons[l];
      TestItem item;
      item.source = fill(tmpl, lex[rng.below(lex.size())]);
      item.source_label = l;
      std::size_t target = rng.below(labels.size() - 1);
      if (target >= l) ++target;
      item.target_label = target;
      const auto& tlex = spec.lexicons[target];
      item.reference = fill(tmpl, tlex[rng.below(tlex.size())]);
      out.test.push_back(std::move(item));
    }
  return out;
}

std::vector<TokenSeq> slot_swap_oracle(const ToyCorpusSpec& spec, const TokenSeq& source, std::size_t target) {
  if (target >= spec.lexicons.size()) throw std::invalid_argument("target label outside the toy label set");
  std::vector<TokenSeq> out;
  for (std::size_t pos = 0; pos < source.size(); ++pos) {
    const bool slot_word = std::any_of(spec.lexicons.begin(), spec.lexicons.end(), [&](const auto& lex) {
      return std::find(lex.begin(), lex.end(), source[pos]) != lex.end();
    });
    if (!slot_word) continue;
    for (const auto& w : spec.lexicons[target]) {
      TokenSeq swapped = source;
      swapped.tokens[pos] = w;
      out.push_back(std::move(swapped));
    }
    break;
  }
  return out;
}

}  // namespace restyle
