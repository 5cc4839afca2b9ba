#include "restyle/neural_backend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <type_traits>

#include "restyle/error.hpp"
#include "restyle/persistence.hpp"
#include "restyle/rng.hpp"
#include "sampling.hpp"

namespace restyle {

NeuralParams NeuralParams::zeros(std::size_t vocab, std::size_t outputs, std::size_t dim) {
  NeuralParams p;
  p.vocab = vocab;
  p.outputs = outputs;
  p.dim = dim;
  p.embed.assign(vocab * dim, 0.0);
  p.proj.assign(outputs * dim, 0.0);
  p.bias.assign(outputs, 0.0);
  return p;
}

double& NeuralParams::at(std::size_t flat) {
  if (flat < embed.size()) return embed[flat];
  flat -= embed.size();
  if (flat < proj.size()) return proj[flat];
  flat -= proj.size();
  return bias.at(flat);
}

double NeuralParams::at(std::size_t flat) const { return const_cast<NeuralParams*>(this)->at(flat); }

bool NeuralParams::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(embed) && finite(proj) && finite(bias);
}

namespace {

void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    total += v;
  }
  for (auto& v : z) v /= total;
}

void check_hyper(const NeuralHyper& h) {
  if (h.dim == 0) throw std::invalid_argument("neural dim must be positive");
  if (!(h.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(h.init_scale >= 0.0)) throw std::invalid_argument("init scale must be >= 0");
}

}  // namespace

NeuralBackend NeuralBackend::initialize(std::shared_ptr<const Vocab> vocab, const NeuralHyper& hyper,
                                        std::uint64_t seed, NeuralMode mode) {
  if (!vocab) throw std::invalid_argument("neural backend needs a vocabulary");
  check_hyper(hyper);
  const std::size_t outputs = vocab->size() - vocab->reserved_count();
  if (outputs == 0) throw DataError("vocabulary has no corpus tokens");
  NeuralBackend m;
  m.hyper_ = hyper;
  m.mode_ = mode;
  m.params_ = NeuralParams::zeros(vocab->size(), outputs, hyper.dim);
  m.vocab_ = std::move(vocab);
  Rng rng(seed);
  for (std::size_t i = 0; i < m.params_.count(); ++i)
    m.params_.at(i) = (2.0 * rng.uniform() - 1.0) * hyper.init_scale;
  return m;
}

NeuralBackend::Encoded NeuralBackend::encode(const TokenSeq& tokens, const std::vector<double>& weights,
                                             std::size_t control) const {
  if (weights.size() != tokens.size()) throw std::invalid_argument("one blend weight per token required");
  Encoded ex;
  ex.control_id = vocab_->control_id(control);
  ex.ids.reserve(tokens.size());
  for (const auto& t : tokens) ex.ids.push_back(vocab_->id(t));
  ex.weights = weights;
  return ex;
}

NeuralBackend::Encoded NeuralBackend::encode(const TrainingPair& pair) const {
  if (mode_ != NeuralMode::Infill) throw std::invalid_argument("masked pairs need an infill-mode model");
  Encoded ex = encode(pair.source(), pair.variant.blend_weights(), pair.control);
  const int reserved = static_cast<int>(vocab_->reserved_count());
  for (auto p : pair.variant.masked_positions) {
    const int id = ex.ids[p];
    if (id < reserved) continue;  // unknown tokens are never a target
    ex.supervised.push_back(p);
    ex.targets.push_back(id - reserved);
  }
  return ex;
}

NeuralBackend::Encoded NeuralBackend::encode(const RewritePair& pair) const {
  if (mode_ != NeuralMode::Rewrite) throw std::invalid_argument("rewrite pairs need a rewrite-mode model");
  if (pair.input.size() != pair.output.size()) throw DataError("rewrite pair lengths differ");
  Encoded ex = encode(pair.input, std::vector<double>(pair.input.size(), 0.0), pair.control);
  const int reserved = static_cast<int>(vocab_->reserved_count());
  for (std::size_t p = 0; p < pair.output.size(); ++p) {
    const int id = vocab_->id(pair.output[p]);
    if (id < reserved) continue;
    ex.supervised.push_back(p);
    ex.targets.push_back(id - reserved);
  }
  return ex;
}

void NeuralBackend::context(const Encoded& ex, std::size_t pos, std::vector<double>& h) const {
  const std::size_t d = params_.dim;
  const std::size_t n = ex.ids.size();
  const std::size_t c = hyper_.window;
  const std::size_t lo = pos >= c ? pos - c : 0;
  const std::size_t hi = std::min(n - 1, pos + c);
  const double* mask = params_.embed_row(Vocab::kMaskId);
  auto blended = [&](std::size_t j, double coef, std::vector<double>& acc) {
    const double w = ex.weights[j];
    const double* e = params_.embed_row(ex.ids[j]);
    for (std::size_t k = 0; k < d; ++k) acc[k] += coef * ((1.0 - w) * e[k] + w * mask[k]);
  };
  const double* ctrl = params_.embed_row(ex.control_id);
  h.assign(ctrl, ctrl + d);
  if (mode_ == NeuralMode::Rewrite) blended(pos, 1.0, h);
  const std::size_t count = hi - lo;
  if (count == 0) return;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t j = lo; j <= hi; ++j)
    if (j != pos) blended(j, inv, h);
}

void NeuralBackend::scores(const std::vector<double>& h, std::vector<double>& z) const {
  const std::size_t d = params_.dim;
  z.assign(params_.bias.begin(), params_.bias.end());
  for (std::size_t o = 0; o < params_.outputs; ++o) {
    const double* w = params_.proj.data() + o * d;
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) acc += w[k] * h[k];
    z[o] += acc;
  }
}

NeuralBackend::LossAndGrad NeuralBackend::run(const Encoded& ex) const {
  if (ex.supervised.empty()) throw DataError("no supervised positions");
  const std::size_t d = params_.dim;
  const std::size_t n = ex.ids.size();
  const std::size_t c = hyper_.window;
  const bool self = mode_ == NeuralMode::Rewrite;
  const double scale = 1.0 / static_cast<double>(ex.supervised.size());
  LossAndGrad out;
  out.grad = NeuralParams::zeros(params_.vocab, params_.outputs, d);
  auto& g = out.grad;
  std::vector<double> h, z, dh(d);
  for (std::size_t s = 0; s < ex.supervised.size(); ++s) {
    const std::size_t pos = ex.supervised[s];
    const int target = ex.targets[s];
    context(ex, pos, h);
    scores(h, z);
    softmax_inplace(z);
    out.loss -= std::log(z[static_cast<std::size_t>(target)]) * scale;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t o = 0; o < params_.outputs; ++o) {
      const double dz = (z[o] - (static_cast<int>(o) == target ? 1.0 : 0.0)) * scale;
      g.bias[o] += dz;
      double* gw = g.proj.data() + o * d;
      const double* w = params_.proj.data() + o * d;
      for (std::size_t k = 0; k < d; ++k) {
        gw[k] += dz * h[k];
        dh[k] += dz * w[k];
      }
    }
    double* gc = g.embed.data() + static_cast<std::size_t>(ex.control_id) * d;
    for (std::size_t k = 0; k < d; ++k) gc[k] += dh[k];
    double* gm = g.embed.data() + static_cast<std::size_t>(Vocab::kMaskId) * d;
    auto spread = [&](std::size_t j, double coef) {
      const double w = ex.weights[j];
      double* ge = g.embed.data() + static_cast<std::size_t>(ex.ids[j]) * d;
      for (std::size_t k = 0; k < d; ++k) {
        ge[k] += (1.0 - w) * coef * dh[k];
        gm[k] += w * coef * dh[k];
      }
    };
    if (self) spread(pos, 1.0);
    const std::size_t lo = pos >= c ? pos - c : 0;
    const std::size_t hi = std::min(n - 1, pos + c);
    if (hi == lo) continue;
    const double inv = 1.0 / static_cast<double>(hi - lo);
    for (std::size_t j = lo; j <= hi; ++j)
      if (j != pos) spread(j, inv);
  }
  return out;
}

NeuralBackend::LossAndGrad NeuralBackend::forward_backward(const TrainingPair& pair) const {
  return run(encode(pair));
}

NeuralBackend::LossAndGrad NeuralBackend::forward_backward(const RewritePair& pair) const {
  return run(encode(pair));
}

double NeuralBackend::loss(const TrainingPair& pair) const { return forward_backward(pair).loss; }

std::vector<double> NeuralBackend::logits(const TokenSeq& tokens, const std::vector<double>& weights,
                                          std::size_t control, std::size_t position) const {
  if (position >= tokens.size()) throw std::invalid_argument("position out of range");
  const Encoded ex = encode(tokens, weights, control);
  std::vector<double> h, z;
  context(ex, position, h);
  scores(h, z);
  return z;
}

template <class Pair>
NeuralBackend NeuralBackend::fit(std::shared_ptr<const Vocab> vocab, const std::vector<Pair>& pairs,
                                 const NeuralHyper& hyper, std::uint64_t seed, NeuralMode mode) {
  if (pairs.empty()) throw DataError("no training pairs");
  NeuralBackend m = initialize(std::move(vocab), hyper, seed, mode);
  std::vector<Encoded> data;
  data.reserve(pairs.size());
  for (const auto& p : pairs) {
    if constexpr (std::is_same_v<Pair, TrainingPair>) {
      if (p.control >= m.vocab_->labels().size()) throw std::invalid_argument("training pair control outside the label set");
    }
    Encoded ex = m.encode(p);
    if (!ex.supervised.empty()) data.push_back(std::move(ex));
  }
  if (data.empty()) throw DataError("no supervised positions in training pairs");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix(seed, 1));
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (auto idx : order) {
      if (hyper.max_steps && step >= hyper.max_steps) return m;
      ++step;
      const double lr = hyper.learning_rate / std::sqrt(static_cast<double>(step));
      const auto g = m.run(data[idx]).grad;
      for (std::size_t k = 0; k < g.embed.size(); ++k) m.params_.embed[k] -= lr * g.embed[k];
      for (std::size_t k = 0; k < g.proj.size(); ++k) m.params_.proj[k] -= lr * g.proj[k];
      for (std::size_t k = 0; k < g.bias.size(); ++k) m.params_.bias[k] -= lr * g.bias[k];
    }
  }
  return m;
}

NeuralBackend NeuralBackend::train(std::shared_ptr<const Vocab> vocab, const std::vector<TrainingPair>& pairs,
                                   const NeuralHyper& hyper, std::uint64_t seed) {
  return fit(std::move(vocab), pairs, hyper, seed, NeuralMode::Infill);
}

NeuralBackend NeuralBackend::train_rewrite(std::shared_ptr<const Vocab> vocab, const std::vector<RewritePair>& pairs,
                                           const NeuralHyper& hyper, std::uint64_t seed) {
  return fit(std::move(vocab), pairs, hyper, seed, NeuralMode::Rewrite);
}

TokenSeq NeuralBackend::decode(const Encoded& ex, const TokenSeq& base, DecodeMode mode, double temperature,
                               std::uint64_t seed) const {
  Rng rng(seed);
  TokenSeq out = base;
  std::vector<double> h, z;
  std::vector<std::pair<int, double>> dist(params_.outputs);
  const int reserved = static_cast<int>(vocab_->reserved_count());
  for (auto pos : ex.supervised) {
    context(ex, pos, h);
    scores(h, z);
    softmax_inplace(z);
    for (std::size_t o = 0; o < z.size(); ++o) dist[o] = {static_cast<int>(o), z[o]};
    out.tokens[pos] = vocab_->token(reserved + detail::draw(dist, temperature, mode, rng));
  }
  return out;
}

std::vector<TokenSeq> NeuralBackend::generate(const MaskedVariant& variant, std::size_t control,
                                              const GenOptions& opts) const {
  check_generate_args(*this, variant, opts);
  Encoded ex = encode(variant.source, variant.blend_weights(), control);
  ex.supervised = variant.masked_positions;
  std::vector<TokenSeq> out;
  out.reserve(opts.n);
  for (std::size_t s = 0; s < opts.n; ++s)
    out.push_back(decode(ex, variant.source, opts.mode, opts.temperature, mix(opts.seed, s)));
  return out;
}

std::vector<TokenSeq> NeuralBackend::rewrite(const TokenSeq& input, std::size_t control,
                                             const GenOptions& opts) const {
  if (mode_ != NeuralMode::Rewrite) throw std::invalid_argument("rewrite needs a rewrite-mode model");
  opts.validate();
  Encoded ex = encode(input, std::vector<double>(input.size(), 0.0), control);
  ex.supervised.resize(input.size());
  std::iota(ex.supervised.begin(), ex.supervised.end(), std::size_t{0});
  std::vector<TokenSeq> out;
  out.reserve(opts.n);
  for (std::size_t s = 0; s < opts.n; ++s)
    out.push_back(decode(ex, input, opts.mode, opts.temperature, mix(opts.seed, s)));
  return out;
}

nlohmann::json NeuralBackend::to_json() const {
  auto matrix = [](const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
    nlohmann::json m = nlohmann::json::array();
    for (std::size_t r = 0; r < rows; ++r)
      m.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                      flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
    return m;
  };
  return {{"format", format_tag(ModelFormat::NeuralBackend)},
          {"mode", mode_ == NeuralMode::Infill ? "infill" : "rewrite"},
          {"labels", vocab_->labels().names()},
          {"tokens", vocab_->corpus_tokens()},
          {"hyper",
           {{"dim", hyper_.dim},
            {"window", hyper_.window},
            {"learning_rate", hyper_.learning_rate},
            {"epochs", hyper_.epochs},
            {"init_scale", hyper_.init_scale}}},
          {"embed", matrix(params_.embed, params_.vocab, params_.dim)},
          {"proj", matrix(params_.proj, params_.outputs, params_.dim)},
          {"bias", params_.bias}};
}

NeuralBackend NeuralBackend::from_json(const nlohmann::json& doc) {
  check_format(doc, ModelFormat::NeuralBackend);
  try {
    NeuralBackend m;
    m.vocab_ = std::make_shared<const Vocab>(
        Vocab::from_tokens(LabelSet(doc.at("labels").get<std::vector<std::string>>()),
                           doc.at("tokens").get<std::vector<std::string>>()));
    const auto mode = doc.at("mode").get<std::string>();
    if (mode != "infill" && mode != "rewrite") throw DataError("unknown neural mode '" + mode + "'");
    m.mode_ = mode == "infill" ? NeuralMode::Infill : NeuralMode::Rewrite;
    const auto& h = doc.at("hyper");
    m.hyper_.dim = h.at("dim").get<std::size_t>();
    m.hyper_.window = h.at("window").get<std::size_t>();
    m.hyper_.learning_rate = h.at("learning_rate").get<double>();
    m.hyper_.epochs = h.at("epochs").get<std::size_t>();
    m.hyper_.init_scale = h.at("init_scale").get<double>();
    check_hyper(m.hyper_);
    const std::size_t outputs = m.vocab_->size() - m.vocab_->reserved_count();
    m.params_ = NeuralParams::zeros(m.vocab_->size(), outputs, m.hyper_.dim);
    auto fill = [&](const nlohmann::json& rows, std::vector<double>& flat, std::size_t nrows, const char* what) {
      if (rows.size() != nrows) throw DataError(std::string("neural ") + what + " has wrong row count");
      for (std::size_t r = 0; r < nrows; ++r) {
        auto row = rows[r].get<std::vector<double>>();
        if (row.size() != m.hyper_.dim) throw DataError(std::string("neural ") + what + " has wrong width");
        std::copy(row.begin(), row.end(), flat.begin() + static_cast<std::ptrdiff_t>(r * m.hyper_.dim));
      }
    };
    fill(doc.at("embed"), m.params_.embed, m.params_.vocab, "embed");
    fill(doc.at("proj"), m.params_.proj, outputs, "proj");
    m.params_.bias = doc.at("bias").get<std::vector<double>>();
    if (m.params_.bias.size() != outputs) throw DataError("neural bias has wrong size");
    if (!m.params_.all_finite()) throw DataError("neural parameters are not finite");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed neural backend document: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("malformed neural backend document: ") + e.what());
  }
}

}  // namespace restyle
