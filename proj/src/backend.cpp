#include "restyle/backend.hpp"

#include <stdexcept>

#include "restyle/count_backend.hpp"
#include "restyle/error.hpp"
#include "restyle/neural_backend.hpp"
#include "restyle/persistence.hpp"

namespace restyle {

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Count: return "count";
    case BackendKind::Neural: return "neural";
    case BackendKind::Bridge: return "bridge";
  }
  return "unknown";
}

BackendKind parse_backend_kind(const std::string& name) {
  if (name == "count") return BackendKind::Count;
  if (name == "neural") return BackendKind::Neural;
  if (name == "bridge") return BackendKind::Bridge;
  throw std::invalid_argument("unknown backend kind '" + name + "'");
}

void GenOptions::validate() const {
  if (n == 0) throw std::invalid_argument("n must be at least 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (mode == DecodeMode::Greedy && n > 1) throw std::invalid_argument("greedy decoding with n > 1");
}

void check_generate_args(const InfillBackend& backend, const MaskedVariant& variant, const GenOptions& opts) {
  opts.validate();
  if (!backend.supports(variant.kind))
    throw std::invalid_argument(to_string(backend.kind()) + " backend does not support this variant kind");
}

std::unique_ptr<InfillBackend> backend_train(BackendKind kind, std::shared_ptr<const Vocab> vocab,
                                             const std::vector<TrainingPair>& pairs, const BackendHyper& hyper,
                                             std::uint64_t seed) {
  switch (kind) {
    case BackendKind::Count: return std::make_unique<CountBackend>(CountBackend::train(std::move(vocab), pairs));
    case BackendKind::Neural:
      return std::make_unique<NeuralBackend>(NeuralBackend::train(std::move(vocab), pairs, hyper.neural, seed));
    case BackendKind::Bridge: break;
  }
  throw std::invalid_argument("bridge backends are trained through the bridge client");
}

nlohmann::json backend_to_json(const InfillBackend& backend) {
  if (const auto* c = dynamic_cast<const CountBackend*>(&backend)) return c->to_json();
  if (const auto* n = dynamic_cast<const NeuralBackend*>(&backend)) return n->to_json();
  throw std::invalid_argument(to_string(backend.kind()) + " backends have no model document");
}

std::unique_ptr<InfillBackend> backend_from_json(const nlohmann::json& doc) {
  const std::string tag = doc.is_object() && doc.contains("format") && doc["format"].is_string()
                              ? doc["format"].get<std::string>()
                              : std::string();
  if (tag == format_tag(ModelFormat::CountBackend)) return std::make_unique<CountBackend>(CountBackend::from_json(doc));
  if (tag == format_tag(ModelFormat::NeuralBackend))
    return std::make_unique<NeuralBackend>(NeuralBackend::from_json(doc));
  throw DataError("unsupported backend format '" + tag + "'; expected format " +
                  format_tag(ModelFormat::CountBackend) + " or " + format_tag(ModelFormat::NeuralBackend));
}

}  // namespace restyle
