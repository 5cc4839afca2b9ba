#pragma once

#include <chrono>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <sys/types.h>

#include "json.hpp"

#include "restyle/backend.hpp"
#include "restyle/classifier.hpp"
#include "restyle/embedder.hpp"

namespace restyle {

/// Client for an external model process speaking newline-delimited JSON on
/// its stdin/stdout. The child must first print {"ready":true,"roles":[...]}.
/// Calls may come from several threads; responses are matched by id, in
/// whatever order the child sends them.
///
/// Failures surface as BackendError: "backend died" once the child's output
/// closes, "protocol error" for an unparseable or unmatched line (the client
/// is unusable afterwards), a timeout message, or the child's own error
/// string for {"ok":false}.
class BridgeClient {
 public:
  explicit BridgeClient(std::vector<std::string> argv,
                        std::chrono::milliseconds timeout = std::chrono::milliseconds(30000));
  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  const std::vector<std::string>& roles() const { return roles_; }
  bool has_role(std::string_view role) const;

  /// Sends {"id":..,"op":op, ...fields} and returns the response, whether
  /// ok or not.
  nlohmann::json request(const std::string& op, nlohmann::json fields = nlohmann::json::object());
  /// Like request() but throws BackendError on {"ok":false}.
  nlohmann::json call(const std::string& op, nlohmann::json fields = nlohmann::json::object());

  std::chrono::milliseconds timeout() const { return timeout_; }

 private:
  void read_loop();
  void fail_all(const std::string& reason);
  void write_line(const std::string& line);
  void shutdown();

  pid_t child_ = -1;
  int fd_ = -1;
  std::chrono::milliseconds timeout_;
  std::vector<std::string> roles_;

  std::mutex write_mutex_;
  std::mutex state_mutex_;
  std::int64_t next_id_ = 1;
  std::map<std::int64_t, std::promise<nlohmann::json>> pending_;
  std::set<std::int64_t> abandoned_;
  std::promise<nlohmann::json> handshake_;
  bool handshake_seen_ = false;
  std::string broken_;
  std::thread reader_;
};

/// Generator role. Soft variants travel as their hard form plus a "blend"
/// field; a child that cannot honor it answers ok:false, which is raised.
class BridgeBackend final : public InfillBackend {
 public:
  BridgeBackend(std::shared_ptr<BridgeClient> client, LabelSet labels);

  BackendKind kind() const override { return BackendKind::Bridge; }
  bool supports(MaskMode) const override { return true; }
  std::vector<TokenSeq> generate(const MaskedVariant& variant, std::size_t control,
                                 const GenOptions& opts) const override;

  /// The request body sent for one generate call.
  nlohmann::json generate_request(const MaskedVariant& variant, std::size_t control, const GenOptions& opts) const;

 private:
  std::shared_ptr<BridgeClient> client_;
  LabelSet labels_;
};

/// Classifier role: {"op":"classify","input":text} -> {"probs":{label:p}}.
class BridgeClassifier final : public AttributeClassifier {
 public:
  BridgeClassifier(std::shared_ptr<BridgeClient> client, LabelSet labels);
  const LabelSet& labels() const override { return labels_; }
  std::vector<double> predict_proba(const TokenSeq& seq) const override;

 private:
  std::shared_ptr<BridgeClient> client_;
  LabelSet labels_;
};

/// Embedder role: {"op":"embed","input":text} -> {"vector":[...]}; cosine
/// is computed locally.
class BridgeEmbedder final : public SimilarityModel {
 public:
  explicit BridgeEmbedder(std::shared_ptr<BridgeClient> client);
  std::vector<double> embed(const TokenSeq& seq) const;
  double similarity(const TokenSeq& a, const TokenSeq& b) const override;

 private:
  std::shared_ptr<BridgeClient> client_;
};

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Protocol conformance suite run by `bridge-check`: handshake, ping,
/// request/response id matching under concurrent calls, exact n outputs,
/// greedy determinism, rejection of malformed requests, the soft-mask
/// path (honored or explicitly rejected), and the train op.
std::vector<ConformanceCheck> run_conformance(BridgeClient& client, const LabelSet& labels);

}  // namespace restyle
