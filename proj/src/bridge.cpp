#include "restyle/bridge.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <stdexcept>

#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "restyle/error.hpp"

namespace restyle {

namespace {

constexpr const char* kDied = "backend died";

std::string protocol_error(const std::string& detail) { return "protocol error: " + detail; }

}  // namespace

BridgeClient::BridgeClient(std::vector<std::string> argv, std::chrono::milliseconds timeout) : timeout_(timeout) {
  if (argv.empty()) throw std::invalid_argument("bridge command is empty");
  if (timeout.count() <= 0) throw std::invalid_argument("bridge timeout must be positive");
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
    throw BackendError(std::string("cannot create bridge socket: ") + std::strerror(errno));

  std::vector<char*> args;
  for (auto& a : argv) args.push_back(a.data());
  args.push_back(nullptr);

  child_ = ::fork();
  if (child_ < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw BackendError(std::string("cannot start bridge process: ") + std::strerror(errno));
  }
  if (child_ == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    static constexpr char msg[] = "bridge: cannot exec backend command\n";
    [[maybe_unused]] auto ignored = ::write(STDERR_FILENO, msg, sizeof msg - 1);
    ::_exit(127);
  }
  ::close(sv[1]);
  fd_ = sv[0];
  auto ready = handshake_.get_future();
  reader_ = std::thread([this] { read_loop(); });

  try {
    if (ready.wait_for(timeout_) != std::future_status::ready) throw BackendError("bridge handshake timed out");
    const auto hello = ready.get();
    if (!hello.is_object() || !hello.contains("ready") || !hello["ready"].is_boolean())
      throw BackendError(protocol_error("handshake line lacks \"ready\""));
    if (!hello["ready"].get<bool>()) {
      const auto err = hello.contains("error") ? hello["error"].dump() : std::string("no reason given");
      throw BackendError("bridge backend not ready: " + err);
    }
    if (!hello.contains("roles") || !hello["roles"].is_array())
      throw BackendError(protocol_error("handshake line lacks \"roles\""));
    for (const auto& r : hello["roles"]) {
      if (!r.is_string()) throw BackendError(protocol_error("role names must be strings"));
      roles_.push_back(r.get<std::string>());
    }
  } catch (...) {
    shutdown();
    throw;
  }
}

BridgeClient::~BridgeClient() { shutdown(); }

void BridgeClient::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
  if (child_ > 0) {
    int status = 0;
    bool exited = false;
    for (int i = 0; i < 200 && !exited; ++i) {
      if (::waitpid(child_, &status, WNOHANG) == child_)
        exited = true;
      else
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!exited) {
      ::kill(child_, SIGKILL);
      ::waitpid(child_, &status, 0);
    }
    child_ = -1;
  }
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  if (reader_.joinable()) reader_.join();
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

bool BridgeClient::has_role(std::string_view role) const {
  return std::find(roles_.begin(), roles_.end(), role) != roles_.end();
}

void BridgeClient::fail_all(const std::string& reason) {
  std::lock_guard lock(state_mutex_);
  if (broken_.empty()) broken_ = reason;
  for (auto& [id, p] : pending_) p.set_exception(std::make_exception_ptr(BackendError(broken_)));
  pending_.clear();
  if (!handshake_seen_) {
    handshake_seen_ = true;
    handshake_.set_exception(std::make_exception_ptr(BackendError(broken_)));
  }
}

void BridgeClient::read_loop() {
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const ssize_t got = ::read(fd_, chunk, sizeof chunk);
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) {
      fail_all(kDied);
      return;
    }
    buffer.append(chunk, static_cast<std::size_t>(got));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      auto msg = nlohmann::json::parse(line, nullptr, false);
      if (msg.is_discarded()) {
        fail_all(protocol_error("unparseable line from backend"));
        return;
      }
      std::lock_guard lock(state_mutex_);
      if (!handshake_seen_) {
        handshake_seen_ = true;
        handshake_.set_value(std::move(msg));
        continue;
      }
      if (!msg.is_object() || !msg.contains("id") || !msg["id"].is_number_integer()) {
        broken_ = protocol_error("response without an integer id");
      } else {
        const auto id = msg["id"].get<std::int64_t>();
        if (auto it = pending_.find(id); it != pending_.end()) {
          it->second.set_value(std::move(msg));
          pending_.erase(it);
          continue;
        }
        if (abandoned_.erase(id)) continue;
        broken_ = protocol_error("response for unknown id " + std::to_string(id));
      }
      for (auto& [id, p] : pending_) p.set_exception(std::make_exception_ptr(BackendError(broken_)));
      pending_.clear();
      return;
    }
  }
}

void BridgeClient::write_line(const std::string& line) {
  std::lock_guard lock(write_mutex_);
  const std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t sent = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (sent < 0 && errno == EINTR) continue;
    if (sent <= 0) {
      fail_all(kDied);
      return;
    }
    off += static_cast<std::size_t>(sent);
  }
}

nlohmann::json BridgeClient::request(const std::string& op, nlohmann::json fields) {
  if (!fields.is_object()) throw std::invalid_argument("bridge request fields must be an object");
  std::int64_t id;
  std::future<nlohmann::json> reply;
  {
    std::lock_guard lock(state_mutex_);
    if (!broken_.empty()) throw BackendError(broken_);
    id = next_id_++;
    reply = pending_[id].get_future();
  }
  fields["id"] = id;
  fields["op"] = op;
  write_line(fields.dump());
  if (reply.wait_for(timeout_) != std::future_status::ready) {
    std::lock_guard lock(state_mutex_);
    if (pending_.erase(id)) {
      abandoned_.insert(id);
      throw BackendError("bridge request '" + op + "' timed out after " + std::to_string(timeout_.count()) + " ms");
    }
  }
  return reply.get();
}

nlohmann::json BridgeClient::call(const std::string& op, nlohmann::json fields) {
  auto resp = request(op, std::move(fields));
  if (!resp.contains("ok") || !resp["ok"].is_boolean()) throw BackendError(protocol_error("response without \"ok\""));
  if (!resp["ok"].get<bool>()) {
    std::string err = "bridge '" + op + "' failed";
    if (resp.contains("error")) err += ": " + (resp["error"].is_string() ? resp["error"].get<std::string>() : resp["error"].dump());
    throw BackendError(err);
  }
  return resp;
}

BridgeBackend::BridgeBackend(std::shared_ptr<BridgeClient> client, LabelSet labels)
    : client_(std::move(client)), labels_(std::move(labels)) {
  if (!client_->has_role("generator")) throw BackendError("bridge backend does not advertise the generator role");
}

nlohmann::json BridgeBackend::generate_request(const MaskedVariant& variant, std::size_t control,
                                               const GenOptions& opts) const {
  check_generate_args(*this, variant, opts);
  const TokenSeq hard = variant.kind == MaskMode::Hard
                            ? variant.hard_tokens
                            : mask_at(variant.source, variant.masked_positions, MaskMode::Hard, 1.0).hard_tokens;
  nlohmann::json req = {{"input", detokenize(hard)},
                        {"control", control_token(labels_, control)},
                        {"n", opts.n},
                        {"mode", opts.mode == DecodeMode::Greedy ? "greedy" : "sample"},
                        {"temperature", opts.temperature},
                        {"seed", opts.seed}};
  if (variant.kind == MaskMode::Soft) {
    double blend = 0.0;
    for (double w : variant.weights) blend = std::max(blend, w);
    req["blend"] = blend;
  }
  return req;
}

std::vector<TokenSeq> BridgeBackend::generate(const MaskedVariant& variant, std::size_t control,
                                              const GenOptions& opts) const {
  const auto resp = client_->call("generate", generate_request(variant, control, opts));
  if (!resp.contains("outputs") || !resp["outputs"].is_array())
    throw BackendError(protocol_error("generate response without \"outputs\""));
  const auto& outs = resp["outputs"];
  if (outs.size() != opts.n)
    throw BackendError(protocol_error("expected " + std::to_string(opts.n) + " outputs, got " +
                                      std::to_string(outs.size())));
  std::vector<TokenSeq> result;
  for (const auto& o : outs) {
    if (!o.is_string()) throw BackendError(protocol_error("generate outputs must be strings"));
    result.push_back(tokenize(o.get<std::string>()));
  }
  return result;
}

BridgeClassifier::BridgeClassifier(std::shared_ptr<BridgeClient> client, LabelSet labels)
    : client_(std::move(client)), labels_(std::move(labels)) {
  if (!client_->has_role("classifier")) throw BackendError("bridge backend does not advertise the classifier role");
}

std::vector<double> BridgeClassifier::predict_proba(const TokenSeq& seq) const {
  const auto resp = client_->call("classify", {{"input", detokenize(seq)}});
  if (!resp.contains("probs") || !resp["probs"].is_object())
    throw BackendError(protocol_error("classify response without \"probs\""));
  std::vector<double> probs;
  double total = 0.0;
  for (const auto& name : labels_.names()) {
    const auto& p = resp["probs"];
    if (!p.contains(name) || !p[name].is_number())
      throw BackendError(protocol_error("classify response lacks label '" + name + "'"));
    const double v = p[name].get<double>();
    if (!(v >= 0.0)) throw BackendError(protocol_error("negative probability for '" + name + "'"));
    probs.push_back(v);
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-4) throw BackendError(protocol_error("class probabilities do not sum to 1"));
  for (auto& v : probs) v /= total;
  return probs;
}

BridgeEmbedder::BridgeEmbedder(std::shared_ptr<BridgeClient> client) : client_(std::move(client)) {
  if (!client_->has_role("embedder")) throw BackendError("bridge backend does not advertise the embedder role");
}

std::vector<double> BridgeEmbedder::embed(const TokenSeq& seq) const {
  const auto resp = client_->call("embed", {{"input", detokenize(seq)}});
  if (!resp.contains("vector") || !resp["vector"].is_array())
    throw BackendError(protocol_error("embed response without \"vector\""));
  std::vector<double> v;
  for (const auto& x : resp["vector"]) {
    if (!x.is_number()) throw BackendError(protocol_error("embedding entries must be numbers"));
    v.push_back(x.get<double>());
  }
  return v;
}

double BridgeEmbedder::similarity(const TokenSeq& a, const TokenSeq& b) const {
  return cosine_similarity(embed(a), embed(b));
}

namespace {

template <class Fn>
void run_check(std::vector<ConformanceCheck>& out, std::string name, Fn&& fn) {
  ConformanceCheck c;
  c.name = std::move(name);
  try {
    std::tie(c.passed, c.detail) = fn();
  } catch (const std::exception& e) {
    c.passed = false;
    c.detail = e.what();
  }
  out.push_back(std::move(c));
}

bool is_ok(const nlohmann::json& resp) { return resp.contains("ok") && resp["ok"].is_boolean() && resp["ok"].get<bool>(); }

bool is_rejection(const nlohmann::json& resp) {
  return resp.contains("ok") && resp["ok"].is_boolean() && !resp["ok"].get<bool>() && resp.contains("error") &&
         resp["error"].is_string();
}

}  // namespace

std::vector<ConformanceCheck> run_conformance(BridgeClient& client, const LabelSet& labels) {
  std::vector<ConformanceCheck> out;
  using Result = std::pair<bool, std::string>;
  run_check(out, "handshake", [&]() -> Result {
    std::string roles;
    for (const auto& r : client.roles()) roles += (roles.empty() ? "" : ",") + r;
    return {!client.roles().empty(), "roles: " + (roles.empty() ? std::string("none") : roles)};
  });
  run_check(out, "ping", [&]() -> Result {
    const auto resp = client.request("ping");
    return {is_ok(resp), resp.dump()};
  });

  const std::string control = control_token(labels, 0);
  auto gen = [&](const std::string& input, std::size_t n, const std::string& mode, std::uint64_t seed) {
    return nlohmann::json{{"input", input}, {"control", control}, {"n", n},
                          {"mode", mode},   {"temperature", 1.0}, {"seed", seed}};
  };

  if (client.has_role("generator")) {
    run_check(out, "id-matching", [&]() -> Result {
      const std::vector<std::string> inputs = {"the food was <mask> .", "<mask> service tonight", "a <mask> b",
                                               "we left <mask>"};
      std::vector<nlohmann::json> serial;
      for (const auto& in : inputs) serial.push_back(client.call("generate", gen(in, 1, "greedy", 0))["outputs"]);
      std::vector<std::future<nlohmann::json>> futures;
      for (const auto& in : inputs)
        futures.push_back(std::async(std::launch::async, [&client, &gen, in] {
          return client.call("generate", gen(in, 1, "greedy", 0))["outputs"];
        }));
      for (std::size_t i = 0; i < inputs.size(); ++i)
        if (futures[i].get() != serial[i]) return {false, "concurrent answer for '" + inputs[i] + "' differs"};
      return {true, std::to_string(inputs.size()) + " concurrent requests matched"};
    });
    run_check(out, "n-count", [&]() -> Result {
      const auto resp = client.call("generate", gen("the food was <mask> .", 3, "sample", 7));
      const bool good = resp.contains("outputs") && resp["outputs"].is_array() && resp["outputs"].size() == 3;
      return {good, good ? "3 outputs for n=3" : "got " + resp.dump()};
    });
    run_check(out, "greedy-determinism", [&]() -> Result {
      const auto a = client.call("generate", gen("the food was <mask> .", 1, "greedy", 1))["outputs"];
      const auto b = client.call("generate", gen("the food was <mask> .", 1, "greedy", 2))["outputs"];
      return {a == b, a == b ? "identical" : a.dump() + " vs " + b.dump()};
    });
    run_check(out, "soft-mask", [&]() -> Result {
      auto req = gen("the food was <mask> .", 1, "greedy", 0);
      req["blend"] = 0.5;
      const auto resp = client.request("generate", req);
      if (is_ok(resp)) return {resp.contains("outputs") && resp["outputs"].size() == 1, "honored"};
      if (is_rejection(resp) && resp["error"].get<std::string>().find("soft mask unsupported") != std::string::npos)
        return {true, "explicitly rejected"};
      return {false, "neither honored nor rejected with \"soft mask unsupported\": " + resp.dump()};
    });
    run_check(out, "malformed-generate", [&]() -> Result {
      const auto resp = client.request("generate", {{"control", control}});
      return {is_rejection(resp), resp.dump()};
    });
  }
  run_check(out, "unknown-op", [&]() -> Result {
    const auto resp = client.request("no-such-op");
    return {is_rejection(resp), resp.dump()};
  });
  run_check(out, "train", [&]() -> Result {
    nlohmann::json pairs = nlohmann::json::array(
        {{{"control", control}, {"input", "the food was <mask> ."}, {"output", "the food was great ."}}});
    const auto resp = client.request("train", {{"pairs", pairs}});
    if (is_ok(resp)) return {true, "accepted"};
    if (is_rejection(resp)) return {true, "declined: " + resp["error"].get<std::string>()};
    return {false, resp.dump()};
  });
  if (client.has_role("classifier")) {
    run_check(out, "classify", [&]() -> Result {
      BridgeClassifier cls(std::shared_ptr<BridgeClient>(&client, [](BridgeClient*) {}), labels);
      const auto p = cls.predict_proba(tokenize("the food was great ."));
      return {p.size() == labels.size(), "probabilities for " + std::to_string(p.size()) + " labels"};
    });
  }
  if (client.has_role("embedder")) {
    run_check(out, "embed", [&]() -> Result {
      BridgeEmbedder emb(std::shared_ptr<BridgeClient>(&client, [](BridgeClient*) {}));
      const auto v = emb.embed(tokenize("the food was great ."));
      return {!v.empty(), "dimension " + std::to_string(v.size())};
    });
  }
  return out;
}

}  // namespace restyle
