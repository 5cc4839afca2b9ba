#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <future>
#include <memory>
#include <thread>

#include "restyle/bridge.hpp"
#include "restyle/error.hpp"
#include "restyle/noising.hpp"
#include "restyle/pipeline.hpp"
#include "test_support.hpp"

using namespace restyle;
using namespace std::chrono_literals;

namespace {

std::shared_ptr<BridgeClient> launch(const std::string& mode, std::chrono::milliseconds timeout = 5000ms) {
  return std::make_shared<BridgeClient>(std::vector<std::string>{FAKE_BRIDGE_PATH, mode}, timeout);
}

const LabelSet& labels() {
  static const LabelSet l({"neg", "pos"});
  return l;
}

MaskedVariant masked_food(MaskMode mode) { return mask_at(tokenize("the food was bad ."), {3}, mode, 0.5); }

GenOptions sample_opts(std::size_t n, std::uint64_t seed) {
  GenOptions o;
  o.n = n;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("handshake and ping") {
  auto client = launch("normal");
  CHECK(client->has_role("generator"));
  CHECK(client->has_role("classifier"));
  CHECK(client->has_role("embedder"));
  CHECK_FALSE(client->has_role("teleporter"));
  const auto resp = client->call("ping");
  CHECK(resp["ok"] == true);
  REQUIRE_THROWS_CONTAINING(BackendError, client->call("no-such-op"), "unknown op");
}

TEST_CASE("generator returns exactly n outputs under the requested control") {
  auto client = launch("normal");
  BridgeBackend backend(client, labels());
  const auto outs = backend.generate(masked_food(MaskMode::Hard), 1, sample_opts(3, 10));
  REQUIRE(outs.size() == 3);
  CHECK(outs[0] == tokenize("the food was great0 ."));
  CHECK(outs[2] == tokenize("the food was great2 ."));
  GenOptions greedy;
  greedy.mode = DecodeMode::Greedy;
  CHECK(backend.generate(masked_food(MaskMode::Hard), 0, greedy)[0] == tokenize("the food was awful ."));
}

TEST_CASE("generate request body") {
  auto client = launch("normal");
  BridgeBackend backend(client, labels());
  const auto hard = backend.generate_request(masked_food(MaskMode::Hard), 1, sample_opts(2, 9));
  CHECK(hard["input"] == "the food was <mask> .");
  CHECK(hard["control"] == control_token(labels(), 1));
  CHECK(hard["n"] == 2);
  CHECK(hard["mode"] == "sample");
  CHECK(hard["seed"] == 9);
  CHECK_FALSE(hard.contains("blend"));
  const auto soft = backend.generate_request(masked_food(MaskMode::Soft), 1, sample_opts(1, 9));
  CHECK(soft["input"] == "the food was <mask> .");
  CHECK(soft["blend"] == doctest::Approx(0.5));
}

TEST_CASE("soft variants are rejected or honored by the child") {
  {
    auto client = launch("normal");
    BridgeBackend backend(client, labels());
    REQUIRE_THROWS_CONTAINING(BackendError, backend.generate(masked_food(MaskMode::Soft), 1, sample_opts(1, 0)),
                              "soft mask unsupported");
    // An ok:false answer leaves the client usable.
    CHECK(client->call("ping")["ok"] == true);
  }
  auto client = launch("soft-ok");
  BridgeBackend backend(client, labels());
  CHECK(backend.generate(masked_food(MaskMode::Soft), 1, sample_opts(1, 0)).size() == 1);
}

TEST_CASE("responses are matched by id when answered out of order") {
  auto client = launch("reverse");
  BridgeBackend backend(client, labels());
  for (int round = 0; round < 5; ++round) {
    auto neg = std::async(std::launch::async, [&] {
      GenOptions g;
      g.mode = DecodeMode::Greedy;
      return backend.generate(masked_food(MaskMode::Hard), 0, g);
    });
    auto pos = std::async(std::launch::async, [&] {
      GenOptions g;
      g.mode = DecodeMode::Greedy;
      return backend.generate(masked_food(MaskMode::Hard), 1, g);
    });
    CHECK(neg.get()[0] == tokenize("the food was awful ."));
    CHECK(pos.get()[0] == tokenize("the food was great ."));
  }
}

TEST_CASE("a child that exits mid-stream is reported as dead") {
  auto client = launch("die-after=1");
  CHECK(client->call("ping")["ok"] == true);
  REQUIRE_THROWS_CONTAINING(BackendError, client->call("ping"), "backend died");
  REQUIRE_THROWS_CONTAINING(BackendError, client->call("ping"), "backend died");
}

TEST_CASE("malformed traffic is a protocol error") {
  {
    auto client = launch("garbage");
    REQUIRE_THROWS_CONTAINING(BackendError, client->call("ping"), "protocol error");
    REQUIRE_THROWS_CONTAINING(BackendError, client->call("ping"), "protocol error");
  }
  {
    auto client = launch("wrong-id");
    REQUIRE_THROWS_CONTAINING(BackendError, client->call("ping"), "protocol error");
  }
  {
    auto client = launch("short-n");
    BridgeBackend backend(client, labels());
    REQUIRE_THROWS_CONTAINING(BackendError, backend.generate(masked_food(MaskMode::Hard), 1, sample_opts(3, 0)),
                              "protocol error: expected 3 outputs, got 2");
  }
}

TEST_CASE("handshake failures") {
  REQUIRE_THROWS_CONTAINING(BackendError, launch("not-ready"), "model failed to load");
  REQUIRE_THROWS_CONTAINING(BackendError, launch("silent", 300ms), "timed out");
  REQUIRE_THROWS_AS(BridgeClient({"/nonexistent/restyle-model"}, 2000ms), BackendError);
  CHECK_THROWS_AS(BridgeClient({FAKE_BRIDGE_PATH}, 0ms), std::invalid_argument);
}

TEST_CASE("roles gate the adapters") {
  auto client = launch("generator");
  CHECK_NOTHROW(BridgeBackend(client, labels()));
  REQUIRE_THROWS_CONTAINING(BackendError, BridgeClassifier(client, labels()), "classifier role");
  REQUIRE_THROWS_CONTAINING(BackendError, BridgeEmbedder(client), "embedder role");
}

TEST_CASE("classifier and embedder adapters") {
  auto client = launch("normal");
  BridgeClassifier cls(client, labels());
  const auto p = cls.predict_proba(tokenize("the food was great ."));
  REQUIRE(p.size() == 2);
  CHECK(p[1] == doctest::Approx(0.9));
  CHECK(p[0] == doctest::Approx(0.1));
  BridgeEmbedder emb(client);
  const auto x = tokenize("the food was great .");
  CHECK(emb.embed(x).size() == 5);
  CHECK(emb.similarity(x, x) == doctest::Approx(1.0));
  CHECK(emb.similarity(x, tokenize("zzz")) < 1.0);
}

TEST_CASE("conformance suite passes against a well-behaved child") {
  for (const char* mode : {"normal", "soft-ok", "generator"}) {
    auto client = launch(mode);
    const auto checks = run_conformance(*client, labels());
    CHECK(checks.size() >= 4);
    for (const auto& c : checks) {
      INFO(mode << " " << c.name << ": " << c.detail);
      CHECK(c.passed);
    }
  }
}

TEST_CASE("conformance suite flags a child that drops outputs") {
  auto client = launch("short-n");
  bool n_count_failed = false;
  for (const auto& c : run_conformance(*client, labels()))
    if (c.name == "n-count") n_count_failed = !c.passed;
  CHECK(n_count_failed);
}

TEST_CASE("transfer runs end to end through the bridge") {
  auto client = launch("normal");
  BridgeBackend backend(client, labels());
  BridgeClassifier cls(client, labels());
  BridgeEmbedder emb(client);
  TransferRequest req;
  req.source = tokenize("the food was bad .");
  req.target_label = 1;
  req.k = 4;
  req.mask.ratio = 0.25;
  req.policy.threshold = 0.6;
  const auto serial = transfer({backend, cls, emb}, req, 1);
  CHECK(serial.candidates.size() == 4);
  CHECK(transfer({backend, cls, emb}, req, 4) == serial);
}
