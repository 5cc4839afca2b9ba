// Scriptable stand-in for an external model process.
//
//   fake_bridge_backend [MODE]
//
// MODE is one of
//   normal        answer each request in arrival order (default)
//   reverse       hold requests in pairs and answer the second one first
//   die-after=N   exit without a word after reading N requests
//   garbage       answer the first request with a non-JSON line
//   wrong-id      answer the first request with an id nobody asked for
//   short-n       return one output fewer than requested
//   not-ready     fail the handshake
//   silent        never send the handshake
//   soft-ok       honor "blend" instead of rejecting it
//   generator     advertise only the generator role
#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"

using nlohmann::json;

namespace {

std::string fill(const std::string& input, const std::string& word) {
  std::string out = input;
  const std::string sentinel = "<mask>";
  for (auto pos = out.find(sentinel); pos != std::string::npos; pos = out.find(sentinel, pos + word.size()))
    out.replace(pos, sentinel.size(), word);
  return out;
}

json answer(const json& req, const std::string& mode) {
  const auto id = req.at("id");
  const std::string op = req.value("op", "");
  auto fail = [&](const std::string& msg) { return json{{"id", id}, {"ok", false}, {"error", msg}}; };
  if (op == "ping") return {{"id", id}, {"ok", true}};
  if (op == "train") return fail("training unsupported");
  if (op == "generate") {
    if (!req.contains("input") || !req["input"].is_string() || !req.contains("n") || !req["n"].is_number_integer())
      return fail("generate needs \"input\" and \"n\"");
    if (req.contains("blend") && mode != "soft-ok") return fail("soft mask unsupported");
    const std::string input = req["input"].get<std::string>();
    const std::string control = req.value("control", "");
    const bool greedy = req.value("mode", "sample") == "greedy";
    std::size_t n = req["n"].get<std::size_t>();
    if (mode == "short-n" && n > 0) --n;
    const std::uint64_t seed = req.value("seed", std::uint64_t{0});
    json outputs = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      std::string word = control.find("pos") != std::string::npos ? "great" : "awful";
      if (!greedy) word += std::to_string((seed + i) % 5);
      outputs.push_back(fill(input, word));
    }
    return {{"id", id}, {"ok", true}, {"outputs", outputs}};
  }
  if (op == "classify") {
    const std::string input = req.value("input", "");
    const double pos = input.find("great") != std::string::npos ? 0.9 : 0.2;
    return {{"id", id}, {"ok", true}, {"probs", {{"neg", 1.0 - pos}, {"pos", pos}}}};
  }
  if (op == "embed") {
    const std::string input = req.value("input", "");
    json v = json::array();
    for (char c : std::string("aeiou")) v.push_back(static_cast<double>(std::count(input.begin(), input.end(), c)) + 1.0);
    return {{"id", id}, {"ok", true}, {"vector", v}};
  }
  return fail("unknown op '" + op + "'");
}

void send(const json& j) { std::cout << j.dump() << "\n" << std::flush; }

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "normal";
  long die_after = -1;
  if (mode.rfind("die-after=", 0) == 0) die_after = std::stol(mode.substr(10));

  if (mode == "silent") {
    std::string ignored;
    while (std::getline(std::cin, ignored)) {
    }
    return 0;
  }
  if (mode == "not-ready") {
    send({{"ready", false}, {"error", "model failed to load"}});
    return 1;
  }
  json roles = mode == "generator" ? json::array({"generator"}) : json::array({"generator", "classifier", "embedder"});
  send({{"ready", true}, {"roles", roles}});

  std::vector<json> held;
  long seen = 0;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    ++seen;
    if (die_after >= 0 && seen > die_after) return 3;
    json req = json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.is_object() || !req.contains("id")) {
      send({{"id", nullptr}, {"ok", false}, {"error", "malformed request"}});
      continue;
    }
    if (mode == "garbage" && seen == 1) {
      std::cout << "this is not json\n" << std::flush;
      continue;
    }
    if (mode == "wrong-id" && seen == 1) {
      send({{"id", 9999}, {"ok", true}});
      continue;
    }
    if (mode == "reverse") {
      held.push_back(req);
      if (held.size() == 2) {
        send(answer(held[1], mode));
        send(answer(held[0], mode));
        held.clear();
      }
      continue;
    }
    send(answer(req, mode));
  }
  for (const auto& r : held) send(answer(r, mode));
  return 0;
}
