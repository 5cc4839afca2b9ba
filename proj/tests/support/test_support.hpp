#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "doctest.h"

namespace test {

/// Runs `f`, requires it to throw `E`, and returns the message.
template <class E, class F>
std::string thrown_message(F&& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  } catch (const std::exception& e) {
    FAIL("wrong exception type: " << e.what());
    return {};
  }
  FAIL("no exception thrown");
  return {};
}

#define REQUIRE_THROWS_CONTAINING(Type, expr, needle)                                    \
  do {                                                                                   \
    const std::string msg_ = ::test::thrown_message<Type>([&] { (void)(expr); });        \
    INFO("message: " << msg_);                                                           \
    CHECK(msg_.find(needle) != std::string::npos);                                       \
  } while (0)

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("restyle-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace test
