#pragma once

#include <stdexcept>
#include <string>

namespace restyle {

/// Base of all library errors. Contract violations by the caller (bad
/// option values, wrong variant kind) throw std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems with input data: empty corpora, unreadable or malformed files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Failures reported by a generation backend or the external bridge.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace restyle
