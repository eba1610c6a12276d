#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace expire_treap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lookup or removal of a key that is not stored.
class NotFound : public Error {
 public:
  NotFound() : Error("key is not in treap") {}
  explicit NotFound(const std::string& what) : Error(what) {}
};

/// A range query with lo > hi.
class InvalidRange : public Error {
 public:
  InvalidRange() : Error("invalid range: lo > hi") {}
};

/// A descent exceeded the configured depth guard. Raised instead of letting
/// a degenerate (correlated) treap exhaust memory on its path stack.
class DepthLimitExceeded : public Error {
 public:
  explicit DepthLimitExceeded(std::size_t limit)
      : Error("treap depth limit exceeded (" + std::to_string(limit) +
              "); keys and expiration times are probably correlated, "
              "consider hashed keys") {}
};

/// Store insert with an expiration time that is not in the future.
class AlreadyExpired : public Error {
 public:
  AlreadyExpired() : Error("record is already expired at insertion time") {}
};

/// Rate of expiration requested over an empty database.
class UndefinedRoE : public Error {
 public:
  UndefinedRoE() : Error("rate of expiration undefined: no live data and no expirations") {}
};

/// Malformed configuration, trace file or CLI parameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace expire_treap
