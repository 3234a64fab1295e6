#pragma once

#include <stdexcept>
#include <string>

namespace ideolens {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad CSV row, wrong column count, unparseable JSON line).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Data parsed but violates a stimulus or template contract.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CredentialError : public Error {
 public:
  using Error::Error;
};

class MissingInputError : public Error {
 public:
  using Error::Error;
};

/// Transport or protocol failure talking to a scoring backend.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// Backend lacks the scoring mode an item needs.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Variant's character span could not be matched to echoed tokens.
class TokenBoundaryError : public Error {
 public:
  using Error::Error;
};

/// Strict-mode abort; carries the failing item id.
class ScoringError : public Error {
 public:
  ScoringError(std::string item_id, const std::string& what)
      : Error(what), item_id_(std::move(item_id)) {}
  const std::string& item_id() const noexcept { return item_id_; }

 private:
  std::string item_id_;
};

class StatsError : public Error {
 public:
  using Error::Error;
};

}  // namespace ideolens
