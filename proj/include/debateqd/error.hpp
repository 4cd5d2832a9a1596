#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace debateqd {

/// Base class of every error raised by the library. `exit_code()` is the
/// process status the CLI reports for this error class.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Missing or malformed input data (corpus files, persisted state).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Fewer questions survived filtering than were requested.
class ShortfallError : public DataError {
 public:
  ShortfallError(std::size_t available, std::size_t requested)
      : DataError("question selection shortfall: " + std::to_string(available) +
                  " eligible questions, " + std::to_string(requested) + " requested"),
        available_(available),
        requested_(requested) {}
  std::size_t available() const noexcept { return available_; }
  std::size_t requested() const noexcept { return requested_; }

 private:
  std::size_t available_;
  std::size_t requested_;
};

class GatewayError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// The backend answered, but the answer breaks the request contract.
class ProtocolError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class CacheCorruption : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// Mutator output that could not be parsed after all retries.
class MutationError : public GatewayError {
 public:
  MutationError(const std::string& what, std::string raw)
      : GatewayError(what), raw_(std::move(raw)) {}
  const std::string& raw_output() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// Resume refused (config hash mismatch or directory locked).
class ResumeError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

}  // namespace debateqd
