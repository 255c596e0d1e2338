#pragma once

#include <stdexcept>
#include <string>

namespace refflow {

// Malformed or inconsistent input data. Maps to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command line or config. Maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Retries against a remote API were exhausted. Maps to exit code 3.
class NetworkExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-retryable HTTP failure (4xx other than 429).
class HttpError : public std::runtime_error {
 public:
  HttpError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace refflow
